#include "grafenne/continual.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <iostream>

#include "grafenne/io.hpp"
#include "grafenne/optim.hpp"

namespace grafenne {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kEwc: return "ewc";
    case Strategy::kFineTune: return "ft";
    case Strategy::kReplay: return "er";
    case Strategy::kOracle: return "oracle";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "ewc") return Strategy::kEwc;
  if (name == "ft") return Strategy::kFineTune;
  if (name == "er") return Strategy::kReplay;
  if (name == "oracle") return Strategy::kOracle;
  throw ConfigError("unknown strategy '" + name + "' (expected ewc, ft, er or oracle)");
}

EwcState EwcState::capture(std::span<const Parameter> params, std::vector<double> omega, double lambda) {
  EwcState s;
  s.lambda = lambda;
  s.offsets.push_back(0);
  for (const auto& p : params) {
    s.names.push_back(p.name());
    const auto v = p.tensor().values();
    s.previous.insert(s.previous.end(), v.begin(), v.end());
    s.offsets.push_back(s.previous.size());
  }
  if (omega.size() != s.previous.size()) {
    throw DimensionError("importance has " + std::to_string(omega.size()) + " entries, parameters have " +
                         std::to_string(s.previous.size()));
  }
  s.omega = std::move(omega);
  return s;
}

std::size_t EwcState::find(const std::string& name) const {
  return static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
}

namespace {

// Drops gradient buffers entirely, so a parameter the next loss does not
// reach is skipped by Adam instead of stepping on a zero gradient.
void clear_grads(std::vector<Parameter>& params) {
  for (auto& p : params) p.tensor().node()->grad.clear();
}

}  // namespace

std::vector<double> compute_importance(std::vector<Parameter>& params, std::size_t count,
                                       const std::function<Tensor(std::size_t)>& item_loss,
                                       std::ostream* warnings) {
  std::size_t total = 0;
  for (const auto& p : params) total += p.numel();
  std::vector<double> omega(total, 0.0);
  if (count == 0) {
    (warnings ? *warnings : std::cerr) << "warning: no unaffected nodes to weigh parameters on; importance is 0\n";
    return omega;
  }
  for (std::size_t i = 0; i < count; ++i) {
    clear_grads(params);
    backward(item_loss(i));
    std::size_t off = 0;
    for (const auto& p : params) {
      if (p.tensor().has_grad()) {
        const auto g = p.tensor().grad();
        for (std::size_t j = 0; j < g.size(); ++j) omega[off + j] += g[j] * g[j];
      }
      off += p.numel();
    }
  }
  for (double& w : omega) w /= static_cast<double>(count);
  clear_grads(params);
  return omega;
}

Tensor continual_loss(const Tensor& task_loss, std::span<const Parameter> params, const EwcState& ewc) {
  if (ewc.lambda == 0.0) return task_loss;
  Tensor penalty;
  for (const auto& p : params) {
    const std::size_t k = ewc.find(p.name());
    if (k == ewc.names.size()) continue;
    const std::size_t lo = ewc.offsets[k], hi = ewc.offsets[k + 1];
    if (hi - lo != p.numel()) {
      throw DimensionError("parameter " + p.name() + " has " + std::to_string(p.numel()) +
                           " entries, the stored snapshot " + std::to_string(hi - lo));
    }
    const Shape& shape = p.tensor().shape();
    const Tensor prev = Tensor::from(shape, {ewc.previous.begin() + lo, ewc.previous.begin() + hi});
    const Tensor omega = Tensor::from(shape, {ewc.omega.begin() + lo, ewc.omega.begin() + hi});
    const Tensor d = ops::sub(p.tensor(), prev);
    const Tensor term = ops::sum(ops::mul(omega, ops::mul(d, d)));
    penalty = penalty.defined() ? ops::add(penalty, term) : term;
  }
  if (!penalty.defined()) return task_loss;
  return ops::add(task_loss, ops::scale(penalty, ewc.lambda / 2.0));
}

std::vector<NodeId> sample_U(std::span<const NodeId> train_nodes, std::size_t size, std::uint64_t seed) {
  if (size > train_nodes.size()) {
    throw ConfigError("cannot sample " + std::to_string(size) + " of " + std::to_string(train_nodes.size()) +
                      " training nodes");
  }
  Rng rng(derive_seed(seed, "ewc-U"));
  std::vector<NodeId> out;
  out.reserve(size);
  for (auto k : rng.sample_without_replacement(train_nodes.size(), size)) out.push_back(train_nodes[k]);
  std::sort(out.begin(), out.end());
  return out;
}

void ReplayBuffer::offer(NodeId node, int label) {
  if (!seen_.insert(node).second) return;
  if (items_.size() < capacity_) {
    items_.emplace_back(node, label);
    return;
  }
  if (capacity_ == 0) return;
  const std::size_t j = rng_.index(seen_.size());
  if (j < capacity_) items_[j] = {node, label};
}

std::vector<std::pair<NodeId, int>> ReplayBuffer::items() const {
  auto out = items_;
  std::sort(out.begin(), out.end());
  return out;
}

Split stream_split(const HeteroGraph& g1, std::span<const StreamDelta> deltas, const SplitFractions& fractions,
                   std::uint64_t seed) {
  std::set<NodeId> ids;
  for (NodeId v : g1.labeled_nodes()) ids.insert(v);
  for (const auto& d : deltas) {
    for (const auto& a : d.added_nodes) {
      if (a.label != kNoLabel) ids.insert(a.node);
    }
  }
  return make_split(std::vector<NodeId>(ids.begin(), ids.end()), fractions, seed);
}

namespace {

std::vector<NodeId> present(const std::vector<NodeId>& ids, const HeteroGraph& g) {
  std::vector<NodeId> out;
  for (NodeId v : ids) {
    if (g.has_node(v) && g.label(v) != kNoLabel) out.push_back(v);
  }
  return out;
}

Split restrict(const Split& s, const HeteroGraph& g) { return {present(s.train, g), present(s.val, g), present(s.test, g)}; }

struct Learner {
  GrafenneEncoder encoder;
  ClassifierHead head;

  std::vector<Parameter> parameters() const {
    auto p = encoder.parameters();
    for (const auto& h : head.parameters()) p.push_back(h);
    return p;
  }

  Learner copy() const {
    return {GrafenneEncoder(encoder.model().deep_copy()),
            {{head.layer.weight.deep_copy(), head.layer.bias.deep_copy()}}};
  }

  Tensor logits(bool training, Rng& rng) { return classify_head(encoder.encode(training, rng), head); }
};

Learner fresh_learner(const ContinualConfig& config, std::size_t classes) {
  return {GrafenneEncoder(GrafenneModel(config.model)),
          ClassifierHead::create(config.model.dim, classes, derive_seed(config.seed, "head"))};
}

Learner train_from_scratch(const HeteroGraph& g, const Split& split, const ContinualConfig& config,
                           std::size_t classes) {
  Learner l = fresh_learner(config, classes);
  train_node_classifier(l.encoder, l.head, g, restrict(split, g), config.train, config.seed);
  return l;
}

std::vector<int> labels_of(const HeteroGraph& g, std::span<const NodeId> ids) {
  std::vector<int> y;
  for (NodeId v : ids) y.push_back(g.label(v));
  return y;
}

double test_accuracy(Learner& l, const HeteroGraph& g, const Split& split) {
  NoGradGuard guard;
  Rng unused(0);
  const auto test = present(split.test, g);
  const auto predicted = argmax_rows(ops::gather_rows(l.logits(false, unused), rows_for(g, test)));
  return accuracy(predicted, labels_of(g, test));
}

using ValueMap = std::map<std::string, std::vector<double>>;

ValueMap values_of(const std::vector<Parameter>& params) {
  ValueMap m;
  for (const auto& p : params) m[p.name()].assign(p.tensor().values().begin(), p.tensor().values().end());
  return m;
}

std::size_t count_changed(const ValueMap& before, const std::vector<Parameter>& params) {
  std::size_t n = 0;
  for (const auto& p : params) {
    const auto it = before.find(p.name());
    const auto v = p.tensor().values();
    if (it == before.end() || it->second.size() != v.size()) {
      n += v.size();
      continue;
    }
    for (std::size_t i = 0; i < v.size(); ++i) n += std::bit_cast<std::uint64_t>(v[i]) != std::bit_cast<std::uint64_t>(it->second[i]);
  }
  return n;
}

std::uint64_t fingerprint(const std::vector<Parameter>& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params) {
    for (double x : p.tensor().values()) h = (h ^ std::bit_cast<std::uint64_t>(x)) * 1099511628211ULL;
  }
  return h;
}

std::size_t entry_count(const std::vector<Parameter>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.numel();
  return n;
}

class Clock {
 public:
  explicit Clock(bool on) : on_(on), start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    if (!on_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool on_;
  std::chrono::steady_clock::time_point start_;
};

// One strategy from t = 2 on.
void follow(StreamResult& result, Learner learner, const std::vector<HeteroGraph>& snapshots,
            const std::vector<std::set<NodeId>>& affected, std::span<const StreamDelta> deltas, const Split& split,
            std::size_t classes, const ContinualConfig& config, std::ostream* warnings) {
  const Strategy strategy = result.strategy;
  ReplayBuffer buffer(strategy == Strategy::kReplay ? config.replay_capacity : 0, derive_seed(config.seed, "replay"));
  for (NodeId v : present(split.train, snapshots[0])) buffer.offer(v, snapshots[0].label(v));
  EwcState ewc;

  for (std::size_t k = 0; k < deltas.size(); ++k) {
    const int t = static_cast<int>(k) + 2;
    const HeteroGraph& g = snapshots[k + 1];
    StepRecord rec;
    rec.t = t;
    if (deltas[k].empty()) {
      rec = result.steps.back();
      rec.t = t;
      rec.seconds = 0.0;
      rec.params_changed = 0;
      rec.trained_nodes = 0;
      result.steps.push_back(rec);
      continue;
    }
    const Clock clock(config.timing);
    const ValueMap before = values_of(learner.parameters());

    if (strategy == Strategy::kOracle) {
      learner = train_from_scratch(g, split, config, classes);
      rec.trained_nodes = present(split.train, g).size();
    } else {
      std::set<std::string> known;
      for (const auto& p : learner.parameters()) known.insert(p.name());
      learner.encoder.bind(g);
      auto params = learner.parameters();
      clear_grads(params);

      const auto train_now = present(split.train, g);
      std::vector<NodeId> targets;
      for (NodeId v : train_now) {
        if (affected[k + 1].count(v)) targets.push_back(v);
      }
      std::vector<int> y = labels_of(g, targets);
      if (strategy == Strategy::kReplay && !targets.empty()) {
        for (const auto& [v, label] : buffer.items()) {
          if (!g.has_node(v) || std::binary_search(targets.begin(), targets.end(), v)) continue;
          targets.push_back(v);
          y.push_back(label);
        }
      }
      rec.trained_nodes = targets.size();

      if (!targets.empty()) {
        if (strategy == Strategy::kEwc) {
          const auto U = sample_U(train_now, std::min(config.u_size, train_now.size()),
                                  derive_seed(config.seed, "U", static_cast<std::uint64_t>(t)));
          std::vector<NodeId> unaffected;
          std::set_difference(U.begin(), U.end(), targets.begin(), targets.end(), std::back_inserter(unaffected));
          const auto rows = rows_for(g, unaffected);
          const auto uy = labels_of(g, unaffected);
          Rng unused(0);
          auto omega = compute_importance(params, unaffected.size(), [&](std::size_t i) {
            const std::size_t r[] = {rows[i]};
            const int l[] = {uy[i]};
            return ops::cross_entropy(ops::gather_rows(learner.logits(false, unused), r), l, Reduction::kSum);
          }, warnings);
          // Rows created at this timestamp have nothing to preserve.
          std::size_t off = 0;
          for (const auto& p : params) {
            if (!known.count(p.name())) std::fill_n(omega.begin() + static_cast<std::ptrdiff_t>(off), p.numel(), 0.0);
            off += p.numel();
          }
          ewc = EwcState::capture(params, std::move(omega), config.lambda);
          ewc.U = U;
        }

        const auto rows = rows_for(g, targets);
        AdamOptions opts;
        opts.lr = config.step_lr;
        AdamState adam;
        Rng rng(derive_seed(config.seed, "sampling", static_cast<std::uint64_t>(t)));
        for (int epoch = 0; epoch < config.step_epochs; ++epoch) {
          zero_grads(params);
          Tensor loss = ops::cross_entropy(ops::gather_rows(learner.logits(true, rng), rows), y, Reduction::kSum);
          if (strategy == Strategy::kEwc) loss = continual_loss(loss, params, ewc);
          backward(loss);
          adam_step(params, opts, adam);
        }
        clear_grads(params);
      }
      if (strategy == Strategy::kReplay) {
        for (NodeId v : train_now) {
          if (affected[k + 1].count(v)) buffer.offer(v, g.label(v));
        }
      }
    }

    const auto params = learner.parameters();
    rec.accuracy = test_accuracy(learner, g, split);
    rec.params_changed = count_changed(before, params);
    rec.parameter_entries = entry_count(params);
    rec.state_entries = ewc.entries();
    rec.fingerprint = fingerprint(params);
    rec.seconds = clock.seconds();
    result.steps.push_back(rec);
  }
}

}  // namespace

std::vector<StreamResult> run_streams(const HeteroGraph& g1, std::span<const StreamDelta> deltas,
                                      std::span<const Strategy> strategies, const ContinualConfig& config,
                                      std::ostream* warnings) {
  config.model.validate();
  if (config.step_epochs < 0) throw ConfigError("step_epochs must be nonnegative");
  if (config.lambda < 0) throw ConfigError("lambda must be nonnegative");
  const Split split = stream_split(g1, deltas, config.fractions, config.seed);

  std::size_t classes = class_count(g1);
  std::vector<HeteroGraph> snapshots{g1};
  std::vector<std::set<NodeId>> affected{{}};
  for (const auto& d : deltas) {
    for (const auto& a : d.added_nodes) classes = std::max(classes, static_cast<std::size_t>(a.label + 1));
    auto r = apply_delta(snapshots.back(), d);
    snapshots.push_back(std::move(r.graph));
    affected.push_back(std::move(r.affected));
  }

  const Clock clock(config.timing);
  Learner base = train_from_scratch(g1, split, config, classes);
  StepRecord first;
  first.t = 1;
  first.accuracy = test_accuracy(base, g1, split);
  const auto params = base.parameters();
  first.params_changed = entry_count(params);
  first.parameter_entries = first.params_changed;
  first.trained_nodes = present(split.train, g1).size();
  first.fingerprint = fingerprint(params);
  first.seconds = clock.seconds();

  std::vector<StreamResult> out;
  for (Strategy s : strategies) {
    StreamResult r;
    r.strategy = s;
    r.steps.push_back(first);
    follow(r, base.copy(), snapshots, affected, deltas, split, classes, config, warnings);
    out.push_back(std::move(r));
  }
  return out;
}

StreamResult run_stream(const HeteroGraph& g1, std::span<const StreamDelta> deltas, Strategy strategy,
                        const ContinualConfig& config, std::ostream* warnings) {
  const Strategy one[] = {strategy};
  return run_streams(g1, deltas, one, config, warnings).front();
}

DriftStream make_drift_stream(const DriftConfig& config) {
  if (config.classes < 1 || config.nodes < 1) throw ConfigError("drift stream needs nodes and classes");
  const std::size_t informative = config.features_per_class * static_cast<std::size_t>(config.classes);
  if (config.informative_per_node > config.features_per_class || config.noise_per_node > config.noise_features) {
    throw ConfigError("per-node feature counts exceed their groups");
  }
  Rng rng(derive_seed(config.seed, "drift-graph"));
  DriftStream out;
  HeteroGraph& g = out.graph;
  g.set_num_classes(config.classes);
  for (NodeId v = 0; v < config.nodes; ++v) {
    const auto c = rng.index(static_cast<std::size_t>(config.classes));
    g.add_node(v, static_cast<int>(c));
    for (auto k : rng.sample_without_replacement(config.features_per_class, config.informative_per_node)) {
      g.set_feature(v, static_cast<FeatureId>(c * config.features_per_class + k), 1.0);
    }
    for (auto k : rng.sample_without_replacement(config.noise_features, config.noise_per_node)) {
      g.set_feature(v, static_cast<FeatureId>(informative + k), 1.0);
    }
  }
  for (NodeId v = 0; v < config.nodes; ++v) {
    if (rng.bernoulli(config.label_noise)) g.set_label(v, static_cast<int>(rng.index(static_cast<std::size_t>(config.classes))));
  }
  for (NodeId a = 0; a < config.nodes; ++a) {
    for (NodeId b = a + 1; b < config.nodes; ++b) {
      if (rng.bernoulli(g.label(a) == g.label(b) ? config.p_in : config.p_out)) g.add_edge(a, b);
    }
  }
  StreamConfig s = config.stream;
  s.feature_universe = informative + config.noise_features + config.unseen_features;
  s.seed = derive_seed(config.seed, "drift-stream");
  out.deltas = generate_stream(g, s);
  return out;
}

void write_stream_header(std::ostream& out) { out << "strategy,t,accuracy,seconds,params_changed\n"; }

void write_stream_rows(std::ostream& out, const StreamResult& result) {
  for (const auto& s : result.steps) {
    out << strategy_name(result.strategy) << ',' << s.t << ',' << format_double(s.accuracy) << ','
        << format_double(s.seconds) << ',' << s.params_changed << '\n';
  }
}

}  // namespace grafenne
