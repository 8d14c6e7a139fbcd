#include "grafenne/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "grafenne/io.hpp"
#include "grafenne/optim.hpp"

namespace grafenne {

const char* task_name(Task t) {
  return t == Task::kNodeClassification ? "node_classification" : "link_prediction";
}

Task parse_task(const std::string& name) {
  if (name == "node_classification") return Task::kNodeClassification;
  if (name == "link_prediction") return Task::kLinkPrediction;
  throw ConfigError("unknown task '" + name + "' (expected node_classification or link_prediction)");
}

// ---------------------------------------------------------------------------
// Encoders

void GrafenneEncoder::bind(const HeteroGraph& g) {
  alt_ = to_allotropic(g);
  model_.table().ensure_all(alt_);
  full_ = MessageIndex::full(alt_);
}

Tensor GrafenneEncoder::encode(bool training, Rng& rng) {
  const auto& c = model_.config();
  const bool sample = training && (c.cap_features || c.cap_nodes || c.cap_graph);
  if (sample) return model_.forward(alt_, MessageIndex::sampled(alt_, c, rng)).graph;
  return model_.forward(alt_, full_).graph;
}

DenseEncoder::DenseEncoder(DenseGnn model, DenseFeatures features)
    : model_(std::move(model)), features_(std::move(features)), x_(features_.tensor()) {}

void DenseEncoder::bind(const HeteroGraph& g) {
  if (features_.nodes != g.node_ids()) throw DimensionError("dense feature rows do not match the graph's nodes");
  adj_ = adjacency(g);
}

Tensor DenseEncoder::encode(bool, Rng&) { return model_.forward(x_, adj_); }

void VanillaAltEncoder::bind(const HeteroGraph& g) {
  alt_ = to_allotropic(g);
  model_.table().ensure_all(alt_);
}

Tensor VanillaAltEncoder::encode(bool, Rng&) { return model_.forward(alt_); }

// ---------------------------------------------------------------------------
// Heads and metrics

ClassifierHead ClassifierHead::create(std::size_t dim, std::size_t classes, std::uint64_t seed) {
  return {{glorot_parameter("head/weight", {dim, classes}, seed), zero_parameter("head/bias", {classes})}};
}

Tensor classify_head(const Tensor& h, const ClassifierHead& head) {
  return ops::add_bias(ops::matmul(h, head.layer.weight.tensor()), head.layer.bias.tensor());
}

Tensor link_score(const Tensor& h, std::span<const std::size_t> u, std::span<const std::size_t> v) {
  return ops::row_dot(ops::gather_rows(h, u), ops::gather_rows(h, v));
}

double link_score(std::span<const double> hu, std::span<const double> hv) {
  if (hu.size() != hv.size()) throw DimensionError("link_score needs equal dimensions");
  double s = 0.0;
  for (std::size_t i = 0; i < hu.size(); ++i) s += hu[i] * hv[i];
  return s;
}

std::vector<Edge> negative_sample(const HeteroGraph& g, std::size_t count, std::uint64_t seed,
                                  std::span<const Edge> exclude) {
  const auto nodes = g.node_ids();
  const std::size_t n = nodes.size();
  std::set<Edge> taken(g.edges().begin(), g.edges().end());
  for (auto e : exclude) taken.insert(Edge::canonical(e.u, e.v));
  const std::size_t pairs = n < 2 ? 0 : n * (n - 1) / 2;
  if (taken.size() >= pairs || pairs - taken.size() < count) {
    throw DataError("graph has only " + std::to_string(pairs - std::min(pairs, taken.size())) +
                    " free node pairs, " + std::to_string(count) + " negatives requested");
  }
  Rng rng(derive_seed(seed, "negatives"));
  std::vector<Edge> out;
  out.reserve(count);
  const std::size_t free_pairs = pairs - taken.size();
  if (2 * count > free_pairs) {
    // Dense case: enumerate the free pairs.
    std::vector<Edge> pool;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        Edge e{nodes[a], nodes[b]};
        if (!taken.count(e)) pool.push_back(e);
      }
    }
    for (auto k : rng.sample_without_replacement(pool.size(), count)) out.push_back(pool[k]);
  } else {
    while (out.size() < count) {
      const auto a = rng.index(n), b = rng.index(n);
      if (a == b) continue;
      const Edge e = Edge::canonical(nodes[a], nodes[b]);
      if (taken.insert(e).second) out.push_back(e);
    }
  }
  return out;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw DimensionError("accuracy: size mismatch");
  if (labels.empty()) throw DataError("accuracy of an empty set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c) {
      if (logits.at(r, c) > logits.at(r, best)) best = c;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

double auc_roc(std::span<const double> scores, std::span<const int> targets) {
  if (scores.size() != targets.size()) throw DimensionError("auc_roc: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0, positives = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (targets[order[k]]) {
        positive_rank_sum += rank;
        positives += 1.0;
      }
    }
    i = j;
  }
  const double negatives = static_cast<double>(scores.size()) - positives;
  if (positives == 0 || negatives == 0) throw DataError("auc_roc needs both classes");
  return (positive_rank_sum - positives * (positives + 1) / 2.0) / (positives * negatives);
}

// ---------------------------------------------------------------------------
// Training

std::vector<std::size_t> rows_for(const HeteroGraph& g, std::span<const NodeId> ids) {
  const auto nodes = g.node_ids();
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  for (NodeId v : ids) {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
    if (it == nodes.end() || *it != v) throw DataError("node " + std::to_string(v) + " is not in the graph");
    rows.push_back(static_cast<std::size_t>(it - nodes.begin()));
  }
  return rows;
}

namespace {

using Snapshot = std::vector<std::vector<double>>;

Snapshot snapshot(const std::vector<Parameter>& params) {
  Snapshot s;
  s.reserve(params.size());
  for (const auto& p : params) s.emplace_back(p.tensor().values().begin(), p.tensor().values().end());
  return s;
}

void restore(std::vector<Parameter>& params, const Snapshot& s) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::copy(s[i].begin(), s[i].end(), params[i].tensor().mutable_values().begin());
  }
}

std::vector<int> labels_of(const HeteroGraph& g, std::span<const NodeId> ids) {
  std::vector<int> y;
  y.reserve(ids.size());
  for (NodeId v : ids) {
    const int label = g.label(v);
    if (label == kNoLabel) throw DataError("node " + std::to_string(v) + " has no label");
    y.push_back(label);
  }
  return y;
}

// Shared best-validation loop. `step` runs one optimization step, `val_loss`
// evaluates without gradients.
template <typename Step, typename Val>
TrainOutcome fit(std::vector<Parameter>& params, const TrainConfig& config, Step step, Val val_loss) {
  if (config.epochs < 0) throw ConfigError("epochs must be nonnegative");
  TrainOutcome out;
  AdamOptions opts;
  opts.lr = config.lr;
  AdamState adam;
  double best = val_loss();
  out.val_losses.push_back(best);
  Snapshot best_params = snapshot(params);
  int since = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    zero_grads(params);
    backward(step());
    adam_step(params, opts, adam);
    out.epochs_run = epoch;
    const double v = val_loss();
    out.val_losses.push_back(v);
    if (v < best) {
      best = v;
      out.best_epoch = epoch;
      best_params = snapshot(params);
      since = 0;
    } else if (config.patience > 0 && ++since >= config.patience) {
      break;
    }
  }
  restore(params, best_params);
  out.best_val_loss = best;
  return out;
}

}  // namespace

std::size_t class_count(const HeteroGraph& g) {
  int classes = g.num_classes();
  for (const auto& [_, rec] : g.records()) classes = std::max(classes, rec.label + 1);
  if (classes < 1) throw DataError("graph has no labeled nodes");
  return static_cast<std::size_t>(classes);
}

TrainOutcome train_node_classifier(Encoder& encoder, const HeteroGraph& g, const Split& split,
                                   const TrainConfig& config, std::uint64_t seed) {
  auto head = ClassifierHead::create(encoder.dim(), class_count(g), derive_seed(seed, "head"));
  return train_node_classifier(encoder, head, g, split, config, seed);
}

TrainOutcome train_node_classifier(Encoder& encoder, ClassifierHead& head, const HeteroGraph& g, const Split& split,
                                   const TrainConfig& config, std::uint64_t seed) {
  if (split.train.empty() || split.val.empty() || split.test.empty()) {
    throw DataError("node classification needs nonempty train, val and test sets");
  }
  encoder.bind(g);
  auto params = encoder.parameters();
  for (const auto& p : head.parameters()) params.push_back(p);

  const auto train_rows = rows_for(g, split.train), val_rows = rows_for(g, split.val),
             test_rows = rows_for(g, split.test);
  const auto train_y = labels_of(g, split.train), val_y = labels_of(g, split.val), test_y = labels_of(g, split.test);
  Rng rng(derive_seed(seed, "sampling"));

  auto logits = [&](bool training) { return classify_head(encoder.encode(training, rng), head); };
  auto step = [&] { return ops::cross_entropy(ops::gather_rows(logits(true), train_rows), train_y); };
  auto val_loss = [&] {
    NoGradGuard guard;
    return ops::cross_entropy(ops::gather_rows(logits(false), val_rows), val_y).item();
  };
  TrainOutcome out = fit(params, config, step, val_loss);
  NoGradGuard guard;
  out.test_metric = accuracy(argmax_rows(ops::gather_rows(logits(false), test_rows)), test_y);
  return out;
}

EdgeSplit split_edges(const HeteroGraph& g, const SplitFractions& fractions, std::size_t negative_ratio,
                      std::uint64_t seed) {
  std::vector<Edge> edges(g.edges().begin(), g.edges().end());
  std::vector<NodeId> index(edges.size());
  std::iota(index.begin(), index.end(), 0);
  const Split s = make_split(index, fractions, derive_seed(seed, "edge-split"));
  EdgeSplit out;
  auto take = [&](const std::vector<NodeId>& ids, std::vector<Edge>& dst) {
    for (auto i : ids) dst.push_back(edges[i]);
  };
  take(s.train, out.train_pos);
  take(s.val, out.val_pos);
  take(s.test, out.test_pos);
  const std::size_t a = out.train_pos.size() * negative_ratio, b = out.val_pos.size() * negative_ratio,
                    c = out.test_pos.size() * negative_ratio;
  const auto neg = negative_sample(g, a + b + c, derive_seed(seed, "edge-negatives"));
  out.train_neg.assign(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(a));
  out.val_neg.assign(neg.begin() + static_cast<std::ptrdiff_t>(a), neg.begin() + static_cast<std::ptrdiff_t>(a + b));
  out.test_neg.assign(neg.begin() + static_cast<std::ptrdiff_t>(a + b), neg.end());
  return out;
}

HeteroGraph without_edges(const HeteroGraph& g, std::span<const Edge> edges) {
  HeteroGraph out = g;
  for (auto e : edges) out.remove_edge(e.u, e.v);
  return out;
}

TrainOutcome train_link_predictor(Encoder& encoder, const HeteroGraph& g, const EdgeSplit& split,
                                  const TrainConfig& config, std::uint64_t seed) {
  if (split.train_pos.empty() || split.val_pos.empty() || split.test_pos.empty()) {
    throw DataError("link prediction needs nonempty train, val and test edge sets");
  }
  std::vector<Edge> held(split.val_pos);
  held.insert(held.end(), split.test_pos.begin(), split.test_pos.end());
  const HeteroGraph train_graph = without_edges(g, held);
  encoder.bind(train_graph);
  auto params = encoder.parameters();

  struct Pairs {
    std::vector<std::size_t> u, v;
    std::vector<double> y;
  };
  auto pairs = [&](const std::vector<Edge>& pos, const std::vector<Edge>& neg) {
    Pairs p;
    std::vector<NodeId> us, vs;
    for (const auto* list : {&pos, &neg}) {
      for (auto e : *list) {
        us.push_back(e.u);
        vs.push_back(e.v);
        p.y.push_back(list == &pos ? 1.0 : 0.0);
      }
    }
    p.u = rows_for(g, us);
    p.v = rows_for(g, vs);
    return p;
  };
  const Pairs train = pairs(split.train_pos, split.train_neg), val = pairs(split.val_pos, split.val_neg),
              test = pairs(split.test_pos, split.test_neg);
  Rng rng(derive_seed(seed, "sampling"));

  auto step = [&] { return ops::bce_with_logits(link_score(encoder.encode(true, rng), train.u, train.v), train.y); };
  auto val_loss = [&] {
    NoGradGuard guard;
    return ops::bce_with_logits(link_score(encoder.encode(false, rng), val.u, val.v), val.y).item();
  };
  TrainOutcome out = fit(params, config, step, val_loss);
  NoGradGuard guard;
  const Tensor scores = link_score(encoder.encode(false, rng), test.u, test.v);
  std::vector<int> targets(test.y.begin(), test.y.end());
  out.test_metric = auc_roc(scores.values(), targets);
  return out;
}

// ---------------------------------------------------------------------------
// Results

double RunResult::mean() const {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double RunResult::stddev() const {
  if (values.empty()) return 0.0;
  const double m = mean();
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(values.size()));
}

double RunResult::total_seconds() const { return std::accumulate(seconds.begin(), seconds.end(), 0.0); }

std::string display(const RunResult& r, double scale) {
  const double m = r.mean() * scale;
  double s = r.stddev() * scale;
  if (s < 0.01) s = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", m, s);
  return buf;
}

std::vector<ResultRow> result_rows(const std::string& dataset, const std::string& method, Task task, double p,
                                   const std::string& metric, const RunResult& r) {
  std::vector<ResultRow> rows;
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    rows.push_back({dataset, method, task_name(task), p, std::to_string(r.seeds[i]), metric, r.values[i],
                    i < r.seconds.size() ? r.seconds[i] : 0.0});
  }
  rows.push_back({dataset, method, task_name(task), p, "mean", metric, r.mean(), r.total_seconds()});
  rows.push_back({dataset, method, task_name(task), p, "std", metric, r.stddev(), 0.0});
  return rows;
}

void write_result_header(std::ostream& out) { out << "dataset,method,task,p,seed,metric,value,seconds\n"; }

void write_result_rows(std::ostream& out, std::span<const ResultRow> rows) {
  for (const auto& r : rows) {
    out << r.dataset << ',' << r.method << ',' << r.task << ',' << format_double(r.p) << ',' << r.seed << ','
        << r.metric << ',' << format_double(r.value) << ',' << format_double(r.seconds) << '\n';
  }
}

}  // namespace grafenne
