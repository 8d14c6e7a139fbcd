#include "grafenne/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "grafenne/io.hpp"

namespace grafenne {

namespace {

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("empty entry in list '" + s + "'");
    out.push_back(item);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

double to_double(const std::string& s) {
  double x = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || end != s.data() + s.size()) throw ConfigError("not a number: '" + s + "'");
  return x;
}

std::uint64_t to_uint(const std::string& s) {
  std::uint64_t x = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || end != s.data() + s.size()) throw ConfigError("not a nonnegative integer: '" + s + "'");
  return x;
}

int to_int(const std::string& s) {
  const auto x = to_uint(s);
  if (x > 1'000'000'000ULL) throw ConfigError("integer too large: '" + s + "'");
  return static_cast<int>(x);
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("expected true or false, got '" + s + "'");
}

template <typename T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + f(v[i]);
  return out;
}

struct Key {
  std::string help;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

using Keys = std::vector<std::pair<std::string, Key>>;

std::string num(double x) { return format_double(x); }

const Keys& keys() {
  using C = ExperimentConfig;
  using S = const std::string&;
  static const Keys table = {
      {"dataset", {"toy | synthetic | files", [](C& c, S v) { c.dataset = v; }, [](const C& c) { return c.dataset; }}},
      {"name", {"dataset column in results (default derived)", [](C& c, S v) { c.name = v; },
                [](const C& c) { return c.name; }}},
      {"edges", {"edge file, u<TAB>v", [](C& c, S v) { c.edges = v; }, [](const C& c) { return c.edges.string(); }}},
      {"features", {"feature file, u<TAB>f<TAB>value", [](C& c, S v) { c.features = v; },
                    [](const C& c) { return c.features.string(); }}},
      {"labels", {"label file, u<TAB>class", [](C& c, S v) { c.labels = v; },
                  [](const C& c) { return c.labels.string(); }}},
      {"feature_embeddings", {"optional start vectors, feature<TAB>v1..vd", [](C& c, S v) { c.feature_embeddings = v; },
                              [](const C& c) { return c.feature_embeddings.string(); }}},
      {"stream_file", {"stream to replay (stream); generated when empty", [](C& c, S v) { c.stream_file = v; },
                       [](const C& c) { return c.stream_file.string(); }}},
      {"task", {"node_classification | link_prediction", [](C& c, S v) { c.task = parse_task(v); },
                [](const C& c) { return std::string(task_name(c.task)); }}},
      {"methods", {"comma list of methods", [](C& c, S v) { c.methods = split_list(v); },
                   [](const C& c) { return join<std::string>(c.methods, [](auto& s) { return s; }); }}},
      {"p", {"comma list of missing rates in [0,1]",
             [](C& c, S v) {
               c.p.clear();
               for (auto& x : split_list(v)) c.p.push_back(to_double(x));
             },
             [](const C& c) { return join<double>(c.p, [](auto& x) { return num(x); }); }}},
      {"seeds", {"comma list of repetition seeds",
                 [](C& c, S v) {
                   c.seeds.clear();
                   for (auto& x : split_list(v)) c.seeds.push_back(to_uint(x));
                 },
                 [](const C& c) { return join<std::uint64_t>(c.seeds, [](auto& x) { return std::to_string(x); }); }}},
      {"layers", {"message-passing layers", [](C& c, S v) { c.model.layers = to_int(v); },
                  [](const C& c) { return std::to_string(c.model.layers); }}},
      {"dim", {"hidden width d", [](C& c, S v) { c.model.dim = to_uint(v); },
               [](const C& c) { return std::to_string(c.model.dim); }}},
      {"leaky_slope", {"LeakyReLU slope in attention", [](C& c, S v) { c.model.leaky_slope = to_double(v); },
                       [](const C& c) { return num(c.model.leaky_slope); }}},
      {"gin_epsilon", {"GIN self weight epsilon", [](C& c, S v) { c.model.gin_epsilon = to_double(v); },
                       [](const C& c) { return num(c.model.gin_epsilon); }}},
      {"cap_graph", {"graph neighbors sampled per node in training (0 = all)",
                     [](C& c, S v) { c.model.cap_graph = to_uint(v); },
                     [](const C& c) { return std::to_string(c.model.cap_graph); }}},
      {"cap_nodes", {"graph nodes sampled per feature node in training (0 = all)",
                     [](C& c, S v) { c.model.cap_nodes = to_uint(v); },
                     [](const C& c) { return std::to_string(c.model.cap_nodes); }}},
      {"cap_features", {"feature nodes sampled per graph node in training (0 = all)",
                        [](C& c, S v) { c.model.cap_features = to_uint(v); },
                        [](const C& c) { return std::to_string(c.model.cap_features); }}},
      {"epochs", {"training epochs", [](C& c, S v) { c.train.epochs = to_int(v); },
                  [](const C& c) { return std::to_string(c.train.epochs); }}},
      {"lr", {"Adam learning rate", [](C& c, S v) { c.train.lr = to_double(v); },
              [](const C& c) { return num(c.train.lr); }}},
      {"patience", {"early stop after this many epochs without a better validation loss (0 = never)",
                    [](C& c, S v) { c.train.patience = to_int(v); },
                    [](const C& c) { return std::to_string(c.train.patience); }}},
      {"negative_ratio", {"negatives per positive edge", [](C& c, S v) { c.train.negative_ratio = to_uint(v); },
                          [](const C& c) { return std::to_string(c.train.negative_ratio); }}},
      {"split", {"train,val,test fractions",
                 [](C& c, S v) {
                   const auto parts = split_list(v);
                   if (parts.size() != 3) throw ConfigError("split needs three fractions");
                   c.train.fractions = {to_double(parts[0]), to_double(parts[1]), to_double(parts[2])};
                 },
                 [](const C& c) {
                   const auto& f = c.train.fractions;
                   return num(f.train) + "," + num(f.val) + "," + num(f.test);
                 }}},
      {"fp_iterations", {"feature propagation iterations", [](C& c, S v) { c.fp.iterations = to_int(v); },
                         [](const C& c) { return std::to_string(c.fp.iterations); }}},
      {"fp_norm", {"symmetric | random_walk",
                   [](C& c, S v) {
                     if (v == "symmetric") c.fp.norm = PropagationNorm::kSymmetric;
                     else if (v == "random_walk") c.fp.norm = PropagationNorm::kRandomWalk;
                     else throw ConfigError("fp_norm must be symmetric or random_walk");
                   },
                   [](const C& c) {
                     return std::string(c.fp.norm == PropagationNorm::kSymmetric ? "symmetric" : "random_walk");
                   }}},
      {"stream_steps", {"generated stream length T", [](C& c, S v) { c.stream.steps = to_int(v); },
                        [](const C& c) { return std::to_string(c.stream.steps); }}},
      {"p_n", {"node selection probability per step", [](C& c, S v) { c.stream.p_n = to_double(v); },
               [](const C& c) { return num(c.stream.p_n); }}},
      {"p_f_add", {"feature addition probability", [](C& c, S v) { c.stream.p_f_add = to_double(v); },
                   [](const C& c) { return num(c.stream.p_f_add); }}},
      {"p_f_del", {"feature deletion probability", [](C& c, S v) { c.stream.p_f_del = to_double(v); },
                   [](const C& c) { return num(c.stream.p_f_del); }}},
      {"p_e_add", {"edge addition probability", [](C& c, S v) { c.stream.p_e_add = to_double(v); },
                   [](const C& c) { return num(c.stream.p_e_add); }}},
      {"p_e_del", {"edge deletion probability", [](C& c, S v) { c.stream.p_e_del = to_double(v); },
                   [](const C& c) { return num(c.stream.p_e_del); }}},
      {"stream_values", {"binary | uniform values for added features",
                         [](C& c, S v) {
                           if (v == "binary") c.stream.values = FeatureValueMode::kBinary;
                           else if (v == "uniform") c.stream.values = FeatureValueMode::kUniform;
                           else throw ConfigError("stream_values must be binary or uniform");
                         },
                         [](const C& c) {
                           return std::string(c.stream.values == FeatureValueMode::kBinary ? "binary" : "uniform");
                         }}},
      {"synthetic_nodes", {"nodes of the synthetic graph", [](C& c, S v) { c.drift.nodes = to_uint(v); },
                           [](const C& c) { return std::to_string(c.drift.nodes); }}},
      {"synthetic_classes", {"classes of the synthetic graph", [](C& c, S v) { c.drift.classes = to_int(v); },
                             [](const C& c) { return std::to_string(c.drift.classes); }}},
      {"synthetic_label_noise", {"share of synthetic labels redrawn at random",
                                 [](C& c, S v) { c.drift.label_noise = to_double(v); },
                                 [](const C& c) { return num(c.drift.label_noise); }}},
      {"strategies", {"comma list of ewc, ft, er, oracle",
                      [](C& c, S v) {
                        c.strategies.clear();
                        for (auto& s : split_list(v)) c.strategies.push_back(parse_strategy(s));
                      },
                      [](const C& c) {
                        return join<Strategy>(c.strategies, [](auto& s) { return std::string(strategy_name(s)); });
                      }}},
      {"lambda", {"EWC penalty strength", [](C& c, S v) { c.lambda = to_double(v); },
                  [](const C& c) { return num(c.lambda); }}},
      {"u_size", {"EWC sample |U|", [](C& c, S v) { c.u_size = to_uint(v); },
                  [](const C& c) { return std::to_string(c.u_size); }}},
      {"replay_capacity", {"ER buffer size", [](C& c, S v) { c.replay_capacity = to_uint(v); },
                           [](const C& c) { return std::to_string(c.replay_capacity); }}},
      {"step_epochs", {"epochs per stream update", [](C& c, S v) { c.step_epochs = to_int(v); },
                       [](const C& c) { return std::to_string(c.step_epochs); }}},
      {"step_lr", {"learning rate per stream update", [](C& c, S v) { c.step_lr = to_double(v); },
                   [](const C& c) { return num(c.step_lr); }}},
      {"scale", {"translate: multiply stored values", [](C& c, S v) { c.scale = to_double(v); },
                 [](const C& c) { return num(c.scale); }}},
      {"shift", {"translate: add to stored values", [](C& c, S v) { c.shift = to_double(v); },
                 [](const C& c) { return num(c.shift); }}},
      {"out", {"output path (--out overrides)", [](C& c, S v) { c.out = v; }, [](const C& c) { return c.out.string(); }}},
      {"seed", {"global seed (--seed overrides)", [](C& c, S v) { c.seed = to_uint(v); },
                [](const C& c) { return std::to_string(c.seed); }}},
      {"workers", {"worker threads for run (--workers overrides)", [](C& c, S v) { c.workers = to_int(v); },
                   [](const C& c) { return std::to_string(c.workers); }}},
      {"timing", {"record wall time in seconds columns", [](C& c, S v) { c.timing = to_bool(v); },
                  [](const C& c) { return std::string(c.timing ? "true" : "false"); }}},
  };
  return table;
}

struct MethodSpec {
  enum Kind { kGrafenne, kDense, kVanilla } kind = kGrafenne;
  Phase2Backend backend = Phase2Backend::kSage;
  enum Fill { kNone, kNm, kFp } fill = kNone;
};

MethodSpec method_spec(const std::string& m) {
  using K = MethodSpec;
  static const std::map<std::string, MethodSpec> specs = {
      {"grafenne", {K::kGrafenne, Phase2Backend::kSage, K::kNone}},
      {"grafenne_gat", {K::kGrafenne, Phase2Backend::kGat, K::kNone}},
      {"grafenne_gin", {K::kGrafenne, Phase2Backend::kGin, K::kNone}},
      {"sage", {K::kDense, Phase2Backend::kSage, K::kNone}},
      {"gat", {K::kDense, Phase2Backend::kGat, K::kNone}},
      {"gin", {K::kDense, Phase2Backend::kGin, K::kNone}},
      {"nm+sage", {K::kDense, Phase2Backend::kSage, K::kNm}},
      {"fp+sage", {K::kDense, Phase2Backend::kSage, K::kFp}},
      {"nm+grafenne", {K::kGrafenne, Phase2Backend::kSage, K::kNm}},
      {"fp+grafenne", {K::kGrafenne, Phase2Backend::kSage, K::kFp}},
      {"vanilla_alt", {K::kVanilla, Phase2Backend::kSage, K::kNone}},
  };
  const auto it = specs.find(m);
  if (it == specs.end()) throw ConfigError("unknown method '" + m + "'");
  return it->second;
}

}  // namespace

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = {"grafenne", "grafenne_gat", "grafenne_gin", "sage",
                                                 "gat",      "gin",          "nm+sage",      "fp+sage",
                                                 "nm+grafenne", "fp+grafenne", "vanilla_alt"};
  return names;
}

void ExperimentConfig::validate() const {
  if (dataset != "toy" && dataset != "synthetic" && dataset != "files") {
    throw ConfigError("dataset must be toy, synthetic or files, got '" + dataset + "'");
  }
  if (dataset == "files" && (edges.empty() || features.empty())) {
    throw ConfigError("dataset = files needs edges and features");
  }
  if (methods.empty()) throw ConfigError("no methods");
  for (const auto& m : methods) method_spec(m);
  for (double x : p) {
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("missing rate " + format_double(x) + " outside [0, 1]");
  }
  if (p.empty() || seeds.empty()) throw ConfigError("p and seeds need at least one value");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (train.epochs < 0 || train.lr < 0) throw ConfigError("epochs and lr must be nonnegative");
  if (task == Task::kLinkPrediction && train.negative_ratio < 1) throw ConfigError("negative_ratio must be at least 1");
  if (strategies.empty()) throw ConfigError("no strategies");
  if (fp.iterations < 1) throw ConfigError("fp_iterations must be at least 1");
  model.validate();
}

std::string ExperimentConfig::dataset_name() const {
  if (!name.empty()) return name;
  if (dataset != "files") return dataset;
  const auto dir = edges.parent_path().filename().string();
  return dir.empty() ? edges.stem().string() : dir;
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
  ExperimentConfig c;
  std::map<std::string, int> seen;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto where = source + ":" + std::to_string(number) + ": ";
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(body.substr(0, eq)), value = trim(body.substr(eq + 1));
    const auto& table = keys();
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& k) { return k.first == key; });
    if (it == table.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (seen.count(key)) throw ConfigError(where + "'" + key + "' already set on line " + std::to_string(seen[key]));
    seen[key] = number;
    try {
      it->second.set(c, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  return parse_config(in, path.string());
}

std::string config_reference() {
  const ExperimentConfig defaults;
  std::ostringstream out;
  out << "Config file: one `key = value` per line, '#' starts a comment. Unknown keys are errors.\n"
      << "Methods: " << join<std::string>(method_names(), [](auto& s) { return s; }) << "\n\n";
  for (const auto& [key, k] : keys()) {
    std::string line = key + " = " + k.get(defaults);
    if (line.size() < 34) line.resize(34, ' ');
    out << "  " << line << "  # " << k.help << '\n';
  }
  return out.str();
}

HeteroGraph toy_graph() {
  // Three topics, four words each, plus four shared words.
  Rng rng(20240611);
  HeteroGraph g;
  const char* topics[] = {"theory", "systems", "learning"};
  for (auto t : topics) g.class_names().intern(t);
  g.set_num_classes(3);
  for (FeatureId f = 0; f < 16; ++f) g.feature_names().intern("w" + std::to_string(f));
  const NodeId n = 90;
  for (NodeId v = 0; v < n; ++v) {
    g.node_names().intern("paper" + std::to_string(v));
    const int c = static_cast<int>(v % 3);
    g.add_node(v, c);
    for (auto k : rng.sample_without_replacement(4, 2)) g.set_feature(v, static_cast<FeatureId>(4 * c) + static_cast<FeatureId>(k), 1.0);
    if (rng.bernoulli(0.5)) g.set_feature(v, 12 + static_cast<FeatureId>(rng.index(4)), 1.0);
  }
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = a + 1; b < n; ++b) {
      if (rng.bernoulli(a % 3 == b % 3 ? 0.1 : 0.01)) g.add_edge(a, b);
    }
  }
  return g;
}

HeteroGraph load_dataset(const ExperimentConfig& config) {
  if (config.dataset == "toy") return toy_graph();
  if (config.dataset == "synthetic") {
    DriftConfig d = config.drift;
    d.seed = derive_seed(config.seed, "synthetic");
    return make_drift_stream(d).graph;
  }
  return load_graph({config.edges, config.features, config.labels});
}

std::uint64_t cell_seed(const ExperimentConfig& config, std::uint64_t seed) {
  return derive_seed(config.seed, "cell", seed);
}

namespace {

class Clock {
 public:
  explicit Clock(bool on) : on_(on), start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return on_ ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count() : 0.0;
  }

 private:
  bool on_;
  std::chrono::steady_clock::time_point start_;
};

DenseFeatures dense_features(const MethodSpec& spec, const HeteroGraph& g, const ObservedMask& mask,
                             const PropagationOptions& fp) {
  switch (spec.fill) {
    case MethodSpec::kNm: return impute_neighborhood_mean(g, mask);
    case MethodSpec::kFp: return feature_propagation(g, mask, fp);
    case MethodSpec::kNone: break;
  }
  return impute_special_label(g, mask, 0.0);
}

}  // namespace

CellResult run_cell(const HeteroGraph& g, const ExperimentConfig& config, const std::string& method, double p,
                    std::uint64_t seed) {
  const Clock clock(config.timing);
  const MethodSpec spec = method_spec(method);
  const std::uint64_t cs = cell_seed(config, seed);
  const MaskedGraph masked = mask_features(g, p, derive_seed(cs, "mask"), feature_columns(g));

  GrafenneConfig mc = config.model;
  mc.phase2 = spec.backend;
  mc.seed = derive_seed(cs, "model");
  TrainConfig tc = config.train;
  tc.task = config.task;

  // Imputation sees only what training may see: for link prediction the
  // held-out positives are removed first.
  const bool links = config.task == Task::kLinkPrediction;
  EdgeSplit edge_split;
  HeteroGraph visible = masked.graph;
  if (links) {
    edge_split = split_edges(masked.graph, tc.fractions, tc.negative_ratio, derive_seed(cs, "split"));
    std::vector<Edge> held(edge_split.val_pos);
    held.insert(held.end(), edge_split.test_pos.begin(), edge_split.test_pos.end());
    visible = without_edges(masked.graph, held);
  }

  HeteroGraph work = masked.graph;
  std::unique_ptr<Encoder> encoder;
  switch (spec.kind) {
    case MethodSpec::kGrafenne: {
      if (spec.fill != MethodSpec::kNone) {
        work = resparsify(masked.graph, dense_features(spec, visible, masked.observed, config.fp));
      }
      GrafenneModel model(mc);
      if (!config.feature_embeddings.empty()) load_feature_embeddings(config.feature_embeddings, g.feature_names(), model.table());
      encoder = std::make_unique<GrafenneEncoder>(std::move(model));
      break;
    }
    case MethodSpec::kDense: {
      DenseFeatures x = dense_features(spec, visible, masked.observed, config.fp);
      DenseGnnConfig dc;
      dc.backend = spec.backend;
      dc.layers = mc.layers;
      dc.in_dim = x.columns;
      dc.dim = mc.dim;
      dc.leaky_slope = mc.leaky_slope;
      dc.gin_epsilon = mc.gin_epsilon;
      dc.seed = mc.seed;
      encoder = std::make_unique<DenseEncoder>(DenseGnn(dc), std::move(x));
      break;
    }
    case MethodSpec::kVanilla: encoder = std::make_unique<VanillaAltEncoder>(VanillaAltModel(mc)); break;
  }

  CellResult r;
  if (links) {
    r.value = train_link_predictor(*encoder, work, edge_split, tc, cs).test_metric;
  } else {
    const Split split = make_split(work, tc.fractions, derive_seed(cs, "split"));
    r.value = train_node_classifier(*encoder, work, split, tc, cs).test_metric;
  }
  r.seconds = clock.seconds();
  return r;
}

std::vector<ResultRow> run_experiment(const HeteroGraph& g, const ExperimentConfig& config) {
  config.validate();
  struct Cell {
    std::string method;
    double p;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const auto& m : config.methods) {
    for (double p : config.p) {
      for (auto s : config.seeds) cells.push_back({m, p, s});
    }
  }
  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_lock;
  auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        results[i] = run_cell(g, config, cells[i].method, cells[i].p, cells[i].seed);
      } catch (...) {
        std::lock_guard lock(failure_lock);
        if (!failure) failure = std::current_exception();
        next = cells.size();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(config.workers), cells.size());
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  const std::string metric = config.task == Task::kLinkPrediction ? "auc" : "accuracy";
  std::vector<ResultRow> rows;
  std::size_t k = 0;
  for (const auto& m : config.methods) {
    for (double p : config.p) {
      RunResult r;
      for (auto s : config.seeds) {
        r.seeds.push_back(s);
        r.values.push_back(results[k].value);
        r.seconds.push_back(results[k].seconds);
        ++k;
      }
      auto part = result_rows(config.dataset_name(), m, config.task, p, metric, r);
      rows.insert(rows.end(), part.begin(), part.end());
    }
  }
  return rows;
}

StreamInput load_stream_input(const ExperimentConfig& config) {
  StreamInput in;
  if (config.dataset == "synthetic") {
    DriftConfig d = config.drift;
    d.stream = config.stream;
    d.seed = derive_seed(config.seed, "synthetic");
    auto ds = make_drift_stream(d);
    in.graph = std::move(ds.graph);
    in.deltas = std::move(ds.deltas);
    if (!config.stream_file.empty()) in.deltas = read_stream(config.stream_file, in.graph);
    return in;
  }
  in.graph = load_dataset(config);
  if (!config.stream_file.empty()) {
    in.deltas = read_stream(config.stream_file, in.graph);
  } else {
    StreamConfig s = config.stream;
    s.seed = derive_seed(config.seed, "stream");
    in.deltas = generate_stream(in.graph, s);
  }
  return in;
}

ContinualConfig continual_config(const ExperimentConfig& config) {
  ContinualConfig c;
  c.model = config.model;
  c.model.seed = derive_seed(config.seed, "model");
  c.train = config.train;
  c.step_epochs = config.step_epochs;
  c.step_lr = config.step_lr;
  c.lambda = config.lambda;
  c.u_size = config.u_size;
  c.replay_capacity = config.replay_capacity;
  c.fractions = config.train.fractions;
  c.seed = config.seed;
  c.timing = config.timing;
  return c;
}

std::vector<StreamResult> run_stream_experiment(const StreamInput& input, const ExperimentConfig& config) {
  config.validate();
  return run_streams(input.graph, input.deltas, config.strategies, continual_config(config));
}

}  // namespace grafenne
