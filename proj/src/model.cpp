#include "grafenne/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "grafenne/optim.hpp"

namespace grafenne {

const char* backend_name(Phase2Backend b) {
  switch (b) {
    case Phase2Backend::kSage:
      return "sage";
    case Phase2Backend::kGat:
      return "gat";
    case Phase2Backend::kGin:
      return "gin";
  }
  return "?";
}

Phase2Backend parse_backend(const std::string& name) {
  if (name == "sage") return Phase2Backend::kSage;
  if (name == "gat") return Phase2Backend::kGat;
  if (name == "gin") return Phase2Backend::kGin;
  throw ConfigError("unknown phase-2 backend '" + name + "' (expected sage, gat or gin)");
}

void GrafenneConfig::validate() const {
  if (layers < 1) throw ConfigError("layers must be at least 1");
  if (dim < 1) throw ConfigError("dim must be at least 1");
  if (!(leaky_slope >= 0.0)) throw ConfigError("leaky_slope must be nonnegative");
}

Parameter glorot_parameter(const std::string& name, Shape shape, std::uint64_t seed) {
  std::size_t fan_in = 1, fan_out = 1;
  if (shape.size() == 2) {
    fan_in = shape[0];
    fan_out = shape[1];
  } else if (shape.size() == 1) {
    fan_out = shape[0];
  }
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Rng rng(derive_seed(seed, name));
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-limit, limit);
  return Parameter(name, Tensor::from(std::move(shape), std::move(v), true));
}

Parameter zero_parameter(const std::string& name, Shape shape) {
  return Parameter(name, Tensor::zeros(std::move(shape), true));
}

std::vector<DenseLayer> make_mlp(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
                                 std::uint64_t seed) {
  return {{glorot_parameter(name + "/0/weight", {in, hidden}, seed), zero_parameter(name + "/0/bias", {hidden})},
          {glorot_parameter(name + "/1/weight", {hidden, out}, seed), zero_parameter(name + "/1/bias", {out})}};
}

// ---------------------------------------------------------------------------
// Embedding table

const Parameter& FeatureEmbeddingTable::at(FeatureId f) const {
  auto it = rows_.find(f);
  if (it == rows_.end()) throw IntegrityError("no embedding row for feature " + std::to_string(f));
  return it->second;
}

bool FeatureEmbeddingTable::ensure(FeatureId f) {
  if (rows_.count(f)) return false;
  Rng rng(derive_seed(seed_, "feat_emb", f));
  std::vector<double> v(dim_);
  for (auto& x : v) x = rng.normal();
  rows_.emplace(f, Parameter(row_name(f), Tensor::from({dim_}, std::move(v), true)));
  return true;
}

void FeatureEmbeddingTable::ensure_all(const AllotropicGraph& alt) {
  for (FeatureId f : alt.feature_nodes()) ensure(f);
}

void FeatureEmbeddingTable::set(FeatureId f, std::vector<double> values) {
  if (values.size() != dim_) {
    throw DimensionError("embedding row for feature " + std::to_string(f) + " has " + std::to_string(values.size()) +
                         " values, expected " + std::to_string(dim_));
  }
  auto it = rows_.find(f);
  if (it == rows_.end()) {
    rows_.emplace(f, Parameter(row_name(f), Tensor::from({dim_}, std::move(values), true)));
  } else {
    std::copy(values.begin(), values.end(), it->second.tensor().mutable_values().begin());
  }
}

std::vector<Parameter> FeatureEmbeddingTable::parameters() const {
  std::vector<Parameter> out;
  out.reserve(rows_.size());
  for (const auto& [_, p] : rows_) out.push_back(p);
  return out;
}

FeatureEmbeddingTable FeatureEmbeddingTable::deep_copy() const {
  FeatureEmbeddingTable t(dim_, seed_);
  for (const auto& [f, p] : rows_) t.rows_.emplace(f, p.deep_copy());
  return t;
}

std::size_t load_feature_embeddings(const std::filesystem::path& path, const NameRegistry& names,
                                    FeatureEmbeddingTable& table) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t count = 0, number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    const std::string where = path.string() + ":" + std::to_string(number) + ": ";
    if (fields.size() != table.dim() + 1) {
      throw DataError(where + "expected " + std::to_string(table.dim() + 1) + " fields, got " +
                      std::to_string(fields.size()));
    }
    auto f = names.find(fields[0]);
    if (!f) continue;  // features absent from the graph are ignored
    std::vector<double> values(table.dim());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto& s = fields[i + 1];
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), values[i]);
      if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError(where + "not a number: '" + s + "'");
    }
    table.set(*f, std::move(values));
    ++count;
  }
  return count;
}

// ---------------------------------------------------------------------------
// Layers

GrafenneLayer GrafenneLayer::create(const GrafenneConfig& config, int index) {
  const std::size_t d = config.dim;
  const std::uint64_t s = config.seed;
  const std::string p = "layer" + std::to_string(index) + "/";
  GrafenneLayer l;
  l.W1 = glorot_parameter(p + "W1", {d, d}, s);
  l.W2 = glorot_parameter(p + "W2", {d, d}, s);
  l.w3 = glorot_parameter(p + "w3", {d}, s);
  l.w4 = glorot_parameter(p + "w4", {3 * d}, s);
  l.W5 = glorot_parameter(p + "W5", {d, d}, s);
  l.W6 = glorot_parameter(p + "W6", {d, d}, s);
  l.combine1 = make_mlp(p + "combine1", 2 * d, d, d, s);
  l.W7 = glorot_parameter(p + "W7", {d, d}, s);
  l.W8 = glorot_parameter(p + "W8", {d, d}, s);
  l.w9 = glorot_parameter(p + "w9", {d}, s);
  l.w10 = glorot_parameter(p + "w10", {3 * d}, s);
  l.W11 = glorot_parameter(p + "W11", {d, d}, s);
  l.W12 = glorot_parameter(p + "W12", {d, d}, s);
  l.combine3 = make_mlp(p + "combine3", 2 * d, d, d, s);
  l.conv = GraphConv::create(p, config.phase2, d, d, s);
  return l;
}

std::vector<Parameter> GrafenneLayer::parameters() const {
  std::vector<Parameter> out;
  auto add = [&](const Parameter& p) {
    if (p.tensor().defined()) out.push_back(p);
  };
  auto add_mlp = [&](const std::vector<DenseLayer>& m) {
    for (const auto& l : m) {
      add(l.weight);
      add(l.bias);
    }
  };
  for (const auto* p : {&W1, &W2, &w3, &w4, &W5, &W6}) add(*p);
  add_mlp(combine1);
  for (const auto* p : {&W7, &W8, &w9, &w10, &W11, &W12}) add(*p);
  add_mlp(combine3);
  auto c = conv.parameters();
  out.insert(out.end(), c.begin(), c.end());
  return out;
}

GraphConv GraphConv::create(const std::string& prefix, Phase2Backend backend, std::size_t in, std::size_t out,
                            std::uint64_t seed) {
  GraphConv c;
  c.backend = backend;
  switch (backend) {
    case Phase2Backend::kSage:
      c.W13 = glorot_parameter(prefix + "W13", {2 * in, out}, seed);
      break;
    case Phase2Backend::kGat:
      c.W13 = glorot_parameter(prefix + "W13", {in, out}, seed);
      c.W14 = glorot_parameter(prefix + "W14", {in, out}, seed);
      c.w15 = glorot_parameter(prefix + "w15", {2 * out}, seed);
      c.W16 = glorot_parameter(prefix + "W16", {in, out}, seed);
      break;
    case Phase2Backend::kGin:
      c.gin_mlp = make_mlp(prefix + "gin", in, out, out, seed);
      break;
  }
  return c;
}

std::vector<Parameter> GraphConv::parameters() const {
  std::vector<Parameter> out;
  for (const auto* p : {&W13, &W14, &w15, &W16}) {
    if (p->tensor().defined()) out.push_back(*p);
  }
  for (const auto& l : gin_mlp) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

GraphConv GraphConv::deep_copy() const {
  GraphConv c = *this;
  for (auto* p : {&c.W13, &c.W14, &c.w15, &c.W16}) {
    if (p->tensor().defined()) *p = p->deep_copy();
  }
  for (auto& l : c.gin_mlp) {
    l.weight = l.weight.deep_copy();
    l.bias = l.bias.deep_copy();
  }
  return c;
}

// ---------------------------------------------------------------------------
// Message index and sampling

std::vector<std::size_t> sample_caps(const std::vector<std::size_t>& items, std::size_t cap, Rng& rng) {
  if (cap == 0 || cap >= items.size()) return items;
  auto pos = rng.sample_without_replacement(items.size(), cap);
  std::sort(pos.begin(), pos.end());
  std::vector<std::size_t> out;
  out.reserve(pos.size());
  for (auto p : pos) out.push_back(items[p]);
  return out;
}

namespace {

void push_feature_edge(MessageIndex::FeatureEdges& fe, const AllotropicGraph& alt, std::size_t k) {
  fe.graph_row.push_back(alt.fe_graph()[k]);
  fe.feature_row.push_back(alt.fe_feature()[k]);
  fe.weight.push_back(alt.fe_weight()[k]);
}

}  // namespace

MessageIndex MessageIndex::full(const AllotropicGraph& alt) {
  MessageIndex idx;
  idx.phase1.graph_row = alt.fe_graph();
  idx.phase1.feature_row = alt.fe_feature();
  idx.phase1.weight = alt.fe_weight();
  idx.phase3 = idx.phase1;
  idx.nbr_src = alt.ge_src();
  idx.nbr_dst = alt.ge_dst();
  return idx;
}

MessageIndex MessageIndex::sampled(const AllotropicGraph& alt, const GrafenneConfig& config, Rng& rng) {
  if (config.cap_features == 0 && config.cap_nodes == 0 && config.cap_graph == 0) return full(alt);
  MessageIndex idx;
  for (std::size_t i = 0; i < alt.num_graph_nodes(); ++i) {
    for (auto k : sample_caps(alt.node_feature_edges(i), config.cap_features, rng)) push_feature_edge(idx.phase1, alt, k);
  }
  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < alt.num_feature_nodes(); ++j) {
    auto s = sample_caps(alt.feature_node_edges(j), config.cap_nodes, rng);
    kept.insert(kept.end(), s.begin(), s.end());
  }
  std::sort(kept.begin(), kept.end());
  for (auto k : kept) push_feature_edge(idx.phase3, alt, k);
  for (std::size_t i = 0; i < alt.num_graph_nodes(); ++i) {
    for (auto s : sample_caps(alt.node_neighbors(i), config.cap_graph, rng)) {
      idx.nbr_src.push_back(s);
      idx.nbr_dst.push_back(i);
    }
  }
  return idx;
}

// ---------------------------------------------------------------------------
// Phases

LayerState init_states(const AllotropicGraph& alt, const FeatureEmbeddingTable& table) {
  const std::size_t d = table.dim();
  LayerState s;
  s.graph = Tensor::zeros({alt.num_graph_nodes(), d});
  if (alt.num_feature_nodes() == 0) {
    s.feature = Tensor::zeros({0, d});
    return s;
  }
  std::vector<Tensor> rows;
  rows.reserve(alt.num_feature_nodes());
  for (FeatureId f : alt.feature_nodes()) rows.push_back(ops::reshape(table.at(f).tensor(), {1, d}));
  s.feature = ops::concat(rows, 0);
  return s;
}

namespace {

std::vector<std::size_t> iota(std::size_t from, std::size_t to) {
  std::vector<std::size_t> v;
  for (std::size_t i = from; i < to; ++i) v.push_back(i);
  return v;
}

// Per-row projection LReLU(X) . w for X [n x d] and w [d].
Tensor row_score(const Tensor& x, const Tensor& w, double slope) {
  const std::size_t d = w.numel();
  return ops::reshape(ops::matmul(ops::leaky_relu(x, slope), ops::reshape(w, {d, 1})), {x.rows()});
}

// Scores w^T LReLU(T[target] || S[source] || w_e * e) for every edge. The
// LeakyReLU acts per coordinate, so the score splits into a target term, a
// source term and an edge term; by positive homogeneity the edge term is
// e+ * w_c^T LReLU(w_e) + e- * w_c^T LReLU(-w_e).
Tensor edge_scores(const Tensor& target_proj, std::span<const std::size_t> target_rows, const Tensor& source_proj,
                   std::span<const std::size_t> source_rows, std::span<const double> weights, const Tensor& w_e,
                   const Tensor& w_att, double slope) {
  const std::size_t d = target_proj.cols();
  const auto part_a = iota(0, d), part_b = iota(d, 2 * d);
  Tensor s = ops::add(ops::gather_rows(row_score(target_proj, ops::gather_rows(w_att, part_a), slope), target_rows),
                      ops::gather_rows(row_score(source_proj, ops::gather_rows(w_att, part_b), slope), source_rows));
  if (w_e.defined()) {
    const auto part_c = iota(2 * d, 3 * d);
    const Tensor w_c = ops::gather_rows(w_att, part_c);
    const Tensor c_pos = ops::dot(w_c, ops::leaky_relu(w_e, slope));
    const Tensor c_neg = ops::dot(w_c, ops::leaky_relu(ops::scale(w_e, -1.0), slope));
    std::vector<double> e_pos(weights.size()), e_neg(weights.size());
    for (std::size_t k = 0; k < weights.size(); ++k) {
      e_pos[k] = std::max(weights[k], 0.0);
      e_neg[k] = std::max(-weights[k], 0.0);
    }
    s = ops::add(s, ops::add(ops::scale_by(Tensor::vector(std::move(e_pos)), c_pos),
                             ops::scale_by(Tensor::vector(std::move(e_neg)), c_neg)));
  }
  return s;
}

Tensor phase1_alpha(const LayerState& state, const GrafenneLayer& layer, const GrafenneConfig& config,
                    const MessageIndex::FeatureEdges& e) {
  const Tensor s = edge_scores(ops::matmul(state.graph, layer.W1.tensor()), e.graph_row,
                               ops::matmul(state.feature, layer.W2.tensor()), e.feature_row, e.weight,
                               layer.w3.tensor(), layer.w4.tensor(), config.leaky_slope);
  return ops::segment_softmax(s, Segments(e.graph_row, state.graph.rows()));
}

Tensor phase3_alpha(const LayerState& state, const Tensor& graph_h, const GrafenneLayer& layer,
                    const GrafenneConfig& config, const MessageIndex::FeatureEdges& e) {
  const Tensor s = edge_scores(ops::matmul(state.feature, layer.W7.tensor()), e.feature_row,
                               ops::matmul(graph_h, layer.W8.tensor()), e.graph_row, e.weight, layer.w9.tensor(),
                               layer.w10.tensor(), config.leaky_slope);
  return ops::segment_softmax(s, Segments(e.feature_row, state.feature.rows()));
}

}  // namespace

Tensor phase1_attention(const LayerState& state, const GrafenneLayer& layer, const GrafenneConfig& config,
                        const MessageIndex& index) {
  return phase1_alpha(state, layer, config, index.phase1);
}

Tensor phase3_attention(const LayerState& state, const Tensor& graph_h, const GrafenneLayer& layer,
                        const GrafenneConfig& config, const MessageIndex& index) {
  return phase3_alpha(state, graph_h, layer, config, index.phase3);
}

Tensor phase1(const LayerState& state, const GrafenneLayer& layer, const GrafenneConfig& config,
              const MessageIndex& index) {
  const auto& e = index.phase1;
  const std::size_t n = state.graph.rows();
  const std::size_t d = config.dim;
  Tensor agg;
  if (e.graph_row.empty()) {
    agg = Tensor::zeros({n, d});
  } else {
    const Tensor alpha = phase1_alpha(state, layer, config, e);
    agg = ops::edge_aggregate(ops::matmul(state.feature, layer.W6.tensor()), alpha, e.feature_row, e.graph_row, n);
  }
  std::vector<Tensor> parts{ops::matmul(state.graph, layer.W5.tensor()), agg};
  return mlp(ops::concat(parts, 1), layer.combine1, Activation::kLeakyRelu, config.leaky_slope);
}

Tensor graph_conv(const Tensor& h, const GraphConv& conv, double slope, double gin_epsilon,
                  std::span<const std::size_t> src, std::span<const std::size_t> dst) {
  const std::size_t n = h.rows();
  switch (conv.backend) {
    case Phase2Backend::kSage: {
      std::vector<double> degree(n, 0.0);
      for (auto i : dst) degree[i] += 1.0;
      std::vector<double> w(dst.size());
      for (std::size_t k = 0; k < dst.size(); ++k) w[k] = 1.0 / degree[dst[k]];
      const Tensor mean = dst.empty() ? Tensor::zeros({n, h.cols()})
                                      : ops::edge_aggregate(h, Tensor::vector(std::move(w)), src, dst, n);
      std::vector<Tensor> parts{h, mean};
      return ops::relu(ops::matmul(ops::concat(parts, 1), conv.W13.tensor()));
    }
    case Phase2Backend::kGat: {
      // Neighbors plus the node itself, ascending per target.
      std::vector<std::size_t> s, t;
      std::size_t k = 0;
      for (std::size_t i = 0; i < n; ++i) {
        bool self_done = false;
        for (; k < dst.size() && dst[k] == i; ++k) {
          if (!self_done && src[k] > i) {
            s.push_back(i);
            t.push_back(i);
            self_done = true;
          }
          s.push_back(src[k]);
          t.push_back(i);
        }
        if (!self_done) {
          s.push_back(i);
          t.push_back(i);
        }
      }
      const std::size_t d = conv.w15.numel() / 2;
      const Tensor& att = conv.w15.tensor();
      const Tensor score =
          ops::add(ops::gather_rows(row_score(ops::matmul(h, conv.W13.tensor()), ops::gather_rows(att, iota(0, d)),
                                              slope),
                                    t),
                   ops::gather_rows(row_score(ops::matmul(h, conv.W14.tensor()),
                                              ops::gather_rows(att, iota(d, 2 * d)), slope),
                                    s));
      const Tensor alpha = ops::segment_softmax(score, Segments(t, n));
      return ops::edge_aggregate(ops::matmul(h, conv.W16.tensor()), alpha, s, t, n);
    }
    case Phase2Backend::kGin: {
      Tensor total = ops::scale(h, 1.0 + gin_epsilon);
      if (!dst.empty()) total = ops::add(total, ops::edge_aggregate(h, Tensor(), src, dst, n));
      return mlp(total, conv.gin_mlp, Activation::kRelu);
    }
  }
  throw ConfigError("unknown phase-2 backend");
}

Tensor phase2(const Tensor& h, const GrafenneLayer& layer, const GrafenneConfig& config, const MessageIndex& index) {
  return graph_conv(h, layer.conv, config.leaky_slope, config.gin_epsilon, index.nbr_src, index.nbr_dst);
}

Tensor phase3(const LayerState& state, const Tensor& graph_h, const GrafenneLayer& layer,
              const GrafenneConfig& config, const MessageIndex& index) {
  const std::size_t f = state.feature.rows();
  if (f == 0) return state.feature;
  const auto& e = index.phase3;
  Tensor agg;
  if (e.feature_row.empty()) {
    agg = Tensor::zeros({f, config.dim});
  } else {
    const Tensor alpha = phase3_alpha(state, graph_h, layer, config, e);
    agg = ops::edge_aggregate(ops::matmul(graph_h, layer.W12.tensor()), alpha, e.graph_row, e.feature_row, f);
  }
  std::vector<Tensor> parts{ops::matmul(state.feature, layer.W11.tensor()), agg};
  return mlp(ops::concat(parts, 1), layer.combine3, Activation::kLeakyRelu, config.leaky_slope);
}

// ---------------------------------------------------------------------------
// Model

GrafenneModel::GrafenneModel(GrafenneConfig config)
    : config_(config), table_(config.dim, derive_seed(config.seed, "embeddings")) {
  config_.validate();
  for (int l = 0; l < config_.layers; ++l) layers_.push_back(GrafenneLayer::create(config_, l));
}

std::vector<Parameter> GrafenneModel::layer_parameters() const {
  std::vector<Parameter> out;
  for (const auto& l : layers_) {
    auto p = l.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<Parameter> GrafenneModel::parameters() const {
  auto out = layer_parameters();
  auto rows = table_.parameters();
  out.insert(out.end(), rows.begin(), rows.end());
  return out;
}

std::size_t GrafenneModel::parameter_count(bool include_embeddings) const {
  std::size_t n = 0;
  for (const auto& p : include_embeddings ? parameters() : layer_parameters()) n += p.numel();
  return n;
}

LayerState GrafenneModel::forward(const AllotropicGraph& alt, const MessageIndex& index) const {
  LayerState state = init_states(alt, table_);
  for (const auto& layer : layers_) {
    Tensor h = phase1(state, layer, config_, index);
    h = phase2(h, layer, config_, index);
    Tensor f = phase3(state, h, layer, config_, index);
    state = LayerState{h, f};
  }
  return state;
}

GrafenneModel GrafenneModel::deep_copy() const {
  GrafenneModel m;
  m.config_ = config_;
  m.table_ = table_.deep_copy();
  for (const auto& l : layers_) {
    GrafenneLayer c = l;
    auto copy = [](Parameter& p) {
      if (p.tensor().defined()) p = p.deep_copy();
    };
    auto copy_mlp = [&](std::vector<DenseLayer>& mm) {
      for (auto& dl : mm) {
        copy(dl.weight);
        copy(dl.bias);
      }
    };
    for (auto* p : {&c.W1, &c.W2, &c.w3, &c.w4, &c.W5, &c.W6, &c.W7, &c.W8, &c.w9, &c.w10, &c.W11, &c.W12}) copy(*p);
    copy_mlp(c.combine1);
    copy_mlp(c.combine3);
    c.conv = c.conv.deep_copy();
    m.layers_.push_back(std::move(c));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Vanilla SAGE over the allotropic graph

VanillaAltModel::VanillaAltModel(GrafenneConfig config)
    : config_(config), table_(config.dim, derive_seed(config.seed, "embeddings")) {
  config_.validate();
  for (int l = 0; l < config_.layers; ++l) {
    weights_.push_back(glorot_parameter("vanilla/layer" + std::to_string(l) + "/W", {2 * config_.dim, config_.dim},
                                        config_.seed));
  }
}

std::vector<Parameter> VanillaAltModel::parameters() const {
  auto out = weights_;
  auto rows = table_.parameters();
  out.insert(out.end(), rows.begin(), rows.end());
  return out;
}

Tensor VanillaAltModel::forward(const AllotropicGraph& alt) const {
  const std::size_t n = alt.num_graph_nodes();
  const std::size_t total = alt.num_nodes();
  const LayerState init = init_states(alt, table_);
  std::vector<Tensor> parts{init.graph, init.feature};
  Tensor h = ops::concat(parts, 0);

  // Every node's neighbors in ascending row order; feature rows follow the
  // graph rows.
  std::vector<std::vector<std::size_t>> nbrs(total);
  for (std::size_t i = 0; i < n; ++i) {
    nbrs[i] = alt.node_neighbors(i);
    for (auto k : alt.node_feature_edges(i)) nbrs[i].push_back(n + alt.fe_feature()[k]);
  }
  for (std::size_t j = 0; j < alt.num_feature_nodes(); ++j) {
    for (auto k : alt.feature_node_edges(j)) nbrs[n + j].push_back(alt.fe_graph()[k]);
  }
  std::vector<std::size_t> src, dst;
  std::vector<double> w;
  for (std::size_t i = 0; i < total; ++i) {
    for (auto s : nbrs[i]) {
      src.push_back(s);
      dst.push_back(i);
      w.push_back(1.0 / static_cast<double>(nbrs[i].size()));
    }
  }
  const Tensor weights = Tensor::vector(std::move(w));
  for (const auto& W : weights_) {
    const Tensor mean = src.empty() ? Tensor::zeros({total, config_.dim})
                                    : ops::edge_aggregate(h, weights, src, dst, total);
    std::vector<Tensor> cat{h, mean};
    h = ops::relu(ops::matmul(ops::concat(cat, 1), W.tensor()));
  }
  std::vector<std::size_t> graph_rows = iota(0, n);
  return ops::gather_rows(h, graph_rows);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kCheckpointMagic = "grafenne-checkpoint";
constexpr int kCheckpointVersion = 1;

std::string hex(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::hex);
  return std::string(buf, ptr);
}

double parse_hex(const std::string& s) {
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x, std::chars_format::hex);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError("checkpoint: bad value '" + s + "'");
  return x;
}

void write_param(std::ostream& out, const Parameter& p) {
  const auto& shape = p.tensor().shape();
  out << "param " << p.name() << ' ' << shape.size();
  for (auto d : shape) out << ' ' << d;
  for (double v : p.tensor().values()) out << ' ' << hex(v);
  out << '\n';
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const GrafenneModel& model,
                     const std::vector<Parameter>& extra) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  const auto& c = model.config();
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "config layers " << c.layers << '\n';
  out << "config dim " << c.dim << '\n';
  out << "config phase2 " << backend_name(c.phase2) << '\n';
  out << "config leaky_slope " << hex(c.leaky_slope) << '\n';
  out << "config gin_epsilon " << hex(c.gin_epsilon) << '\n';
  out << "config cap_graph " << c.cap_graph << '\n';
  out << "config cap_nodes " << c.cap_nodes << '\n';
  out << "config cap_features " << c.cap_features << '\n';
  out << "config seed " << c.seed << '\n';
  for (const auto& p : model.parameters()) write_param(out, p);
  for (const auto& p : extra) write_param(out, p);
}

GrafenneModel load_checkpoint(const std::filesystem::path& path, std::vector<Parameter>* extra) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kCheckpointMagic) throw DataError(path.string() + ": not a checkpoint");
  if (version != kCheckpointVersion) throw DataError(path.string() + ": unsupported checkpoint version");

  GrafenneConfig c;
  struct Record {
    std::string name;
    Shape shape;
    std::vector<double> values;
  };
  std::vector<Record> records;
  std::string kind;
  while (in >> kind) {
    if (kind == "config") {
      std::string key, value;
      in >> key >> value;
      if (key == "layers") c.layers = std::stoi(value);
      else if (key == "dim") c.dim = std::stoul(value);
      else if (key == "phase2") c.phase2 = parse_backend(value);
      else if (key == "leaky_slope") c.leaky_slope = parse_hex(value);
      else if (key == "gin_epsilon") c.gin_epsilon = parse_hex(value);
      else if (key == "cap_graph") c.cap_graph = std::stoul(value);
      else if (key == "cap_nodes") c.cap_nodes = std::stoul(value);
      else if (key == "cap_features") c.cap_features = std::stoul(value);
      else if (key == "seed") c.seed = std::stoull(value);
      else throw DataError(path.string() + ": unknown config key " + key);
    } else if (kind == "param") {
      Record r;
      std::size_t rank = 0;
      in >> r.name >> rank;
      r.shape.resize(rank);
      for (auto& d : r.shape) in >> d;
      r.values.resize(shape_numel(r.shape));
      std::string tok;
      for (auto& v : r.values) {
        in >> tok;
        v = parse_hex(tok);
      }
      if (!in) throw DataError(path.string() + ": truncated parameter " + r.name);
      records.push_back(std::move(r));
    } else {
      throw DataError(path.string() + ": unexpected token " + kind);
    }
  }

  GrafenneModel model(c);
  std::map<std::string, Parameter> by_name;
  for (const auto& p : model.layer_parameters()) by_name.emplace(p.name(), p);
  if (extra) {
    for (const auto& p : *extra) by_name.emplace(p.name(), p);
  }
  const std::string row_prefix = "feat_emb/";
  for (auto& r : records) {
    if (r.name.rfind(row_prefix, 0) == 0) {
      model.table().set(static_cast<FeatureId>(std::stoul(r.name.substr(row_prefix.size()))), std::move(r.values));
      continue;
    }
    auto it = by_name.find(r.name);
    if (it == by_name.end()) throw DataError(path.string() + ": unknown parameter " + r.name);
    Tensor& t = it->second.tensor();
    if (t.shape() != r.shape) throw DataError(path.string() + ": shape mismatch for " + r.name);
    std::copy(r.values.begin(), r.values.end(), t.mutable_values().begin());
  }
  return model;
}

// ---------------------------------------------------------------------------
// Recovery probe

RecoveryResult recovery_probe(const RecoveryConfig& rc) {
  if (rc.features == 0 || rc.dim < rc.features) throw ConfigError("recovery probe needs 1 <= features <= dim");
  Rng rng(derive_seed(rc.seed, "recovery"));
  std::vector<FeatureEdge> fes;
  std::vector<NodeId> nodes;
  std::vector<double> target;
  for (NodeId v = 0; v < rc.nodes; ++v) {
    nodes.push_back(v);
    for (FeatureId f = 0; f < rc.features; ++f) {
      const double x = rng.uniform(0.1, 1.0);
      fes.push_back({v, f, x});
      target.push_back(x);
    }
  }
  const auto alt = AllotropicGraph::build(nodes, {}, fes);
  const auto index = MessageIndex::full(alt);

  GrafenneConfig config;
  config.layers = rc.layers;
  config.dim = rc.dim;
  config.seed = rc.seed;
  std::vector<GrafenneLayer> layers;
  for (int l = 0; l < rc.layers; ++l) layers.push_back(GrafenneLayer::create(config, l));
  std::vector<double> onehot(rc.features * rc.dim, 0.0);
  for (std::size_t f = 0; f < rc.features; ++f) onehot[f * rc.dim + f] = 1.0;
  const Tensor feature_h = Tensor::from({rc.features, rc.dim}, onehot);
  DenseLayer head{glorot_parameter("probe/head", {rc.dim, rc.features}, rc.seed),
                  zero_parameter("probe/bias", {rc.features})};

  std::vector<Parameter> params;
  for (const auto& l : layers) {
    for (const auto& p : {l.W1, l.W2, l.w3, l.w4, l.W5, l.W6}) params.push_back(p);
    for (const auto& dl : l.combine1) {
      params.push_back(dl.weight);
      params.push_back(dl.bias);
    }
  }
  params.push_back(head.weight);
  params.push_back(head.bias);

  const Tensor y = Tensor::from({rc.nodes, rc.features}, target);
  auto loss_fn = [&] {
    LayerState state{Tensor::zeros({rc.nodes, rc.dim}), feature_h};
    for (const auto& l : layers) state.graph = phase1(state, l, config, index);
    std::vector<DenseLayer> head_layers{head};
    const Tensor diff = ops::sub(mlp(state.graph, head_layers, Activation::kIdentity), y);
    return ops::mean(ops::mul(diff, diff));
  };

  RecoveryResult result;
  double mean = 0.0;
  for (double t : target) mean += t;
  mean /= static_cast<double>(target.size());
  for (double t : target) result.target_variance += (t - mean) * (t - mean);
  result.target_variance /= static_cast<double>(target.size());
  {
    NoGradGuard guard;
    result.untrained_mse = loss_fn().item();
  }
  AdamState adam;
  AdamOptions opts;
  opts.lr = rc.lr;
  for (int epoch = 0; epoch < rc.epochs; ++epoch) {
    zero_grads(params);
    backward(loss_fn());
    adam_step(params, opts, adam);
  }
  NoGradGuard guard;
  result.trained_mse = loss_fn().item();
  return result;
}

}  // namespace grafenne
