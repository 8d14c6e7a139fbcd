#pragma once

// Direct evaluation of one layer's phases with plain loops, shared by the
// unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "grafenne/model.hpp"
#include "support/graphs.hpp"

namespace grafenne::testing {

// Plain loops over doubles, written from the layer formulas with the full
// concatenation (no score decomposition).
using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), Vec(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  }
  return m;
}

inline Vec to_vec(const Tensor& t) { return Vec(t.values().begin(), t.values().end()); }

inline Vec times(const Vec& x, const Tensor& w) {
  Vec out(w.cols(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) out[j] += x[i] * w.at(i, j);
  }
  return out;
}

inline Vec cat(Vec a, const Vec& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

inline double lrelu(double x, double s) { return x > 0 ? x : s * x; }

inline double att(const Vec& w, const Vec& z, double s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) acc += w[i] * lrelu(z[i], s);
  return acc;
}

inline Vec softmax(const Vec& s) {
  double m = -1e300;
  for (double x : s) m = std::max(m, x);
  Vec out(s.size());
  double z = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) z += out[i] = std::exp(s[i] - m);
  for (auto& x : out) x /= z;
  return out;
}

inline Vec mlp_row(Vec x, const std::vector<DenseLayer>& layers, Activation act, double slope) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    x = times(x, layers[l].weight.tensor());
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += layers[l].bias.tensor().at(j);
    if (l + 1 < layers.size()) {
      for (auto& v : x) v = act == Activation::kRelu ? std::max(v, 0.0) : lrelu(v, slope);
    }
  }
  return x;
}

inline void axpy(Vec& acc, double a, const Vec& x) {
  for (std::size_t i = 0; i < x.size(); ++i) acc[i] += a * x[i];
}

inline Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Vec v(rows * cols);
  for (auto& x : v) x = rng.normal();
  return Tensor::from({rows, cols}, std::move(v));
}

// Random graph plus an isolated featureless node and an orphan feature node.
inline AllotropicGraph fixture(std::uint64_t seed) {
  auto g = random_graph(seed, 9, 5, 0.3, 0.4);
  std::vector<NodeId> nodes = g.node_ids();
  const NodeId lonely = static_cast<NodeId>(nodes.size());
  nodes.push_back(lonely);
  std::vector<FeatureEdge> fe;
  for (NodeId v : g.node_ids()) {
    for (auto [f, x] : g.features(v)) fe.push_back({v, f, x});
  }
  return AllotropicGraph::build(nodes, {g.edges().begin(), g.edges().end()}, fe, {99});
}

struct Fixture {
  AllotropicGraph alt;
  MessageIndex index;
  LayerState state;
  GrafenneConfig config;
  GrafenneLayer layer;

  Fixture(std::uint64_t seed, Phase2Backend backend) : alt(fixture(seed)), index(MessageIndex::full(alt)) {
    config.dim = 4;
    config.phase2 = backend;
    config.gin_epsilon = 0.3;
    config.seed = seed;
    layer = GrafenneLayer::create(config, 0);
    Rng rng(seed + 17);
    state.graph = random_matrix(rng, alt.num_graph_nodes(), config.dim);
    state.feature = random_matrix(rng, alt.num_feature_nodes(), config.dim);
  }
};

inline Mat phase1_oracle(const Fixture& fx) {
  const auto& alt = fx.alt;
  const auto& l = fx.layer;
  const double s = fx.config.leaky_slope;
  const Mat hg = to_mat(fx.state.graph), hf = to_mat(fx.state.feature);
  const Vec w3 = to_vec(l.w3.tensor()), w4 = to_vec(l.w4.tensor());
  Mat out;
  for (std::size_t v = 0; v < alt.num_graph_nodes(); ++v) {
    Vec scores;
    std::vector<std::size_t> us;
    for (std::size_t k = 0; k < alt.fe_graph().size(); ++k) {
      if (alt.fe_graph()[k] != v) continue;
      const std::size_t u = alt.fe_feature()[k];
      Vec we(w3);
      for (auto& x : we) x *= alt.fe_weight()[k];
      scores.push_back(att(w4, cat(cat(times(hg[v], l.W1.tensor()), times(hf[u], l.W2.tensor())), we), s));
      us.push_back(u);
    }
    Vec agg(fx.config.dim, 0.0);
    if (!scores.empty()) {
      const Vec a = softmax(scores);
      for (std::size_t i = 0; i < us.size(); ++i) axpy(agg, a[i], times(hf[us[i]], l.W6.tensor()));
    }
    out.push_back(mlp_row(cat(times(hg[v], l.W5.tensor()), agg), l.combine1, Activation::kLeakyRelu, s));
  }
  return out;
}

inline std::vector<std::set<std::size_t>> graph_neighbors(const AllotropicGraph& alt) {
  std::vector<std::set<std::size_t>> nbrs(alt.num_graph_nodes());
  for (const auto& e : alt.graph_edges()) {
    const auto a = alt.graph_index(e.u), b = alt.graph_index(e.v);
    nbrs[a].insert(b);
    nbrs[b].insert(a);
  }
  return nbrs;
}

inline Mat phase2_oracle(const Fixture& fx, const Mat& h) {
  const auto& l = fx.layer;
  const double s = fx.config.leaky_slope;
  const auto nbrs = graph_neighbors(fx.alt);
  const std::size_t d = fx.config.dim;
  Mat out;
  for (std::size_t v = 0; v < h.size(); ++v) {
    switch (fx.config.phase2) {
      case Phase2Backend::kSage: {
        Vec mean(d, 0.0);
        for (auto u : nbrs[v]) axpy(mean, 1.0 / static_cast<double>(nbrs[v].size()), h[u]);
        Vec r = times(cat(h[v], mean), l.conv.W13.tensor());
        for (auto& x : r) x = std::max(x, 0.0);
        out.push_back(r);
        break;
      }
      case Phase2Backend::kGat: {
        auto with_self = nbrs[v];
        with_self.insert(v);
        Vec scores;
        for (auto u : with_self) {
          scores.push_back(
              att(to_vec(l.conv.w15.tensor()), cat(times(h[v], l.conv.W13.tensor()), times(h[u], l.conv.W14.tensor())), s));
        }
        const Vec a = softmax(scores);
        Vec r(d, 0.0);
        std::size_t i = 0;
        for (auto u : with_self) axpy(r, a[i++], times(h[u], l.conv.W16.tensor()));
        out.push_back(r);
        break;
      }
      case Phase2Backend::kGin: {
        Vec sum(d, 0.0);
        axpy(sum, 1.0 + fx.config.gin_epsilon, h[v]);
        for (auto u : nbrs[v]) axpy(sum, 1.0, h[u]);
        out.push_back(mlp_row(sum, l.conv.gin_mlp, Activation::kRelu, s));
        break;
      }
    }
  }
  return out;
}

inline Mat phase3_oracle(const Fixture& fx, const Mat& hg_new) {
  const auto& alt = fx.alt;
  const auto& l = fx.layer;
  const double s = fx.config.leaky_slope;
  const Mat hf = to_mat(fx.state.feature);
  const Vec w9 = to_vec(l.w9.tensor()), w10 = to_vec(l.w10.tensor());
  Mat out;
  for (std::size_t u = 0; u < alt.num_feature_nodes(); ++u) {
    Vec scores;
    std::vector<std::size_t> vs;
    for (const auto& e : alt.feature_edges()) {
      if (alt.feature_index(e.feature) != u) continue;
      const std::size_t v = alt.graph_index(e.node);
      Vec we(w9);
      for (auto& x : we) x *= e.weight;
      scores.push_back(att(w10, cat(cat(times(hf[u], l.W7.tensor()), times(hg_new[v], l.W8.tensor())), we), s));
      vs.push_back(v);
    }
    Vec agg(fx.config.dim, 0.0);
    if (!scores.empty()) {
      const Vec a = softmax(scores);
      for (std::size_t i = 0; i < vs.size(); ++i) axpy(agg, a[i], times(hg_new[vs[i]], l.W12.tensor()));
    }
    out.push_back(mlp_row(cat(times(hf[u], l.W11.tensor()), agg), l.combine3, Activation::kLeakyRelu, s));
  }
  return out;
}

inline Tensor matrix(const Mat& m) {
  Vec v;
  for (const auto& r : m) v.insert(v.end(), r.begin(), r.end());
  return Tensor::from({m.size(), m.empty() ? 0 : m[0].size()}, v);
}

// Largest |got - want| over all entries; infinity on a shape mismatch.
inline double max_abs_diff(const Tensor& got, const Mat& want) {
  if (got.rows() != want.size()) return INFINITY;
  double worst = 0.0;
  for (std::size_t r = 0; r < want.size(); ++r) {
    if (got.cols() != want[r].size()) return INFINITY;
    for (std::size_t c = 0; c < want[r].size(); ++c) worst = std::max(worst, std::abs(got.at(r, c) - want[r][c]));
  }
  return worst;
}

}  // namespace grafenne::testing
