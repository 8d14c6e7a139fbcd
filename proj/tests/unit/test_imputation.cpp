#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "grafenne/allotropic.hpp"
#include "grafenne/imputation.hpp"
#include "support/graphs.hpp"

using namespace grafenne;

namespace {

// Path 0 - 1 - 2 plus isolated node 3, two feature columns.
HeteroGraph small_graph() {
  HeteroGraph g;
  for (NodeId v = 0; v < 4; ++v) g.add_node(v);
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.set_feature(0, 0, 2.0);
  g.set_feature(2, 0, 4.0);
  g.set_feature(1, 1, -1.0);
  g.set_feature(3, 1, 5.0);
  return g;
}

// 10 nodes, edge probability 0.5, 3 columns each observed with probability
// 0.7.
HeteroGraph ten_nodes(std::uint64_t seed) {
  Rng rng(seed);
  HeteroGraph g;
  for (NodeId v = 0; v < 10; ++v) {
    g.add_node(v);
    for (FeatureId f = 0; f < 3; ++f) {
      if (rng.bernoulli(0.7)) g.set_feature(v, f, rng.uniform(-1.0, 1.0));
    }
  }
  for (NodeId a = 0; a < 10; ++a) {
    for (NodeId b = a + 1; b < 10; ++b) {
      if (rng.bernoulli(0.5)) g.add_edge(a, b);
    }
  }
  return g;
}

std::map<NodeId, std::size_t> rows_of(const ObservedMask& m) {
  std::map<NodeId, std::size_t> r;
  for (std::size_t i = 0; i < m.rows(); ++i) r[m.nodes()[i]] = i;
  return r;
}

}  // namespace

TEST_CASE("special label fills exactly the missing entries") {
  const auto g = small_graph();
  const auto stored = ObservedMask::stored(g, 2);
  const auto d = impute_special_label(g, stored, -7.0);
  // Brute-force expansion of the sparse maps.
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 2; ++c) {
      const auto& fm = g.features(static_cast<NodeId>(r));
      auto it = fm.find(static_cast<FeatureId>(c));
      CHECK(d.at(r, c) == (it == fm.end() ? -7.0 : it->second));
    }
  }
  auto none = stored;
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 2; ++c) none.set(r, c, false);
  }
  for (double x : impute_special_label(g, none, 3.5).values) CHECK(x == 3.5);

  // Complete knowledge: unstored entries are zeros, not sentinels.
  const auto full = impute_special_label(g, ObservedMask::complete(g, 2), 9.0);
  CHECK(full.at(0, 1) == 0.0);
  CHECK(full.at(0, 0) == 2.0);
}

TEST_CASE("neighborhood mean with its fallbacks") {
  auto g = small_graph();
  const auto stored = ObservedMask::stored(g, 2);
  const auto d = impute_neighborhood_mean(g, stored);
  CHECK(d.at(1, 0) == doctest::Approx(3.0));  // neighbors hold 2 and 4
  CHECK(d.at(0, 1) == -1.0);                   // single neighbor
  CHECK(d.at(3, 0) == doctest::Approx(3.0));  // isolated: column mean of {2, 4}
  CHECK(d.at(0, 0) == 2.0);

  HeteroGraph bare;
  bare.add_node(0);
  bare.add_node(1);
  bare.add_edge(0, 1);
  const auto z = impute_neighborhood_mean(bare, ObservedMask::stored(bare, 3));
  for (double x : z.values) CHECK(x == 0.0);
}

TEST_CASE("neighborhood mean matches a brute-force recomputation") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto g = apply_missing_mask(testing::random_graph(seed, 20, 6, 0.2, 0.6), 0.5, seed);
    const auto mask = ObservedMask::stored(g, 6);
    const auto row = rows_of(mask);
    const auto d = impute_neighborhood_mean(g, mask);
    for (NodeId v : g.node_ids()) {
      for (FeatureId f = 0; f < 6; ++f) {
        double want;
        if (g.features(v).count(f)) {
          want = g.features(v).at(f);
        } else {
          double s = 0, n = 0;
          for (NodeId u : g.neighbors(v)) {
            if (g.features(u).count(f)) {
              s += g.features(u).at(f);
              ++n;
            }
          }
          if (n == 0) {
            for (NodeId u : g.node_ids()) {
              if (g.features(u).count(f)) {
                s += g.features(u).at(f);
                ++n;
              }
            }
          }
          want = n == 0 ? 0.0 : s / n;
        }
        CHECK(d.at(row.at(v), f) == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("feature propagation keeps observed entries and converges") {
  SUBCASE("fully observed input is returned unchanged") {
    const auto g = testing::random_graph(3, 15, 4, 0.3, 0.5);
    const auto mask = ObservedMask::complete(g, 4);
    const auto base = expand(g, mask);
    for (auto norm : {PropagationNorm::kSymmetric, PropagationNorm::kRandomWalk}) {
      CHECK(feature_propagation(g, mask, {40, norm}).values == base.values);
    }
  }
  SUBCASE("two-node path copies the observed value") {
    HeteroGraph g;
    g.add_node(0);
    g.add_node(1);
    g.add_edge(0, 1);
    g.set_feature(0, 0, 0.75);
    const auto d = feature_propagation(g, ObservedMask::stored(g, 1));
    CHECK(d.at(1, 0) == doctest::Approx(0.75).epsilon(1e-12));
  }
  SUBCASE("40 and 400 iterations agree on 10-node graphs") {
    // Convergence speed is set by the spectral radius of the missing block,
    // so sparse or poorly observed graphs can need more than 40 steps. On
    // this family nearly every draw settles below 1e-6.
    int settled = 0;
    double worst = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
      const auto g = ten_nodes(seed);
      const auto mask = ObservedMask::stored(g, 3);
      const auto a = feature_propagation(g, mask, {40});
      const auto b = feature_propagation(g, mask, {400});
      double delta = 0;
      for (std::size_t k = 0; k < a.values.size(); ++k) delta = std::max(delta, std::abs(a.values[k] - b.values[k]));
      if (seed == 1) CHECK(delta < 1e-6);
      settled += delta < 1e-6;
      worst = std::max(worst, delta);
    }
    CHECK(settled >= 190);
    CHECK(worst < 1e-4);
  }
  SUBCASE("observed entries are preserved exactly under both normalizations") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      auto g = apply_missing_mask(testing::random_graph(seed, 25, 5, 0.2, 0.7), 0.4, seed);
      const auto mask = ObservedMask::stored(g, 5);
      const auto base = expand(g, mask);
      for (auto norm : {PropagationNorm::kSymmetric, PropagationNorm::kRandomWalk}) {
        const auto d = feature_propagation(g, mask, {40, norm});
        for (std::size_t k = 0; k < d.values.size(); ++k) {
          if (d.observed[k]) CHECK(d.values[k] == base.values[k]);
        }
      }
    }
  }
  SUBCASE("random-walk diffusion stays inside the observed range of each column") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      auto g = apply_missing_mask(testing::random_graph(seed, 25, 5, 0.2, 0.7), 0.4, seed);
      const auto mask = ObservedMask::stored(g, 5);
      const auto d = feature_propagation(g, mask, {40, PropagationNorm::kRandomWalk});
      for (std::size_t c = 0; c < 5; ++c) {
        // Missing entries start at 0, so 0 belongs to the hull.
        double lo = 0.0, hi = 0.0;
        for (std::size_t r = 0; r < d.rows(); ++r) {
          if (d.known(r, c)) {
            lo = std::min(lo, d.at(r, c));
            hi = std::max(hi, d.at(r, c));
          }
        }
        for (std::size_t r = 0; r < d.rows(); ++r) {
          CHECK(d.at(r, c) >= lo - 1e-12);
          CHECK(d.at(r, c) <= hi + 1e-12);
        }
      }
    }
  }
  CHECK_THROWS_AS(feature_propagation(small_graph(), ObservedMask::stored(small_graph(), 2), {0}), ConfigError);
}

TEST_CASE("imputation followed by re-sparsification") {
  const auto g = testing::random_graph(5, 30, 6, 0.2, 0.5);
  const auto nm = impute_then_grafenne(g, ObservedMask::complete(g, 6), Imputer::kNeighborhoodMean);
  CHECK(nm.same_content(g));

  const auto masked = apply_missing_mask(g, 0.5, 2);
  const auto mask = ObservedMask::stored(masked, 6);
  const auto fp_dense = feature_propagation(masked, mask);
  const auto fp = impute_then_grafenne(masked, mask, Imputer::kFeaturePropagation);
  std::size_t nonzero = 0;
  for (double x : fp_dense.values) nonzero += std::abs(x) >= 1e-8;
  CHECK(to_allotropic(fp).num_edges() == fp.num_edges() + nonzero);
  CHECK(fp.num_edges() == g.num_edges());
}

TEST_CASE("mask_features agrees with apply_missing_mask and marks deleted zeros") {
  const auto g = testing::random_graph(9, 200, 20, 0.05, 0.3);
  for (double p : {0.0, 0.3, 1.0}) {
    const auto m = mask_features(g, p, 4, 20);
    CHECK(m.graph.same_content(apply_missing_mask(g, p, 4)));
    const double total = static_cast<double>(m.observed.rows() * 20);
    const double missing = total - static_cast<double>(m.observed.count());
    CHECK(std::abs(missing - p * total) <= 3.0 * std::sqrt(total * p * (1 - p)) + 1e-9);
    // Every surviving stored entry is observed.
    const auto row = rows_of(m.observed);
    for (NodeId v : m.graph.node_ids()) {
      for (auto [f, _] : m.graph.features(v)) CHECK(m.observed.observed(row.at(v), f));
    }
  }
  CHECK_THROWS_AS(ObservedMask::stored(g, 3), DimensionError);
}

TEST_CASE("dense GNN layers") {
  SUBCASE("one SAGE layer with stacked identity weights") {
    HeteroGraph g;
    g.add_node(0);
    g.add_node(1);
    g.add_edge(0, 1);
    g.set_feature(0, 0, 1.0);
    g.set_feature(0, 1, 2.0);
    g.set_feature(1, 0, 3.0);
    g.set_feature(1, 1, -5.0);
    DenseGnn model({Phase2Backend::kSage, 1, 2, 2});
    auto w13 = model.parameters()[0];
    auto w = w13.tensor().mutable_values();
    const double stacked[] = {1, 0, 0, 1, 1, 0, 0, 1};
    std::copy(std::begin(stacked), std::end(stacked), w.begin());
    const auto out = dense_gnn_forward(g, expand(g, ObservedMask::complete(g, 2)), model);
    // relu(x_v + x_u): both rows (4, -3) -> (4, 0).
    CHECK(out.at(0, 0) == 4.0);
    CHECK(out.at(0, 1) == 0.0);
    CHECK(out.at(1, 0) == 4.0);
    CHECK(out.at(1, 1) == 0.0);
  }
  SUBCASE("zero features and zero weights give zeros") {
    const auto g = testing::random_graph(2, 10, 4, 0.3, 0.0);
    for (auto backend : {Phase2Backend::kSage, Phase2Backend::kGat, Phase2Backend::kGin}) {
      DenseGnn model({backend, 2, 4, 6});
      for (auto& p : model.parameters()) {
        for (auto& x : p.tensor().mutable_values()) x = 0.0;
      }
      const Tensor out = dense_gnn_forward(g, expand(g, ObservedMask::complete(g, 4)), model);
      for (double x : out.values()) CHECK(x == 0.0);
    }
  }
  SUBCASE("twins with identical features and neighborhoods match") {
    HeteroGraph g;
    for (NodeId v = 0; v < 4; ++v) g.add_node(v);
    g.add_edge(0, 2);
    g.add_edge(1, 2);
    g.add_edge(2, 3);
    for (NodeId v : {0u, 1u}) g.set_feature(v, 0, 1.5);
    g.set_feature(2, 1, 1.0);
    for (auto backend : {Phase2Backend::kSage, Phase2Backend::kGat, Phase2Backend::kGin}) {
      DenseGnn model({backend, 2, 2, 5, 0.2, 0.0, 3});
      const auto out = dense_gnn_forward(g, expand(g, ObservedMask::complete(g, 2)), model);
      for (std::size_t c = 0; c < 5; ++c) CHECK(out.at(0, c) == out.at(1, c));
    }
  }
  SUBCASE("parameter count grows with the feature count") {
    for (auto backend : {Phase2Backend::kSage, Phase2Backend::kGat, Phase2Backend::kGin}) {
      DenseGnn narrow({backend, 2, 10, 8}), wide({backend, 2, 10000, 8});
      CHECK(wide.parameter_count() > narrow.parameter_count());
    }
    const auto g = testing::random_graph(2, 10, 4);
    DenseGnn model({Phase2Backend::kSage, 2, 5, 8});
    CHECK_THROWS_AS(dense_gnn_forward(g, expand(g, ObservedMask::complete(g, 4)), model), DimensionError);
  }
}
