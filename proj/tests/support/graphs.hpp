#pragma once

#include <cstdint>

#include "grafenne/graph.hpp"
#include "grafenne/random.hpp"

namespace grafenne::testing {

// Random graph with up to `max_nodes` nodes, `num_features` candidate
// features per node kept with probability `density`, and labels in [0, C).
inline HeteroGraph random_graph(std::uint64_t seed, std::size_t max_nodes, std::size_t num_features,
                                double edge_p = 0.1, double density = 0.3, int classes = 3) {
  Rng rng(seed);
  HeteroGraph g;
  const std::size_t n = 1 + rng.index(max_nodes);
  for (std::size_t f = 0; f < num_features; ++f) g.feature_names().intern("f" + std::to_string(f));
  for (int c = 0; c < classes; ++c) g.class_names().intern("c" + std::to_string(c));
  g.set_num_classes(classes);
  for (NodeId v = 0; v < n; ++v) {
    g.node_names().intern("n" + std::to_string(v));
    g.add_node(v, static_cast<int>(rng.index(static_cast<std::size_t>(classes))));
    for (FeatureId f = 0; f < num_features; ++f) {
      if (rng.bernoulli(density)) g.set_feature(v, f, rng.bernoulli(0.5) ? 1.0 : rng.uniform(-2.0, 2.0));
    }
  }
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = a + 1; b < n; ++b) {
      if (rng.bernoulli(edge_p)) g.add_edge(a, b);
    }
  }
  return g;
}

}  // namespace grafenne::testing
