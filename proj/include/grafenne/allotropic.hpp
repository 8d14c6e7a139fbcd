#pragma once

// Bipartite-augmented view of a HeteroGraph: one extra node per distinct
// feature, linked to every graph node carrying it with the feature value as
// edge weight.

#include <cstddef>
#include <map>
#include <vector>

#include "grafenne/graph.hpp"

namespace grafenne {

struct FeatureEdge {
  NodeId node = 0;
  FeatureId feature = 0;
  double weight = 0.0;

  bool operator==(const FeatureEdge&) const = default;
};

class AllotropicGraph {
 public:
  AllotropicGraph() = default;

  // Feature nodes are the union of `extra_features` and the features named
  // by feature edges; passing extras allows orphaned feature nodes. Zero
  // weights are dropped.
  static AllotropicGraph build(std::vector<NodeId> graph_nodes, std::vector<Edge> graph_edges,
                               std::vector<FeatureEdge> feature_edges,
                               std::vector<FeatureId> extra_features = {});

  std::size_t num_graph_nodes() const { return graph_nodes_.size(); }
  std::size_t num_feature_nodes() const { return feature_nodes_.size(); }
  std::size_t num_nodes() const { return num_graph_nodes() + num_feature_nodes(); }
  std::size_t num_edges() const { return graph_edges_.size() + feature_edges_.size(); }

  // Sorted ids; position in these vectors is the dense row index used by
  // the model.
  const std::vector<NodeId>& graph_nodes() const { return graph_nodes_; }
  const std::vector<FeatureId>& feature_nodes() const { return feature_nodes_; }
  const std::vector<Edge>& graph_edges() const { return graph_edges_; }
  // Sorted by (node, feature).
  const std::vector<FeatureEdge>& feature_edges() const { return feature_edges_; }

  // Row index lookups; throw IntegrityError for unknown ids.
  std::size_t graph_index(NodeId v) const;
  std::size_t feature_index(FeatureId f) const;
  bool has_graph_node(NodeId v) const { return graph_pos_.count(v) != 0; }
  bool has_feature_node(FeatureId f) const { return feature_pos_.count(f) != 0; }

  // Flat feature-edge arrays in feature_edges() order.
  const std::vector<std::size_t>& fe_graph() const { return fe_graph_; }
  const std::vector<std::size_t>& fe_feature() const { return fe_feature_; }
  const std::vector<double>& fe_weight() const { return fe_weight_; }

  // Both directions of each graph edge, sorted by (dst, src).
  const std::vector<std::size_t>& ge_src() const { return ge_src_; }
  const std::vector<std::size_t>& ge_dst() const { return ge_dst_; }

  // N_v^feat: feature-edge positions incident to graph node row i.
  const std::vector<std::size_t>& node_feature_edges(std::size_t i) const { return node_fe_[i]; }
  // N_v^G: neighbor graph rows, ascending.
  const std::vector<std::size_t>& node_neighbors(std::size_t i) const { return node_nbrs_[i]; }
  // N_f^feat: feature-edge positions incident to feature row j, by node.
  const std::vector<std::size_t>& feature_node_edges(std::size_t j) const { return feat_fe_[j]; }

  bool operator==(const AllotropicGraph& other) const;

 private:
  void index();

  std::vector<NodeId> graph_nodes_;
  std::vector<FeatureId> feature_nodes_;
  std::vector<Edge> graph_edges_;
  std::vector<FeatureEdge> feature_edges_;
  std::map<NodeId, std::size_t> graph_pos_;
  std::map<FeatureId, std::size_t> feature_pos_;
  std::vector<std::size_t> fe_graph_, fe_feature_;
  std::vector<double> fe_weight_;
  std::vector<std::size_t> ge_src_, ge_dst_;
  std::vector<std::vector<std::size_t>> node_fe_, node_nbrs_, feat_fe_;
};

AllotropicGraph to_allotropic(const HeteroGraph& g);

// Reads the feature edges back into per-node maps. Graph nodes without
// feature edges map to an empty set.
std::map<NodeId, FeatureMap> project_back(const AllotropicGraph& alt);

}  // namespace grafenne
