#include "grafenne/allotropic.hpp"

#include <algorithm>
#include <set>

namespace grafenne {

AllotropicGraph AllotropicGraph::build(std::vector<NodeId> graph_nodes, std::vector<Edge> graph_edges,
                                       std::vector<FeatureEdge> feature_edges,
                                       std::vector<FeatureId> extra_features) {
  AllotropicGraph alt;
  std::sort(graph_nodes.begin(), graph_nodes.end());
  graph_nodes.erase(std::unique(graph_nodes.begin(), graph_nodes.end()), graph_nodes.end());
  alt.graph_nodes_ = std::move(graph_nodes);
  for (std::size_t i = 0; i < alt.graph_nodes_.size(); ++i) alt.graph_pos_.emplace(alt.graph_nodes_[i], i);

  for (auto& e : graph_edges) {
    e = Edge::canonical(e.u, e.v);
    if (e.u == e.v) throw IntegrityError("self loop on node " + std::to_string(e.u));
    if (!alt.has_graph_node(e.u) || !alt.has_graph_node(e.v)) {
      throw IntegrityError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ") has a missing endpoint");
    }
  }
  std::sort(graph_edges.begin(), graph_edges.end());
  graph_edges.erase(std::unique(graph_edges.begin(), graph_edges.end()), graph_edges.end());
  alt.graph_edges_ = std::move(graph_edges);

  std::erase_if(feature_edges, [](const FeatureEdge& fe) { return fe.weight == 0.0; });
  std::sort(feature_edges.begin(), feature_edges.end(), [](const FeatureEdge& a, const FeatureEdge& b) {
    return std::tie(a.node, a.feature) < std::tie(b.node, b.feature);
  });
  std::set<FeatureId> features(extra_features.begin(), extra_features.end());
  for (std::size_t i = 0; i < feature_edges.size(); ++i) {
    const auto& fe = feature_edges[i];
    if (!alt.has_graph_node(fe.node)) {
      throw IntegrityError("feature edge on missing node " + std::to_string(fe.node));
    }
    if (i > 0 && feature_edges[i - 1].node == fe.node && feature_edges[i - 1].feature == fe.feature) {
      throw IntegrityError("duplicate feature edge (" + std::to_string(fe.node) + "," + std::to_string(fe.feature) + ")");
    }
    features.insert(fe.feature);
  }
  alt.feature_edges_ = std::move(feature_edges);
  alt.feature_nodes_.assign(features.begin(), features.end());
  for (std::size_t j = 0; j < alt.feature_nodes_.size(); ++j) alt.feature_pos_.emplace(alt.feature_nodes_[j], j);
  alt.index();
  return alt;
}

void AllotropicGraph::index() {
  const std::size_t n = graph_nodes_.size();
  node_fe_.assign(n, {});
  node_nbrs_.assign(n, {});
  feat_fe_.assign(feature_nodes_.size(), {});
  fe_graph_.clear();
  fe_feature_.clear();
  fe_weight_.clear();
  for (std::size_t k = 0; k < feature_edges_.size(); ++k) {
    const auto& fe = feature_edges_[k];
    const std::size_t i = graph_pos_.at(fe.node);
    const std::size_t j = feature_pos_.at(fe.feature);
    fe_graph_.push_back(i);
    fe_feature_.push_back(j);
    fe_weight_.push_back(fe.weight);
    node_fe_[i].push_back(k);
    feat_fe_[j].push_back(k);
  }
  for (const auto& e : graph_edges_) {
    const std::size_t a = graph_pos_.at(e.u);
    const std::size_t b = graph_pos_.at(e.v);
    node_nbrs_[a].push_back(b);
    node_nbrs_[b].push_back(a);
  }
  ge_src_.clear();
  ge_dst_.clear();
  for (std::size_t i = 0; i < n; ++i) {
    auto& nb = node_nbrs_[i];
    std::sort(nb.begin(), nb.end());
    for (std::size_t s : nb) {
      ge_src_.push_back(s);
      ge_dst_.push_back(i);
    }
  }
}

std::size_t AllotropicGraph::graph_index(NodeId v) const {
  auto it = graph_pos_.find(v);
  if (it == graph_pos_.end()) throw IntegrityError("graph node " + std::to_string(v) + " not in allotropic graph");
  return it->second;
}

std::size_t AllotropicGraph::feature_index(FeatureId f) const {
  auto it = feature_pos_.find(f);
  if (it == feature_pos_.end()) throw IntegrityError("feature node " + std::to_string(f) + " not in allotropic graph");
  return it->second;
}

bool AllotropicGraph::operator==(const AllotropicGraph& other) const {
  return graph_nodes_ == other.graph_nodes_ && feature_nodes_ == other.feature_nodes_ &&
         graph_edges_ == other.graph_edges_ && feature_edges_ == other.feature_edges_;
}

AllotropicGraph to_allotropic(const HeteroGraph& g) {
  std::vector<FeatureEdge> fes;
  fes.reserve(g.num_feature_entries());
  for (const auto& [v, rec] : g.records()) {
    for (const auto& [f, x] : rec.features) fes.push_back({v, f, x});
  }
  return AllotropicGraph::build(g.node_ids(), std::vector<Edge>(g.edges().begin(), g.edges().end()), std::move(fes));
}

std::map<NodeId, FeatureMap> project_back(const AllotropicGraph& alt) {
  std::map<NodeId, FeatureMap> out;
  for (NodeId v : alt.graph_nodes()) out[v];
  for (const auto& fe : alt.feature_edges()) out[fe.node][fe.feature] = fe.weight;
  return out;
}

}  // namespace grafenne
