#include "grafenne/graph.hpp"

#include <algorithm>

namespace grafenne {

std::uint32_t NameRegistry::intern(std::string_view name) {
  std::string key(name);
  if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(names_.size());
  names_.push_back(key);
  ids_.emplace(std::move(key), id);
  return id;
}

std::optional<std::uint32_t> NameRegistry::find(std::string_view name) const {
  if (auto it = ids_.find(std::string(name)); it != ids_.end()) return it->second;
  return std::nullopt;
}

std::string NameRegistry::name(std::uint32_t id) const {
  return id < names_.size() ? names_[id] : std::to_string(id);
}

const HeteroGraph::NodeRecord& HeteroGraph::record(NodeId v) const {
  auto it = nodes_.find(v);
  if (it == nodes_.end()) throw IntegrityError("node " + std::to_string(v) + " does not exist");
  return it->second;
}

HeteroGraph::NodeRecord& HeteroGraph::record(NodeId v) {
  auto it = nodes_.find(v);
  if (it == nodes_.end()) throw IntegrityError("node " + std::to_string(v) + " does not exist");
  return it->second;
}

void HeteroGraph::add_node(NodeId v, int label) {
  if (!nodes_.emplace(v, NodeRecord{}).second) {
    throw IntegrityError("node " + std::to_string(v) + " already exists");
  }
  nodes_[v].label = label;
}

void HeteroGraph::remove_node(NodeId v) {
  auto& rec = record(v);
  for (NodeId u : rec.neighbors) {
    edges_.erase(Edge::canonical(u, v));
    nodes_[u].neighbors.erase(v);
  }
  nodes_.erase(v);
}

bool HeteroGraph::add_edge(NodeId a, NodeId b) {
  if (a == b) throw IntegrityError("self loop on node " + std::to_string(a));
  auto& ra = record(a);
  auto& rb = record(b);
  if (!edges_.insert(Edge::canonical(a, b)).second) return false;
  ra.neighbors.insert(b);
  rb.neighbors.insert(a);
  return true;
}

void HeteroGraph::remove_edge(NodeId a, NodeId b) {
  if (edges_.erase(Edge::canonical(a, b)) == 0) {
    throw IntegrityError("edge (" + std::to_string(a) + "," + std::to_string(b) + ") does not exist");
  }
  record(a).neighbors.erase(b);
  record(b).neighbors.erase(a);
}

void HeteroGraph::set_feature(NodeId v, FeatureId f, double value) {
  auto& feats = record(v).features;
  if (value == 0.0) {
    feats.erase(f);
  } else {
    feats[f] = value;
  }
}

void HeteroGraph::remove_feature(NodeId v, FeatureId f) {
  if (record(v).features.erase(f) == 0) {
    throw IntegrityError("feature " + std::to_string(f) + " not present on node " + std::to_string(v));
  }
}

void HeteroGraph::clear_features(NodeId v) { record(v).features.clear(); }

void HeteroGraph::set_label(NodeId v, int label) { record(v).label = label; }
int HeteroGraph::label(NodeId v) const { return record(v).label; }

std::size_t HeteroGraph::num_feature_entries() const {
  std::size_t n = 0;
  for (const auto& [_, rec] : nodes_) n += rec.features.size();
  return n;
}

std::vector<NodeId> HeteroGraph::node_ids() const {
  std::vector<NodeId> ids;
  ids.reserve(nodes_.size());
  for (const auto& [v, _] : nodes_) ids.push_back(v);
  return ids;
}

std::vector<NodeId> HeteroGraph::labeled_nodes() const {
  std::vector<NodeId> ids;
  for (const auto& [v, rec] : nodes_) {
    if (rec.label != kNoLabel) ids.push_back(v);
  }
  return ids;
}

std::set<FeatureId> HeteroGraph::feature_set() const {
  std::set<FeatureId> all;
  for (const auto& [_, rec] : nodes_) {
    for (const auto& [f, __] : rec.features) all.insert(f);
  }
  return all;
}

bool HeteroGraph::same_content(const HeteroGraph& other) const {
  if (edges_ != other.edges_ || nodes_.size() != other.nodes_.size()) return false;
  return std::equal(nodes_.begin(), nodes_.end(), other.nodes_.begin(), [](const auto& a, const auto& b) {
    return a.first == b.first && a.second.label == b.second.label && a.second.features == b.second.features;
  });
}

}  // namespace grafenne
