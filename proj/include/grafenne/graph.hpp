#pragma once

// Graphs whose nodes carry individual sparse feature sets.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "grafenne/errors.hpp"

namespace grafenne {

using NodeId = std::uint32_t;
using FeatureId = std::uint32_t;
inline constexpr int kNoLabel = -1;

// Undirected edge, always stored with u < v.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  static Edge canonical(NodeId a, NodeId b) { return a < b ? Edge{a, b} : Edge{b, a}; }
  auto operator<=>(const Edge&) const = default;
};

// Bidirectional map between external string ids and dense integer ids.
class NameRegistry {
 public:
  std::uint32_t intern(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  // Registered name, or the decimal id for ids never registered.
  std::string name(std::uint32_t id) const;
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

using FeatureMap = std::map<FeatureId, double>;

class HeteroGraph {
 public:
  struct NodeRecord {
    FeatureMap features;
    std::set<NodeId> neighbors;
    int label = kNoLabel;
  };

  bool has_node(NodeId v) const { return nodes_.count(v) != 0; }
  void add_node(NodeId v, int label = kNoLabel);
  // Drops the node with its incident edges, feature entries and label.
  void remove_node(NodeId v);

  bool has_edge(NodeId a, NodeId b) const { return edges_.count(Edge::canonical(a, b)) != 0; }
  // Returns false for an already present edge. Self loops are rejected.
  bool add_edge(NodeId a, NodeId b);
  void remove_edge(NodeId a, NodeId b);

  // A zero value is the same as no entry.
  void set_feature(NodeId v, FeatureId f, double value);
  void remove_feature(NodeId v, FeatureId f);
  void clear_features(NodeId v);

  void set_label(NodeId v, int label);
  int label(NodeId v) const;

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  std::size_t num_feature_entries() const;
  std::vector<NodeId> node_ids() const;
  std::vector<NodeId> labeled_nodes() const;
  const std::set<Edge>& edges() const { return edges_; }
  const FeatureMap& features(NodeId v) const { return record(v).features; }
  const std::set<NodeId>& neighbors(NodeId v) const { return record(v).neighbors; }
  const std::map<NodeId, NodeRecord>& records() const { return nodes_; }
  // F: the union of all per-node feature keys.
  std::set<FeatureId> feature_set() const;

  int num_classes() const { return num_classes_; }
  void set_num_classes(int c) { num_classes_ = c; }

  NameRegistry& node_names() { return node_names_; }
  const NameRegistry& node_names() const { return node_names_; }
  NameRegistry& feature_names() { return feature_names_; }
  const NameRegistry& feature_names() const { return feature_names_; }
  NameRegistry& class_names() { return class_names_; }
  const NameRegistry& class_names() const { return class_names_; }

  // Structural equality: nodes, labels, edges and feature values.
  bool same_content(const HeteroGraph& other) const;

 private:
  const NodeRecord& record(NodeId v) const;
  NodeRecord& record(NodeId v);

  std::map<NodeId, NodeRecord> nodes_;
  std::set<Edge> edges_;
  int num_classes_ = 0;
  NameRegistry node_names_;
  NameRegistry feature_names_;
  NameRegistry class_names_;
};

}  // namespace grafenne
