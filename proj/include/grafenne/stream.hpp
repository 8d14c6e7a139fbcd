#pragma once

// Timestamped graph updates: generation, application and the matching
// update of the allotropic view.

#include <cstdint>
#include <set>
#include <vector>

#include "grafenne/allotropic.hpp"
#include "grafenne/graph.hpp"

namespace grafenne {

struct NodeAddition {
  NodeId node = 0;
  int label = kNoLabel;
  bool operator==(const NodeAddition&) const = default;
};

struct FeatureAssignment {
  NodeId node = 0;
  FeatureId feature = 0;
  double value = 0.0;
  bool operator==(const FeatureAssignment&) const = default;
};

struct FeatureRef {
  NodeId node = 0;
  FeatureId feature = 0;
  bool operator==(const FeatureRef&) const = default;
};

// Changes that turn snapshot G_{t-1} into G_t. Applied in the order: node
// additions, edge deletions, feature deletions, node deletions, edge
// additions, feature additions.
struct StreamDelta {
  int timestamp = 0;
  std::vector<NodeAddition> added_nodes;
  std::vector<NodeId> deleted_nodes;
  std::vector<Edge> added_edges;
  std::vector<Edge> deleted_edges;
  std::vector<FeatureAssignment> added_features;
  std::vector<FeatureRef> deleted_features;

  bool empty() const;
  // Every node named by any entry.
  std::set<NodeId> touched_nodes() const;
  bool operator==(const StreamDelta&) const = default;
};

struct DeltaResult {
  HeteroGraph graph;
  // Touched nodes that still exist after the update.
  std::set<NodeId> affected;
};

// Additions must be new and deletions must exist, else IntegrityError.
DeltaResult apply_delta(const HeteroGraph& g, const StreamDelta& delta);

// The same update expressed as node/edge additions and deletions on the
// allotropic graph. Feature nodes appear and vanish with their edges.
AllotropicGraph apply_delta(const AllotropicGraph& alt, const StreamDelta& delta);

enum class FeatureValueMode { kBinary, kUniform };

struct StreamConfig {
  int steps = 9;
  double p_n = 0.03;
  double p_f_add = 0.05;
  double p_f_del = 0.4;
  double p_e_add = 0.0005;
  double p_e_del = 0.0005;
  FeatureValueMode values = FeatureValueMode::kBinary;
  // Candidate features for additions are [0, feature_universe); 0 means the
  // larger of the feature registry size and the largest feature id + 1.
  std::size_t feature_universe = 0;
  std::uint64_t seed = 0;
};

// `steps` deltas; the delta producing snapshot G_t carries timestamp t, so
// timestamps run 2..steps+1.
std::vector<StreamDelta> generate_stream(const HeteroGraph& g, const StreamConfig& config);

}  // namespace grafenne
