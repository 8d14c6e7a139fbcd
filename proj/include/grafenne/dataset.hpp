#pragma once

#include <cstdint>
#include <vector>

#include "grafenne/graph.hpp"

namespace grafenne {

struct Split {
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;
};

struct SplitFractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

// Copy of `g` with every (node, feature) entry dropped independently with
// probability p. Nodes, edges and labels are kept.
HeteroGraph apply_missing_mask(const HeteroGraph& g, double p, std::uint64_t seed);

// Number of feature columns a dense view of `g` needs: every named feature
// and every id in use.
std::size_t feature_columns(const HeteroGraph& g);

// Which (node, feature column) entries are known. Rows follow the ascending
// node ids the mask was built from.
class ObservedMask {
 public:
  ObservedMask() = default;
  // Known exactly where `g` stores a value.
  static ObservedMask stored(const HeteroGraph& g, std::size_t columns);
  // Everything known (zeros included).
  static ObservedMask complete(const HeteroGraph& g, std::size_t columns);

  const std::vector<NodeId>& nodes() const { return nodes_; }
  std::size_t rows() const { return nodes_.size(); }
  std::size_t columns() const { return columns_; }
  bool observed(std::size_t row, std::size_t col) const { return bits_[row * columns_ + col] != 0; }
  void set(std::size_t row, std::size_t col, bool value) { bits_[row * columns_ + col] = value ? 1 : 0; }
  std::size_t count() const;

 private:
  std::vector<NodeId> nodes_;
  std::size_t columns_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct MaskedGraph {
  HeteroGraph graph;
  ObservedMask observed;
};

// apply_missing_mask plus the knowledge mask the imputation baselines need:
// an unstored entry counts as a known zero unless its own draw deleted it.
// The graph equals apply_missing_mask(g, p, seed).
MaskedGraph mask_features(const HeteroGraph& g, double p, std::uint64_t seed, std::size_t columns);

// Copy of `g` with every stored value v replaced by a * v + b. Values that
// land on 0 become absent, like any zero.
HeteroGraph translate_features(const HeteroGraph& g, double a, double b);

// Random disjoint split of the labeled nodes. Val and test sizes are
// floor(fraction * n); train receives the rest of floor(sum * n).
Split make_split(const HeteroGraph& g, const SplitFractions& fractions, std::uint64_t seed);

// Same rule over an explicit id list.
Split make_split(std::vector<NodeId> ids, const SplitFractions& fractions, std::uint64_t seed);

}  // namespace grafenne
