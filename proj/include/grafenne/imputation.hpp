#pragma once

// Baselines that fill in missing features so a standard GNN can run on a
// dense feature matrix, and the dense GNN itself.

#include <cstdint>
#include <vector>

#include "grafenne/dataset.hpp"
#include "grafenne/graph.hpp"
#include "grafenne/model.hpp"
#include "grafenne/tensor.hpp"

namespace grafenne {

// Row-major |V| x columns matrix; rows follow ascending node ids.
struct DenseFeatures {
  std::vector<NodeId> nodes;
  std::size_t columns = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> observed;

  std::size_t rows() const { return nodes.size(); }
  double at(std::size_t r, std::size_t c) const { return values[r * columns + c]; }
  bool known(std::size_t r, std::size_t c) const { return observed[r * columns + c] != 0; }
  Tensor tensor() const { return Tensor::from({rows(), columns}, values); }
};

// Observed entries copied from `g` (an observed entry `g` does not store is a
// known zero), missing entries 0. `mask` rows must match g.node_ids().
DenseFeatures expand(const HeteroGraph& g, const ObservedMask& mask);

DenseFeatures impute_special_label(const HeteroGraph& g, const ObservedMask& mask, double sentinel = 0.0);

// Missing (v, f) takes the mean observed f over v's graph neighbors, else the
// observed column mean, else 0.
DenseFeatures impute_neighborhood_mean(const HeteroGraph& g, const ObservedMask& mask);

enum class PropagationNorm { kSymmetric, kRandomWalk };

struct PropagationOptions {
  int iterations = 40;
  // Symmetric: D^-1/2 A D^-1/2. Random walk: D^-1 A, which keeps every entry
  // a convex combination of observed values and 0.
  PropagationNorm norm = PropagationNorm::kSymmetric;
};

// Diffusion over graph edges starting from 0 at missing entries; observed
// entries are reset after every step.
DenseFeatures feature_propagation(const HeteroGraph& g, const ObservedMask& mask,
                                  const PropagationOptions& options = {});

enum class Imputer { kNeighborhoodMean, kFeaturePropagation };

// Copy of `g` whose features are the dense entries with |value| >= threshold.
HeteroGraph resparsify(const HeteroGraph& g, const DenseFeatures& dense, double threshold = 1e-8);

HeteroGraph impute_then_grafenne(const HeteroGraph& g, const ObservedMask& mask, Imputer method,
                                 const PropagationOptions& options = {});

// Directed adjacency over g.node_ids() rows, both directions per edge,
// sorted by (dst, src).
struct Adjacency {
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;
};
Adjacency adjacency(const HeteroGraph& g);

struct DenseGnnConfig {
  Phase2Backend backend = Phase2Backend::kSage;
  int layers = 2;
  std::size_t in_dim = 0;
  std::size_t dim = 64;
  double leaky_slope = 0.2;
  double gin_epsilon = 0.0;
  std::uint64_t seed = 0;
};

// Standard GNN with h^0 = the dense feature row. The first layer's weights
// are sized by in_dim, so the parameter count grows with the feature count.
class DenseGnn {
 public:
  DenseGnn() = default;
  explicit DenseGnn(DenseGnnConfig config);

  const DenseGnnConfig& config() const { return config_; }
  const std::vector<GraphConv>& layers() const { return layers_; }
  std::vector<Parameter> parameters() const;
  std::size_t parameter_count() const;

  Tensor forward(const Tensor& x, const Adjacency& adj) const;

 private:
  DenseGnnConfig config_;
  std::vector<GraphConv> layers_;
};

Tensor dense_gnn_forward(const HeteroGraph& g, const DenseFeatures& dense, const DenseGnn& model);

}  // namespace grafenne
