#include "grafenne/imputation.hpp"

#include <cmath>

namespace grafenne {

namespace {

void check_rows(const HeteroGraph& g, const ObservedMask& mask) {
  if (mask.nodes() != g.node_ids()) throw DimensionError("observed mask rows do not match the graph's nodes");
  if (mask.columns() < feature_columns(g)) {
    throw DimensionError("observed mask has " + std::to_string(mask.columns()) + " columns, graph needs " +
                         std::to_string(feature_columns(g)));
  }
}

}  // namespace

DenseFeatures expand(const HeteroGraph& g, const ObservedMask& mask) {
  check_rows(g, mask);
  DenseFeatures d;
  d.nodes = mask.nodes();
  d.columns = mask.columns();
  d.values.assign(d.rows() * d.columns, 0.0);
  d.observed.assign(d.rows() * d.columns, 0);
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < d.columns; ++c) d.observed[r * d.columns + c] = mask.observed(r, c) ? 1 : 0;
    for (const auto& [f, x] : g.features(d.nodes[r])) {
      // A stored value the mask calls missing is dropped: the mask wins.
      if (mask.observed(r, f)) d.values[r * d.columns + f] = x;
    }
  }
  return d;
}

DenseFeatures impute_special_label(const HeteroGraph& g, const ObservedMask& mask, double sentinel) {
  DenseFeatures d = expand(g, mask);
  for (std::size_t k = 0; k < d.values.size(); ++k) {
    if (!d.observed[k]) d.values[k] = sentinel;
  }
  return d;
}

Adjacency adjacency(const HeteroGraph& g) {
  const auto alt = AllotropicGraph::build(g.node_ids(), {g.edges().begin(), g.edges().end()}, {});
  return {alt.ge_src(), alt.ge_dst()};
}

DenseFeatures impute_neighborhood_mean(const HeteroGraph& g, const ObservedMask& mask) {
  const DenseFeatures base = expand(g, mask);
  DenseFeatures d = base;
  const std::size_t cols = d.columns;
  std::vector<double> col_sum(cols, 0.0), col_count(cols, 0.0);
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (base.known(r, c)) {
        col_sum[c] += base.at(r, c);
        col_count[c] += 1.0;
      }
    }
  }
  const Adjacency adj = adjacency(g);
  std::vector<double> sum(cols), count(cols);
  std::size_t k = 0;
  for (std::size_t r = 0; r < d.rows(); ++r) {
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(count.begin(), count.end(), 0.0);
    for (; k < adj.dst.size() && adj.dst[k] == r; ++k) {
      const std::size_t u = adj.src[k];
      for (std::size_t c = 0; c < cols; ++c) {
        if (base.known(u, c)) {
          sum[c] += base.at(u, c);
          count[c] += 1.0;
        }
      }
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (base.known(r, c)) continue;
      double& x = d.values[r * cols + c];
      if (count[c] > 0) {
        x = sum[c] / count[c];
      } else if (col_count[c] > 0) {
        x = col_sum[c] / col_count[c];
      } else {
        x = 0.0;
      }
    }
  }
  return d;
}

DenseFeatures feature_propagation(const HeteroGraph& g, const ObservedMask& mask, const PropagationOptions& options) {
  if (options.iterations < 1) throw ConfigError("feature propagation needs at least one iteration");
  DenseFeatures d = expand(g, mask);
  const std::size_t n = d.rows(), cols = d.columns;
  const Adjacency adj = adjacency(g);
  std::vector<double> degree(n, 0.0);
  for (auto v : adj.dst) degree[v] += 1.0;
  std::vector<double> w(adj.src.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double dv = degree[adj.dst[k]], du = degree[adj.src[k]];
    w[k] = options.norm == PropagationNorm::kSymmetric ? 1.0 / std::sqrt(dv * du) : 1.0 / dv;
  }
  std::vector<double> next(d.values.size());
  for (int it = 0; it < options.iterations; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double* from = &d.values[adj.src[k] * cols];
      double* to = &next[adj.dst[k] * cols];
      for (std::size_t c = 0; c < cols; ++c) to[c] += w[k] * from[c];
    }
    for (std::size_t i = 0; i < next.size(); ++i) {
      if (!d.observed[i]) d.values[i] = next[i];
    }
  }
  return d;
}

HeteroGraph resparsify(const HeteroGraph& g, const DenseFeatures& dense, double threshold) {
  HeteroGraph out = g;
  for (std::size_t r = 0; r < dense.rows(); ++r) {
    const NodeId v = dense.nodes[r];
    out.clear_features(v);
    for (std::size_t c = 0; c < dense.columns; ++c) {
      const double x = dense.at(r, c);
      if (std::abs(x) >= threshold) out.set_feature(v, static_cast<FeatureId>(c), x);
    }
  }
  return out;
}

HeteroGraph impute_then_grafenne(const HeteroGraph& g, const ObservedMask& mask, Imputer method,
                                 const PropagationOptions& options) {
  const DenseFeatures d = method == Imputer::kNeighborhoodMean ? impute_neighborhood_mean(g, mask)
                                                               : feature_propagation(g, mask, options);
  return resparsify(g, d);
}

DenseGnn::DenseGnn(DenseGnnConfig config) : config_(config) {
  if (config_.layers < 1) throw ConfigError("layers must be at least 1");
  if (config_.in_dim < 1 || config_.dim < 1) throw ConfigError("dense GNN dimensions must be positive");
  for (int l = 0; l < config_.layers; ++l) {
    layers_.push_back(GraphConv::create("dense/layer" + std::to_string(l) + "/", config_.backend,
                                        l == 0 ? config_.in_dim : config_.dim, config_.dim, config_.seed));
  }
}

std::vector<Parameter> DenseGnn::parameters() const {
  std::vector<Parameter> out;
  for (const auto& l : layers_) {
    auto p = l.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::size_t DenseGnn::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

Tensor DenseGnn::forward(const Tensor& x, const Adjacency& adj) const {
  if (x.rank() != 2 || x.cols() != config_.in_dim) {
    throw DimensionError("dense GNN expects " + std::to_string(config_.in_dim) + " input columns, got " +
                         shape_str(x.shape()));
  }
  Tensor h = x;
  for (const auto& l : layers_) h = graph_conv(h, l, config_.leaky_slope, config_.gin_epsilon, adj.src, adj.dst);
  return h;
}

Tensor dense_gnn_forward(const HeteroGraph& g, const DenseFeatures& dense, const DenseGnn& model) {
  if (dense.nodes != g.node_ids()) throw DimensionError("dense feature rows do not match the graph's nodes");
  return model.forward(dense.tensor(), adjacency(g));
}

}  // namespace grafenne
