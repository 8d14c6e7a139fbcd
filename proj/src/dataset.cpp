#include "grafenne/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "grafenne/random.hpp"

namespace grafenne {

HeteroGraph apply_missing_mask(const HeteroGraph& g, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("missing rate p must lie in [0,1], got " + std::to_string(p));
  HeteroGraph out = g;
  if (p == 0.0) return out;
  Rng rng(derive_seed(seed, "mask"));
  for (const auto& [v, rec] : g.records()) {
    for (const auto& [f, _] : rec.features) {
      if (rng.bernoulli(p)) out.remove_feature(v, f);
    }
  }
  return out;
}

std::size_t feature_columns(const HeteroGraph& g) {
  std::size_t columns = g.feature_names().size();
  for (const auto& [_, rec] : g.records()) {
    if (!rec.features.empty()) columns = std::max<std::size_t>(columns, rec.features.rbegin()->first + 1);
  }
  return columns;
}

ObservedMask ObservedMask::stored(const HeteroGraph& g, std::size_t columns) {
  ObservedMask m;
  m.nodes_ = g.node_ids();
  m.columns_ = columns;
  m.bits_.assign(m.nodes_.size() * columns, 0);
  for (std::size_t r = 0; r < m.nodes_.size(); ++r) {
    for (const auto& [f, _] : g.features(m.nodes_[r])) {
      if (f >= columns) throw DimensionError("feature id " + std::to_string(f) + " outside " + std::to_string(columns) + " columns");
      m.set(r, f, true);
    }
  }
  return m;
}

ObservedMask ObservedMask::complete(const HeteroGraph& g, std::size_t columns) {
  ObservedMask m = stored(g, columns);
  std::fill(m.bits_.begin(), m.bits_.end(), 1);
  return m;
}

std::size_t ObservedMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

MaskedGraph mask_features(const HeteroGraph& g, double p, std::uint64_t seed, std::size_t columns) {
  MaskedGraph out{apply_missing_mask(g, p, seed), ObservedMask::complete(g, columns)};
  // Stored entries: known iff they survived. Unstored entries get their own
  // stream so the graph is unaffected by the column count.
  Rng zeros(derive_seed(seed, "mask/zeros"));
  const auto& nodes = out.observed.nodes();
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    const auto& kept = out.graph.features(nodes[r]);
    const auto& before = g.features(nodes[r]);
    for (std::size_t c = 0; c < columns; ++c) {
      const auto f = static_cast<FeatureId>(c);
      if (before.count(f)) {
        out.observed.set(r, c, kept.count(f) != 0);
      } else if (p > 0.0 && zeros.bernoulli(p)) {
        out.observed.set(r, c, false);
      }
    }
  }
  return out;
}

Split make_split(std::vector<NodeId> ids, const SplitFractions& fractions, std::uint64_t seed) {
  const double total = fractions.train + fractions.val + fractions.test;
  if (fractions.train < 0 || fractions.val < 0 || fractions.test < 0 || total > 1.0 + 1e-12) {
    throw ConfigError("split fractions must be nonnegative and sum to at most 1");
  }
  std::sort(ids.begin(), ids.end());
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(ids);
  const auto n = static_cast<double>(ids.size());
  const auto used = static_cast<std::size_t>(std::floor(std::min(total, 1.0) * n + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(fractions.val * n + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(fractions.test * n + 1e-9));
  const std::size_t n_train = used - n_val - n_test;

  Split s;
  auto it = ids.begin();
  s.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
  it += static_cast<std::ptrdiff_t>(n_train);
  s.val.assign(it, it + static_cast<std::ptrdiff_t>(n_val));
  it += static_cast<std::ptrdiff_t>(n_val);
  s.test.assign(it, it + static_cast<std::ptrdiff_t>(n_test));
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

Split make_split(const HeteroGraph& g, const SplitFractions& fractions, std::uint64_t seed) {
  return make_split(g.labeled_nodes(), fractions, seed);
}

HeteroGraph translate_features(const HeteroGraph& g, double a, double b) {
  HeteroGraph out = g;
  for (const auto& [v, rec] : g.records()) {
    out.clear_features(v);
    for (const auto& [f, x] : rec.features) out.set_feature(v, f, a * x + b);
  }
  return out;
}

}  // namespace grafenne
