#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "grafenne/tensor.hpp"

namespace grafenne {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-parameter first/second moments, keyed by parameter id. Parameters that
// join late start their own bias-correction clock.
class AdamState {
 public:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;
  };

  Moments& moments_for(const Parameter& p);
  std::size_t size() const { return moments_.size(); }
  void clear() { moments_.clear(); }

 private:
  std::unordered_map<std::uint64_t, Moments> moments_;
};

// One bias-corrected Adam update on every parameter holding a gradient.
void adam_step(std::span<Parameter> params, const AdamOptions& options, AdamState& state);

void zero_grads(std::span<Parameter> params);

}  // namespace grafenne
