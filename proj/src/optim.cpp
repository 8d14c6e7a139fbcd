#include "grafenne/optim.hpp"

#include <cmath>

namespace grafenne {

AdamState::Moments& AdamState::moments_for(const Parameter& p) {
  auto& mom = moments_[p.id()];
  if (mom.m.size() != p.numel()) {
    mom.m.assign(p.numel(), 0.0);
    mom.v.assign(p.numel(), 0.0);
    mom.step = 0;
  }
  return mom;
}

void adam_step(std::span<Parameter> params, const AdamOptions& options, AdamState& state) {
  for (auto& p : params) {
    Tensor& t = p.tensor();
    if (!t.has_grad()) continue;
    auto& mom = state.moments_for(p);
    ++mom.step;
    const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(mom.step));
    const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(mom.step));
    auto values = t.mutable_values();
    const auto grad = t.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      mom.m[i] = options.beta1 * mom.m[i] + (1.0 - options.beta1) * g;
      mom.v[i] = options.beta2 * mom.v[i] + (1.0 - options.beta2) * g * g;
      const double m_hat = mom.m[i] / c1;
      const double v_hat = mom.v[i] / c2;
      values[i] -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
  }
}

void zero_grads(std::span<Parameter> params) {
  for (auto& p : params) p.tensor().zero_grad();
}

}  // namespace grafenne
