#include "m2oe2/train/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace m2oe2::train {

AdamState::AdamState(const ParamSet& params) {
  for (const auto& p : params) {
    m.emplace_back(p.value.shape(), 0.0);
    v.emplace_back(p.value.shape(), 0.0);
  }
}

StepOutcome adam_step(ParamSet& params, const Gradients& grads, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: learning rate must be positive");
  if (grads.size() != params.size() || state.m.size() != params.size())
    throw std::invalid_argument("adam_step: gradient/state count does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (grads[i].shape() != params[i].value.shape() || state.m[i].shape() != grads[i].shape())
      throw diff::ShapeError("adam_step " + params[i].name, params[i].value.shape(),
                             grads[i].shape());

  if (!grads.all_finite()) {
    for (std::size_t i = 0; i < params.size(); ++i)
      for (double g : grads[i].values())
        if (!std::isfinite(g))
          return {false, "non-finite gradient in " + params[i].name + ", step " +
                             std::to_string(state.step + 1) + " skipped"};
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value.values();
    auto g = grads[i].values();
    auto m = state.m[i].values();
    auto v = state.v[i].values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + state.eps);
    }
  }
  return {};
}

double clip_global_norm(Gradients& grads, double max_norm) {
  const double norm = grads.global_norm();
  if (max_norm > 0.0 && std::isfinite(norm) && norm > max_norm) grads.scale(max_norm / norm);
  return norm;
}

}  // namespace m2oe2::train
