#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "m2oe2/diff/params.hpp"

namespace m2oe2::train {

using diff::Gradients;
using diff::ParamSet;
using diff::Tensor;

struct AdamState {
  std::vector<Tensor> m, v;  // one per parameter, same shapes
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(const ParamSet& params);
};

struct StepOutcome {
  bool applied = true;
  std::string reason;  // why the step was skipped
};

/// Bias-corrected Adam. A non-finite gradient leaves parameters and state
/// untouched and reports the skip.
StepOutcome adam_step(ParamSet& params, const Gradients& grads, AdamState& state, double lr);

/// Rescales `grads` so their global L2 norm is at most max_norm (no-op for
/// max_norm <= 0). Returns the norm before clipping.
double clip_global_norm(Gradients& grads, double max_norm);

}  // namespace m2oe2::train
