#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "m2oe2/diff/graph.hpp"

namespace m2oe2::diff {

/// Builds a scalar loss on the given graph from the given parameters. Must
/// be a pure function of the parameter values (any noise frozen by the caller).
using LossFn = std::function<Var(Graph&, const ParamSet&)>;

class NondeterministicLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradCheckResult {
  double max_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients with central differences on `samples`
/// scalar parameters drawn uniformly at random (seeded). The error per
/// coordinate is relative, |a - n| / max(|a|, |n|), falling back to absolute
/// when both magnitudes are below 1e-8.
///
/// Throws std::invalid_argument for eps outside [1e-7, 1e-3] and
/// NondeterministicLoss when two identical evaluations disagree.
GradCheckResult finite_diff_check(const LossFn& loss_fn, ParamSet& params, double eps,
                                  std::size_t samples, std::uint64_t seed = 0);

}  // namespace m2oe2::diff
