#include "m2oe2/diff/gradcheck.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

namespace m2oe2::diff {
namespace {

double loss_value(const LossFn& fn, const ParamSet& params) {
  Graph g;
  return fn(g, params).value().item();
}

}  // namespace

GradCheckResult finite_diff_check(const LossFn& loss_fn, ParamSet& params, double eps,
                                  std::size_t samples, std::uint64_t seed) {
  if (!(eps >= 1e-7 && eps <= 1e-3))
    throw std::invalid_argument("finite_diff_check: eps must lie in [1e-7, 1e-3]");

  const double first = loss_value(loss_fn, params);
  const double second = loss_value(loss_fn, params);
  if (std::memcmp(&first, &second, sizeof(double)) != 0) {
    std::ostringstream os;
    os.precision(17);
    os << "finite_diff_check: loss is not deterministic (" << first << " then " << second
       << "); freeze all noise draws before checking";
    throw NondeterministicLoss(os.str());
  }

  Gradients analytic;
  {
    Graph g;
    Var loss = loss_fn(g, params);
    analytic = g.backward(loss, params);
  }

  GradCheckResult result;
  const std::size_t total = params.scalar_count();
  if (total == 0 || samples == 0) return result;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t flat = pick(rng);
    std::size_t p = 0;
    while (flat >= params[p].value.size()) flat -= params[p].value.size(), ++p;
    double& x = params[p].value[flat];
    const double saved = x;
    x = saved + eps;
    const double up = loss_value(loss_fn, params);
    x = saved - eps;
    const double down = loss_value(loss_fn, params);
    x = saved;

    const double numeric = (up - down) / (2.0 * eps);
    const double exact = analytic[p][flat];
    const double scale = std::max(std::abs(numeric), std::abs(exact));
    const double err = scale < 1e-8 ? std::abs(numeric - exact) : std::abs(numeric - exact) / scale;
    if (err > result.max_error || s == 0) {
      result.max_error = std::max(result.max_error, err);
      if (err >= result.max_error) {
        result.worst_parameter = params[p].name;
        result.worst_index = flat;
        result.analytic = exact;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace m2oe2::diff
