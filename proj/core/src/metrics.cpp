#include "m2oe2/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>

namespace m2oe2::eval {

double mse_metric(std::span<const double> forecasts, std::span<const double> targets) {
  if (forecasts.size() != targets.size())
    throw std::invalid_argument("mse_metric: " + std::to_string(forecasts.size()) +
                                " forecasts vs " + std::to_string(targets.size()) + " targets");
  if (forecasts.empty()) throw std::invalid_argument("mse_metric: no values");
  double s = 0.0;
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    const double d = forecasts[i] - targets[i];
    s += d * d;
  }
  return s / static_cast<double>(forecasts.size());
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double crps_gaussian(double mu, double sigma, double x) {
  if (!(sigma > 0.0))
    throw std::invalid_argument("crps_gaussian: sigma must be positive, got " + std::to_string(sigma));
  const double z = (x - mu) / sigma;
  return sigma * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z) -
                  1.0 / std::sqrt(std::numbers::pi));
}

double crps_point(double mu, double x) { return std::abs(x - mu); }

double crps_numeric(const Cdf& cdf, double x, double lo, double hi, double step) {
  if (!(hi > lo) || !(step > 0.0)) throw std::invalid_argument("crps_numeric: bad grid");
  std::vector<double> nodes;
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / step));
  nodes.reserve(n + 2);
  for (std::size_t i = 0; i <= n; ++i)
    nodes.push_back(i == n ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n));
  if (x > lo && x < hi) nodes.insert(std::upper_bound(nodes.begin(), nodes.end(), x), x);

  double total = 0.0, prev_z = 0.0, prev_f = 0.0, prev_start = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double z = nodes[i];
    const double f = cdf(z);
    if (i > 0 && f < prev_f)
      throw std::invalid_argument("crps_numeric: cdf decreases between " + std::to_string(prev_z) +
                                  " and " + std::to_string(z));
    // The indicator jumps at x: an interval ending at x sees the left limit.
    double end_value = (f - 1.0) * (f - 1.0);
    if (z < x) {
      end_value = f * f;
    } else if (z == x) {
      const double f_left = cdf(std::nextafter(x, -HUGE_VAL));
      end_value = f_left * f_left;
    }
    if (i > 0) total += 0.5 * (prev_start + end_value) * (z - prev_z);
    prev_z = z;
    prev_f = f;
    prev_start = z >= x ? (f - 1.0) * (f - 1.0) : f * f;
  }
  return total;
}

Cdf empirical_cdf(std::vector<double> samples) {
  if (samples.empty()) throw std::invalid_argument("empirical_cdf: no samples");
  std::sort(samples.begin(), samples.end());
  auto sorted = std::make_shared<const std::vector<double>>(std::move(samples));
  return [sorted](double z) {
    const auto k = std::upper_bound(sorted->begin(), sorted->end(), z) - sorted->begin();
    return static_cast<double>(k) / static_cast<double>(sorted->size());
  };
}

}  // namespace m2oe2::eval
