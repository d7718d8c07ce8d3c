#pragma once

#include <functional>
#include <span>
#include <vector>

namespace m2oe2::eval {

/// Mean of squared differences; spans must have equal length.
double mse_metric(std::span<const double> forecasts, std::span<const double> targets);

double normal_pdf(double z);
double normal_cdf(double z);

/// Closed-form CRPS of N(mu, sigma^2) at x:
///   sigma * [z (2 Phi(z) - 1) + 2 phi(z) - 1/sqrt(pi)],  z = (x - mu) / sigma.
/// Throws for sigma <= 0.
double crps_gaussian(double mu, double sigma, double x);

/// CRPS of a point forecast, |x - mu|.
double crps_point(double mu, double x);

using Cdf = std::function<double(double)>;

/// Trapezoidal integral of (F(z) - 1{z >= x})^2 over [lo, hi] with at most
/// `step` between nodes. x is inserted as a node so the jump is integrated
/// exactly. Throws if the sampled F decreases.
double crps_numeric(const Cdf& cdf, double x, double lo, double hi, double step);

/// Right-continuous empirical distribution function of `samples`.
Cdf empirical_cdf(std::vector<double> samples);

}  // namespace m2oe2::eval
