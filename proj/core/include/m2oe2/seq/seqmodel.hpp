#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "m2oe2/diff/graph.hpp"

namespace m2oe2::seq {

using diff::Graph;
using diff::ParamSet;
using diff::Tensor;
using diff::Var;

/// One GRU layer. Gate blocks are packed column-wise in the order
/// [reset | update | candidate]:
///   r = sigmoid(x W_x[r] + h W_h[r] + b[r])
///   u = sigmoid(x W_x[u] + h W_h[u] + b[u])
///   n = tanh(x W_x[n] + r * (h W_h[n]) + b[n])
///   h' = (1 - u) * n + u * h
struct GruLayer {
  Var w_x;  // in x 3h
  Var w_h;  // h x 3h
  Var b;    // 3h
};

struct GruStack {
  std::vector<GruLayer> layers;
  std::size_t input_width = 0;
  std::size_t hidden_width = 0;
};

/// Advances every layer by one step. `x` is (batch x d_x'), each h_prev[l]
/// is (batch x d_h). Returns the new states; the last one is the top layer.
std::vector<Var> gru_step(const GruStack& gru, Var x, const std::vector<Var>& h_prev);

struct GaussianOut {
  Var mean;
  Var log_var;
};

struct DeterministicHead {
  Var w, b;
};
/// Linear point forecast of width K*d_x (identity output activation).
Var deterministic_head(const DeterministicHead& head, Var h);

struct GaussianHead {
  Var mean_w, mean_b, log_var_w, log_var_b;
};
GaussianOut gaussian_head(const GaussianHead& head, Var h);

struct LatentEncoder {
  Var mean_wx, mean_wh, mean_b;
  Var log_var_wx, log_var_wh, log_var_b;
};
/// Diagonal Gaussian q(z | x, h_prev); x is the (modulated) step input.
GaussianOut encode_latent(const LatentEncoder& enc, Var x, Var h_prev);

/// z = mean + exp(log_var / 2) * eps
Var reparameterize(Var mean, Var log_var, Var eps);

struct LatentDecoder {
  Var mean_w, mean_b, log_var_w, log_var_b;
};
GaussianOut decode(const LatentDecoder& dec, Var z);

/// Per-step predictive mean and standard deviation for one forecast origin,
/// laid out as (K x d_x) in normalized units.
struct ForecastDistribution {
  Tensor mean;
  Tensor std;
  std::optional<Tensor> samples;  // (J x K*d_x) when retained
  bool point = false;             // point forecast: std is all zeros
};

/// Monte Carlo predictive statistics for one origin: J draws of z from the
/// encoder Gaussian, each decoded and sampled once. Mean uses 1/J, variance
/// 1/(J-1). `z_mean`/`z_log_var` are single rows of width d_z.
ForecastDistribution mc_forecast(const LatentDecoder& dec, const Tensor& z_mean,
                                 const Tensor& z_log_var, std::size_t J, std::uint64_t seed,
                                 std::size_t load_width, bool keep_samples = false);

/// Gaussian distribution from direct mean / log-variance rows.
ForecastDistribution gaussian_forecast(const Tensor& mean, const Tensor& log_var,
                                       std::size_t load_width);
ForecastDistribution point_forecast(const Tensor& mean, std::size_t load_width);

}  // namespace m2oe2::seq
