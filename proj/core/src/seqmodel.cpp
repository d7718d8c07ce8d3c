#include "m2oe2/seq/seqmodel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "m2oe2/diff/ops.hpp"
#include "m2oe2/rng.hpp"

namespace m2oe2::seq {

using namespace m2oe2::diff;

std::vector<Var> gru_step(const GruStack& gru, Var x, const std::vector<Var>& h_prev) {
  if (h_prev.size() != gru.layers.size())
    throw ShapeError("gru_step: expected " + std::to_string(gru.layers.size()) +
                     " layer states, got " + std::to_string(h_prev.size()));
  if (x.value().cols() != gru.input_width)
    throw ShapeError("gru_step input", x.shape(), Shape{x.value().rows(), gru.input_width});
  const std::size_t H = gru.hidden_width;
  std::vector<Var> next;
  next.reserve(gru.layers.size());
  Var input = x;
  for (std::size_t l = 0; l < gru.layers.size(); ++l) {
    const GruLayer& p = gru.layers[l];
    Var h = h_prev[l];
    if (h.value().cols() != H || h.value().rows() != input.value().rows())
      throw ShapeError("gru_step hidden state", h.shape(), Shape{input.value().rows(), H});
    Var gx = matmul(input, p.w_x) + p.b;
    Var gh = matmul(h, p.w_h);
    Var r = sigmoid(slice(gx, 1, 0, H) + slice(gh, 1, 0, H));
    Var u = sigmoid(slice(gx, 1, H, 2 * H) + slice(gh, 1, H, 2 * H));
    Var n = tanh(slice(gx, 1, 2 * H, 3 * H) + r * slice(gh, 1, 2 * H, 3 * H));
    // (1 - u) * n + u * h  ==  n + u * (h - n)
    Var h_new = n + u * (h - n);
    next.push_back(h_new);
    input = h_new;
  }
  return next;
}

Var deterministic_head(const DeterministicHead& head, Var h) {
  return matmul(h, head.w) + head.b;
}

GaussianOut gaussian_head(const GaussianHead& head, Var h) {
  return {matmul(h, head.mean_w) + head.mean_b, matmul(h, head.log_var_w) + head.log_var_b};
}

GaussianOut encode_latent(const LatentEncoder& enc, Var x, Var h_prev) {
  Var mean = matmul(x, enc.mean_wx) + matmul(h_prev, enc.mean_wh) + enc.mean_b;
  Var log_var = matmul(x, enc.log_var_wx) + matmul(h_prev, enc.log_var_wh) + enc.log_var_b;
  return {mean, log_var};
}

Var reparameterize(Var mean, Var log_var, Var eps) {
  if (mean.shape() != log_var.shape() || mean.shape() != eps.shape())
    throw ShapeError("reparameterize", mean.shape(), eps.shape());
  return mean + exp(scale(log_var, 0.5)) * eps;
}

GaussianOut decode(const LatentDecoder& dec, Var z) {
  return {matmul(z, dec.mean_w) + dec.mean_b, matmul(z, dec.log_var_w) + dec.log_var_b};
}

namespace {

Tensor as_steps(std::vector<double> v, std::size_t load_width) {
  const std::size_t steps = v.size() / load_width;
  return Tensor({steps, load_width}, std::move(v));
}

double clamped_std(double log_var) {
  return std::exp(std::clamp(0.5 * log_var, kExpMin, kExpMax));
}

}  // namespace

ForecastDistribution mc_forecast(const LatentDecoder& dec, const Tensor& z_mean,
                                 const Tensor& z_log_var, std::size_t J, std::uint64_t seed,
                                 std::size_t load_width, bool keep_samples) {
  if (J < 2) throw std::invalid_argument("mc_forecast: J must be at least 2, got " + std::to_string(J));
  if (z_mean.size() != z_log_var.size())
    throw ShapeError("mc_forecast", z_mean.shape(), z_log_var.shape());
  const std::size_t dz = z_mean.size();

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Tensor z({J, dz});
  for (std::size_t j = 0; j < J; ++j)
    for (std::size_t k = 0; k < dz; ++k)
      z(j, k) = z_mean[k] + clamped_std(z_log_var[k]) * normal(rng);

  Graph& g = dec.mean_w.graph();
  GaussianOut out = decode(dec, g.constant(std::move(z)));
  const Tensor& mu = out.mean.value();
  const Tensor& lv = out.log_var.value();
  const std::size_t width = mu.cols();

  Tensor samples({J, width});
  for (std::size_t j = 0; j < J; ++j)
    for (std::size_t k = 0; k < width; ++k)
      samples(j, k) = mu(j, k) + clamped_std(lv(j, k)) * normal(rng);

  std::vector<double> mean(width, 0.0), sd(width, 0.0);
  for (std::size_t k = 0; k < width; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < J; ++j) s += samples(j, k);
    mean[k] = s / static_cast<double>(J);
    double ss = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      const double d = samples(j, k) - mean[k];
      ss += d * d;
    }
    sd[k] = std::sqrt(ss / static_cast<double>(J - 1));
  }

  ForecastDistribution fd;
  fd.mean = as_steps(std::move(mean), load_width);
  fd.std = as_steps(std::move(sd), load_width);
  if (keep_samples) fd.samples = std::move(samples);
  return fd;
}

ForecastDistribution gaussian_forecast(const Tensor& mean, const Tensor& log_var,
                                       std::size_t load_width) {
  std::vector<double> mu(mean.values().begin(), mean.values().end());
  std::vector<double> sd(log_var.size());
  for (std::size_t k = 0; k < sd.size(); ++k) sd[k] = clamped_std(log_var[k]);
  ForecastDistribution fd;
  fd.mean = as_steps(std::move(mu), load_width);
  fd.std = as_steps(std::move(sd), load_width);
  return fd;
}

ForecastDistribution point_forecast(const Tensor& mean, std::size_t load_width) {
  ForecastDistribution fd;
  fd.mean = as_steps(std::vector<double>(mean.values().begin(), mean.values().end()), load_width);
  fd.std = Tensor(fd.mean.shape(), 0.0);
  fd.point = true;
  return fd;
}

}  // namespace m2oe2::seq
