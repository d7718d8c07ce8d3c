#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "m2oe2/data/dataset.hpp"
#include "m2oe2/model.hpp"
#include "m2oe2/seq/seqmodel.hpp"

namespace m2oe2::eval {

/// Raised when a checkpoint was trained under different normalization stats.
class StatsMismatch : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

void check_stats(const std::string& expected_fingerprint, const data::NormStats& actual);

/// Produces one distribution per batch member. `positions` are the members'
/// indices in the evaluated instance list.
using Forecaster = std::function<std::vector<seq::ForecastDistribution>(
    const data::Batch&, const std::vector<std::size_t>& positions)>;

/// Variational head: Monte Carlo with `samples` draws, seeded per instance
/// position. Gaussian and deterministic heads use their outputs directly.
Forecaster model_forecaster(const Model& model, std::uint64_t seed, std::size_t samples);

/// Repeats the last context value over the horizon.
Forecaster persistence_forecaster(std::size_t horizon, std::size_t load_width);

struct PlotRow {
  std::int64_t origin_time = 0;
  std::int64_t target_time = 0;
  std::size_t step = 0;     // 1..K
  std::size_t channel = 0;
  double truth = 0.0;       // physical units
  double mean = 0.0;
  double std = 0.0;
};

struct EvalReport {
  std::string model;
  std::size_t instances = 0;
  double mse = 0.0;            // normalized units
  double crps = 0.0;
  double mse_physical = 0.0;
  double crps_physical = 0.0;
  std::vector<double> mse_by_step;   // K entries, normalized
  std::vector<double> crps_by_step;
  std::string config_fingerprint;
  std::string stats_fingerprint;
  std::vector<PlotRow> plot;
};

/// Scores `forecaster` on `instances`. MSE is the mean of per-instance MSEs.
EvalReport evaluate(const std::string& name, const Forecaster& forecaster,
                    const data::NormalizedDataset& ds,
                    const std::vector<data::WindowInstance>& instances, std::size_t horizon,
                    std::size_t batch_size = 16);

std::string report_csv(const std::vector<EvalReport>& reports);
std::string plot_csv(const EvalReport& report);

}  // namespace m2oe2::eval
