#include "m2oe2/data/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "m2oe2/rng.hpp"

namespace m2oe2::data {

double regime_load(std::size_t season, std::size_t day_type, double hour) {
  const double amp = 0.4 + 0.4 * static_cast<double>(season) + 0.4 * static_cast<double>(day_type);
  const double phase = 0.5 * std::numbers::pi * static_cast<double>(day_type);
  return amp * std::sin(2.0 * std::numbers::pi * hour / 24.0 + phase);
}

TimeSeriesDataset synthetic_regime_series(const SyntheticOptions& opt) {
  const std::size_t N = opt.weeks * 168;
  if (N == 0 || opt.season_hours == 0)
    throw std::invalid_argument("synthetic_regime_series: weeks and season_hours must be positive");
  Rng rng = make_rng(opt.seed, Stream::synthetic);
  std::uniform_int_distribution<int> season_draw(0, 3), day_draw(0, 1);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t span = N + opt.lead;
  std::vector<std::size_t> seasons((span + opt.season_hours - 1) / opt.season_hours), days((span + 23) / 24);
  for (auto& s : seasons) s = static_cast<std::size_t>(season_draw(rng));
  for (auto& d : days) d = static_cast<std::size_t>(day_draw(rng));
  auto season = [&](std::size_t i) { return seasons[i / opt.season_hours]; };
  auto day = [&](std::size_t i) { return days[i / 24]; };

  TimeSeriesDataset ds;
  ds.period = 3600;
  ds.load_columns = {{"load", Role::load, 0}};
  ds.external_columns = {{"temperature", Role::continuous, 0},
                         {"day_type", Role::categorical, 2},
                         {"season", Role::categorical, 4}};
  ds.timestamps.resize(N);
  ds.loads = Tensor({N, 1});
  ds.externals = Tensor({N, 3});
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t ahead = i + opt.lead;
    ds.timestamps[i] = opt.start + static_cast<std::int64_t>(i) * 3600;
    ds.loads(i, 0) = regime_load(season(i), day(i), static_cast<double>(i % 24)) + opt.noise * normal(rng);
    ds.externals(i, 0) = 5.0 * static_cast<double>(season(ahead)) + 2.0 * normal(rng);
    ds.externals(i, 1) = static_cast<double>(day(ahead));
    ds.externals(i, 2) = static_cast<double>(season(ahead));
  }
  ds.fill_counts.assign(4, 0);
  ds.split = chronological_split(N);
  return ds;
}

}  // namespace m2oe2::data
