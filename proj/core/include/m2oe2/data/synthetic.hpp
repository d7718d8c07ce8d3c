#pragma once

#include <cstdint>

#include "m2oe2/data/dataset.hpp"

namespace m2oe2::data {

/// Regime-switching hourly series. The load is a daily sinusoid whose
/// amplitude depends on a season label (4 levels, redrawn every
/// `season_hours`) and a day-type label (2 levels, redrawn each day), and
/// whose phase depends on the day type. A temperature channel tracks the
/// season.
///
/// The external channels are published `lead` steps ahead of the load they
/// describe, like a calendar known in advance: row t carries the labels in
/// force at row t + lead.
struct SyntheticOptions {
  std::size_t weeks = 8;
  std::size_t season_hours = 3;
  std::size_t lead = 3;
  double noise = 0.05;
  std::uint64_t seed = 0;
  std::int64_t start = 1609718400;  // 2021-01-04 00:00, a Monday
};

TimeSeriesDataset synthetic_regime_series(const SyntheticOptions& opt);

/// Noise-free load for a regime at hour-of-day `hour`.
double regime_load(std::size_t season, std::size_t day_type, double hour);

}  // namespace m2oe2::data
