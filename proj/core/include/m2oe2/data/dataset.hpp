#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "m2oe2/config.hpp"
#include "m2oe2/diff/tensor.hpp"
#include "m2oe2/model.hpp"

namespace m2oe2::data {

using diff::Tensor;

/// Malformed or unusable input data. Maps to the same exit code as a bad
/// config.
class DataError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

enum class Role { timestamp, load, continuous, categorical };

struct ColumnSpec {
  std::string column;
  Role role = Role::continuous;
  std::size_t levels = 0;  // categorical only
};

/// Column -> role map. Text form, one entry per line:
///
///   timestamp   = timestamp
///   demand_mw   = load
///   temperature = continuous
///   day_type    = categorical:2
///
/// Externals keep the order they appear in; that order is the expert order.
struct Schema {
  std::vector<ColumnSpec> columns;

  static Schema parse(std::string_view text);
  static Schema read(const std::filesystem::path& path);
  std::string to_text() const;

  const ColumnSpec& timestamp() const;
  std::vector<ColumnSpec> loads() const;
  std::vector<ColumnSpec> externals() const;
};

/// Seconds since 1970-01-01 UTC. Accepts "YYYY-MM-DD HH:MM[:SS]", the same
/// with a 'T' separator, or a plain integer.
std::int64_t parse_timestamp(std::string_view text);
std::string format_timestamp(std::int64_t t);

/// Row ranges of the chronological 70/10/20 split.
struct Split {
  std::size_t train_end = 0;
  std::size_t validation_end = 0;
  std::size_t size = 0;
};

enum class Part { train, validation, test };
std::string_view to_string(Part p);
Split chronological_split(std::size_t n);

struct TimeSeriesDataset {
  std::vector<std::int64_t> timestamps;  // strictly increasing, fixed period
  std::int64_t period = 0;               // seconds
  Tensor loads;                          // N x d_x, physical units
  Tensor externals;                      // N x M, raw values
  std::vector<ColumnSpec> load_columns;
  std::vector<ColumnSpec> external_columns;
  std::vector<std::size_t> fill_counts;  // loads then externals
  Split split;

  std::size_t size() const noexcept { return timestamps.size(); }
  /// Steps per week; the period must divide 604800 s.
  std::size_t week_len() const;
  /// Row holding `t`, or throws DataError.
  std::size_t row_of(std::int64_t t) const;
};

/// Reads a header CSV, sorts by timestamp, inserts missing periods and fills
/// gaps (linear for continuous channels, previous-value hold for categorical).
TimeSeriesDataset load_csv(const std::filesystem::path& path, const Schema& schema);
TimeSeriesDataset parse_csv(std::string_view text, const Schema& schema,
                            std::string_view source = "<memory>");
/// Inverse of parse_csv for a gap-free dataset: timestamp, loads, externals.
std::string to_csv(const TimeSeriesDataset& ds);
Schema schema_of(const TimeSeriesDataset& ds);

struct ChannelStats {
  std::string name;
  Role role = Role::continuous;
  double mean = 0.0;
  double std = 1.0;
  std::size_t levels = 0;
  bool constant = false;

  bool operator==(const ChannelStats&) const = default;
};

/// Train-split normalization statistics, loads first then externals.
struct NormStats {
  std::vector<ChannelStats> loads;
  std::vector<ChannelStats> externals;

  std::string to_csv() const;
  static NormStats from_csv(std::string_view text);
  /// Hash of the CSV rendering; a checkpoint carries the fingerprint of the
  /// stats it was trained with.
  std::string fingerprint() const;

  double denormalize_load(double v, std::size_t channel) const;
  bool operator==(const NormStats&) const = default;
};

struct NormalizedDataset {
  TimeSeriesDataset raw;
  Tensor loads;      // N x d_x
  Tensor externals;  // N x M
  NormStats stats;
};

NormStats compute_stats(const TimeSeriesDataset& ds);
NormalizedDataset normalize(TimeSeriesDataset ds);
/// Applies previously computed stats (evaluation against a checkpoint).
NormalizedDataset normalize(TimeSeriesDataset ds, const NormStats& stats);
Tensor denormalize_loads(const Tensor& normalized, const NormStats& stats);

/// One forecast origin. The target is rows [origin, origin + K); the context
/// is rows [context_begin, origin): the whole previous week plus the prefix
/// of the current week.
struct WindowInstance {
  std::size_t origin = 0;
  std::size_t context_begin = 0;
  Part part = Part::train;

  std::size_t context_length() const noexcept { return origin - context_begin; }
};

/// `stride` keeps every stride-th origin counted from the first valid one.
std::vector<WindowInstance> make_windows(const TimeSeriesDataset& ds, std::size_t horizon,
                                         std::size_t week_len, std::size_t stride = 1);
std::vector<WindowInstance> select(const std::vector<WindowInstance>& all, Part part);
/// Window for a single origin; the error names the earliest valid origin.
WindowInstance window_at(const TimeSeriesDataset& ds, std::size_t origin, std::size_t horizon,
                         std::size_t week_len);

/// Shuffles with the seed (and epoch), then groups equal context lengths into
/// batches of at most batch_size. Returns indices into `instances`.
std::vector<std::vector<std::size_t>> batch(const std::vector<WindowInstance>& instances,
                                            std::size_t batch_size, std::uint64_t seed,
                                            std::uint64_t epoch = 0);
/// Same grouping without shuffling (evaluation order).
std::vector<std::vector<std::size_t>> batch_in_order(const std::vector<WindowInstance>& instances,
                                                     std::size_t batch_size);

struct Batch {
  BatchInput input;
  Tensor targets;  // batch x K*d_x, normalized
  std::vector<std::size_t> members;
};

/// Builds the time-major model input for instances of one context length.
Batch assemble(const NormalizedDataset& ds, const std::vector<WindowInstance>& instances,
               const std::vector<std::size_t>& members, std::size_t horizon);

}  // namespace m2oe2::data
