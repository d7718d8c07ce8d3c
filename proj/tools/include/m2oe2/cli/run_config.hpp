#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include "m2oe2/config.hpp"
#include "m2oe2/data/dataset.hpp"

namespace m2oe2::cli {

namespace fs = std::filesystem;

/// Flat key=value run description:
///
///   data.csv = synthetic.csv          # relative to the config file
///   data.schema = synthetic.schema
///   data.origin_stride = 4
///   model.hidden_width = 16
///   train.epochs = 100
///   out = runs/synthetic
///
/// Model widths that follow from the data (load_width, num_experts,
/// external_width) are filled in by bind(); setting them to anything else is
/// an error.
struct RunConfig {
  fs::path source;  // config file, for messages
  fs::path csv;
  fs::path schema;
  fs::path out = "out";
  std::size_t week_len = 0;  // 0 = one week at the dataset period
  std::size_t origin_stride = 1;
  ModelConfig model;
  TrainConfig train;
  std::set<std::string> explicit_model_keys;

  /// Relative paths resolve against `base_dir`. Referenced input files must
  /// exist.
  static RunConfig parse(std::string_view text, const fs::path& base_dir,
                         const std::string& source = "<config>");
  static RunConfig read(const fs::path& path);

  /// Fills data-derived model widths and validates the result.
  void bind(const data::TimeSeriesDataset& ds);
  std::size_t week_length(const data::TimeSeriesDataset& ds) const;

  /// Every setting, one key per line, in parse() syntax with absolute paths.
  std::string resolved_text() const;
};

}  // namespace m2oe2::cli
