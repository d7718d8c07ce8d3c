#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "m2oe2/data/dataset.hpp"
#include "m2oe2/model.hpp"

namespace m2oe2::train {

/// Model config, parameters and the normalization stats the model was
/// trained with. Text container; values are written in shortest round-trip
/// form so save/load is bit-exact.
struct Checkpoint {
  ModelConfig config;
  ParamSet params;
  data::NormStats stats;
  std::string label;  // free-form, e.g. "best epoch 12"

  Model model() const { return Model(config, params); }
};

std::string to_text(const Checkpoint& ckpt);
Checkpoint checkpoint_from_text(std::string_view text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace m2oe2::train
