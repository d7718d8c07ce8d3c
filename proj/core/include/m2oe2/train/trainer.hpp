#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "m2oe2/data/dataset.hpp"
#include "m2oe2/model.hpp"

namespace m2oe2::train {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double seconds = 0.0;   // wall time; kept out of the history CSV
};

struct TrainResult {
  std::vector<EpochRecord> history;
  ParamSet best_params;        // lowest validation loss seen (initial params if no epochs ran)
  std::size_t best_epoch = 0;  // 0 = initial parameters
  double best_validation = 0.0;
  std::size_t skipped_steps = 0;
  bool aborted = false;
  std::string diagnostics;     // set when aborted
};

struct TrainHooks {
  std::ostream* log = nullptr;  // progress and skipped-step events
  /// Called after every epoch with the current model.
  std::function<void(const EpochRecord&, const Model&)> on_epoch;
};

/// Mean loss over `instances`, batched in order, with noise fixed by `seed`
/// under the validation stream.
double dataset_loss(const Model& model, const data::NormalizedDataset& ds,
                    const std::vector<data::WindowInstance>& instances,
                    const TrainConfig& cfg);

/// Mini-batch Adam over the train instances; validation loss after each
/// epoch. On a non-finite validation loss the run stops, the model is reset
/// to the last good parameters and `aborted` is set.
TrainResult train_loop(Model& model, const data::NormalizedDataset& ds,
                       const std::vector<data::WindowInstance>& train,
                       const std::vector<data::WindowInstance>& validation,
                       const TrainConfig& cfg, const TrainHooks& hooks = {});

/// epoch,train_loss,val_loss with shortest round-trip values.
std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace m2oe2::train
