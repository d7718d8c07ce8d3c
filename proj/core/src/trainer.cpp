#include "m2oe2/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "m2oe2/rng.hpp"
#include "m2oe2/train/adam.hpp"
#include "m2oe2/train/losses.hpp"

namespace m2oe2::train {

namespace {

Tensor normal_noise(Rng& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor t({rows, cols});
  for (double& v : t.values()) v = normal(rng);
  return t;
}

}  // namespace

double dataset_loss(const Model& model, const data::NormalizedDataset& ds,
                    const std::vector<data::WindowInstance>& instances, const TrainConfig& cfg) {
  if (instances.empty()) throw data::DataError("no instances to score");
  const auto& mc = model.config();
  double total = 0.0;
  std::size_t count = 0, index = 0;
  for (const auto& members : data::batch_in_order(instances, cfg.batch_size)) {
    data::Batch b = data::assemble(ds, instances, members, mc.horizon);
    Rng rng = make_rng(cfg.seed, Stream::validation_noise, index++);
    Tensor noise = normal_noise(rng, members.size(), mc.latent_width);
    Graph g;
    auto p = model.bind(g);
    auto out = model.forward(g, p, b.input);
    const double loss = head_loss(model, p, out, b.targets, cfg.kl_weight, noise).value().item();
    total += loss * static_cast<double>(members.size());
    count += members.size();
  }
  return total / static_cast<double>(count);
}

TrainResult train_loop(Model& model, const data::NormalizedDataset& ds,
                       const std::vector<data::WindowInstance>& train,
                       const std::vector<data::WindowInstance>& validation,
                       const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  TrainResult result;
  result.best_params = model.params();
  if (cfg.epochs == 0) return result;
  if (train.empty()) throw data::DataError("no training instances");
  if (validation.empty()) throw data::DataError("no validation instances");

  const auto& mc = model.config();
  AdamState adam(model.params());
  std::uint64_t global_step = 0;
  result.best_validation = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& members : data::batch(train, cfg.batch_size, cfg.seed, epoch)) {
      data::Batch b = data::assemble(ds, train, members, mc.horizon);
      Rng rng = make_rng(cfg.seed, Stream::train_noise, global_step++);
      Tensor noise = normal_noise(rng, members.size(), mc.latent_width);
      Graph g;
      auto p = model.bind(g);
      auto out = model.forward(g, p, b.input);
      Var loss = head_loss(model, p, out, b.targets, cfg.kl_weight, noise);
      Gradients grads = g.backward(loss, model.params());
      clip_global_norm(grads, cfg.clip_norm);
      StepOutcome step = adam_step(model.params(), grads, adam, cfg.learning_rate);
      if (!step.applied) {
        ++result.skipped_steps;
        if (hooks.log) *hooks.log << "epoch " << epoch << ": " << step.reason << '\n';
      }
      total += loss.value().item() * static_cast<double>(members.size());
      count += members.size();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(count);
    rec.validation_loss = dataset_loss(model, ds, validation, cfg);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (!std::isfinite(rec.validation_loss)) {
      result.aborted = true;
      result.diagnostics = "validation loss became " + format_double(rec.validation_loss) +
                           " at epoch " + std::to_string(epoch) + " (train loss " +
                           format_double(rec.train_loss) + "); restored parameters from epoch " +
                           std::to_string(result.best_epoch);
      result.history.push_back(rec);
      model.params() = result.best_params;
      if (hooks.log) *hooks.log << result.diagnostics << '\n';
      return result;
    }
    result.history.push_back(rec);
    if (rec.validation_loss < result.best_validation) {
      result.best_validation = rec.validation_loss;
      result.best_epoch = epoch;
      result.best_params = model.params();
    }
    if (hooks.log)
      *hooks.log << "epoch " << epoch << " train " << rec.train_loss << " val "
                 << rec.validation_loss << " (" << rec.seconds << " s)\n";
    if (hooks.on_epoch) hooks.on_epoch(rec, model);
  }
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_loss\n";
  for (const auto& r : history)
    out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," +
           format_double(r.validation_loss) + "\n";
  return out;
}

}  // namespace m2oe2::train
