#include "m2oe2/cli/cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "m2oe2/cli/run_config.hpp"
#include "m2oe2/data/synthetic.hpp"
#include "m2oe2/eval/evaluate.hpp"
#include "m2oe2/moe/metamoe.hpp"
#include "m2oe2/train/checkpoint.hpp"
#include "m2oe2/train/trainer.hpp"

namespace m2oe2::cli {

namespace {

constexpr const char* kBaseName = "base-gru";
constexpr const char* kModelName = "m2oe2";

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
  bool baselines = false;
  std::optional<std::size_t> samples;
  std::string origin, from, to;
  std::size_t weeks = 8;
};

struct Prepared {
  RunConfig rc;
  data::NormalizedDataset ds;
  std::vector<data::WindowInstance> windows;
};

void write_file(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    f << text;
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

RunConfig load_config(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config is required");
  RunConfig rc = RunConfig::read(o.config);
  if (o.seed) rc.train.seed = *o.seed;
  if (!o.out.empty()) rc.out = o.out;
  return rc;
}

Prepared prepare(const Options& o) {
  Prepared p{load_config(o), {}, {}};
  data::TimeSeriesDataset raw = data::load_csv(p.rc.csv, data::Schema::read(p.rc.schema));
  p.rc.bind(raw);
  p.windows = data::make_windows(raw, p.rc.model.horizon, p.rc.week_length(raw), p.rc.origin_stride);
  p.ds = data::normalize(std::move(raw));
  fs::create_directories(p.rc.out);
  return p;
}

fs::path checkpoint_path(const Options& o, const RunConfig& rc) {
  return o.checkpoint.empty() ? rc.out / "best.ckpt" : fs::path(o.checkpoint);
}

std::vector<std::string> expert_names(const data::TimeSeriesDataset& ds) {
  std::vector<std::string> names;
  for (const auto& c : ds.external_columns) names.push_back(c.column);
  return names;
}

// Loads a checkpoint and refuses it unless it matches the run's model config
// and normalization stats.
train::Checkpoint load_compatible(const fs::path& path, const Prepared& p, bool experts) {
  train::Checkpoint ck = train::load_checkpoint(path);
  ModelConfig expected = p.rc.model;
  expected.experts_enabled = experts;
  if (ck.config.fingerprint() != expected.fingerprint())
    throw ConfigError(path.string() + ": config fingerprint mismatch: checkpoint has " +
                      ck.config.fingerprint() + ", config gives " + expected.fingerprint());
  eval::check_stats(ck.stats.fingerprint(), p.ds.stats);
  return ck;
}

int train_model(const std::string& name, ModelConfig mc, const Prepared& p, std::ostream& out,
                std::ostream& err) {
  const std::string prefix = name == kModelName ? "" : name + ".";
  const fs::path dir = p.rc.out;
  const auto train_set = data::select(p.windows, data::Part::train);
  const auto val_set = data::select(p.windows, data::Part::validation);

  Model model(mc, p.rc.train.seed);
  std::ofstream log(dir / (prefix + "train.log"));
  std::string timing = "epoch,seconds\n";
  train::TrainHooks hooks;
  hooks.log = &log;
  hooks.on_epoch = [&](const train::EpochRecord& rec, const Model& m) {
    timing += std::to_string(rec.epoch) + "," + format_double(rec.seconds) + "\n";
    const std::size_t every = p.rc.train.checkpoint_every;
    if (every && rec.epoch % every == 0)
      train::save_checkpoint(dir / (prefix + "epoch_" + std::to_string(rec.epoch) + ".ckpt"),
                             {mc, m.params(), p.ds.stats, "epoch " + std::to_string(rec.epoch)});
  };
  out << name << ": " << train_set.size() << " train / " << val_set.size()
      << " validation instances, " << p.rc.train.epochs << " epochs\n";
  train::TrainResult r = train::train_loop(model, p.ds, train_set, val_set, p.rc.train, hooks);

  train::save_checkpoint(dir / (prefix + "best.ckpt"),
                         {mc, r.best_params, p.ds.stats, "best epoch " + std::to_string(r.best_epoch)});
  train::save_checkpoint(dir / (prefix + "final.ckpt"),
                         {mc, model.params(), p.ds.stats,
                          "final epoch " + std::to_string(r.history.size())});
  write_file(dir / (prefix + "history.csv"), train::history_csv(r.history));
  write_file(dir / (prefix + "timing.csv"), timing);
  if (r.skipped_steps) out << name << ": " << r.skipped_steps << " steps skipped (see train.log)\n";
  if (r.aborted) {
    err << name << ": " << r.diagnostics << '\n';
    return runtime_failure;
  }
  out << name << ": best validation loss " << format_double(r.best_validation) << " at epoch "
      << r.best_epoch << '\n';
  return ok;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  Prepared p = prepare(o);
  write_file(p.rc.out / "resolved.cfg", p.rc.resolved_text());
  write_file(p.rc.out / "stats.csv", p.ds.stats.to_csv());
  int code = train_model(kModelName, p.rc.model, p, out, err);
  if (code == ok && o.baselines) {
    ModelConfig base = p.rc.model;
    base.experts_enabled = false;
    code = train_model(kBaseName, base, p, out, err);
  }
  if (code == ok) out << "artifacts in " << p.rc.out.string() << '\n';
  return code;
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream&) {
  Prepared p = prepare(o);
  const auto test = data::select(p.windows, data::Part::test);
  if (test.empty()) throw data::DataError("no instances in the test split");
  const fs::path ck_path = checkpoint_path(o, p.rc);
  const std::size_t J = o.samples.value_or(p.rc.model.mc_samples);
  if (J < 2) throw ConfigError("--samples must be at least 2");
  const std::size_t bs = p.rc.train.batch_size;
  const std::size_t K = p.rc.model.horizon;

  std::vector<eval::EvalReport> reports;
  train::Checkpoint main_ck = load_compatible(ck_path, p, p.rc.model.experts_enabled);
  Model main_model = main_ck.model();
  reports.push_back(eval::evaluate(p.rc.model.experts_enabled ? kModelName : kBaseName,
                                   eval::model_forecaster(main_model, p.rc.train.seed, J), p.ds,
                                   test, K, bs));
  reports.back().config_fingerprint = main_ck.config.fingerprint();

  std::optional<Model> base_model;
  if (o.baselines) {
    if (p.rc.model.experts_enabled) {
      const fs::path base_path = ck_path.parent_path() / (std::string(kBaseName) + ".best.ckpt");
      train::Checkpoint base_ck = load_compatible(base_path, p, false);
      base_model.emplace(base_ck.model());
      reports.push_back(eval::evaluate(kBaseName,
                                       eval::model_forecaster(*base_model, p.rc.train.seed, J),
                                       p.ds, test, K, bs));
      reports.back().config_fingerprint = base_ck.config.fingerprint();
    }
    reports.push_back(eval::evaluate("persistence",
                                     eval::persistence_forecaster(K, p.rc.model.load_width), p.ds,
                                     test, K, bs));
  }

  write_file(p.rc.out / "report.csv", eval::report_csv(reports));
  for (const auto& r : reports) {
    write_file(p.rc.out / ("plot_" + r.model + ".csv"), eval::plot_csv(r));
    out << r.model << ": mse " << format_double(r.mse) << " crps " << format_double(r.crps)
        << " over " << r.instances << " instances\n";
  }
  return ok;
}

int cmd_forecast(const Options& o, std::ostream& out, std::ostream&) {
  if (o.origin.empty()) throw ConfigError("--origin is required");
  Prepared p = prepare(o);
  const std::int64_t t = data::parse_timestamp(o.origin);
  const auto& raw = p.ds.raw;
  const std::size_t origin = raw.row_of(t);
  const std::size_t K = p.rc.model.horizon;
  const data::WindowInstance w = data::window_at(raw, origin, K, p.rc.week_length(raw));

  train::Checkpoint ck = load_compatible(checkpoint_path(o, p.rc), p, p.rc.model.experts_enabled);
  Model model = ck.model();
  const std::size_t J = o.samples.value_or(p.rc.model.mc_samples);
  const data::Batch b = data::assemble(p.ds, {w}, {0}, K);
  const auto dist = eval::model_forecaster(model, p.rc.train.seed, J)(b, {0}).front();

  std::string csv = "origin,timestamp,step,channel,mean,std,mean_physical,std_physical\n";
  for (std::size_t h = 0; h < K; ++h)
    for (std::size_t c = 0; c < p.rc.model.load_width; ++c) {
      const auto& st = p.ds.stats.loads[c];
      const double mean = dist.mean(h, c), sd = dist.std(h, c);
      csv += data::format_timestamp(t) + "," + data::format_timestamp(raw.timestamps[origin + h]) +
             "," + std::to_string(h + 1) + "," + raw.load_columns[c].column + "," +
             format_double(mean) + "," + format_double(sd) + "," +
             format_double(p.ds.stats.denormalize_load(mean, c)) + "," +
             format_double(st.constant ? 0.0 : sd * st.std) + "\n";
    }
  const fs::path path = p.rc.out / "forecast.csv";
  write_file(path, csv);
  out << "forecast written to " << path.string() << '\n';
  return ok;
}

int cmd_gates(const Options& o, std::ostream& out, std::ostream&) {
  if (o.from.empty() || o.to.empty()) throw ConfigError("--from and --to are required");
  Prepared p = prepare(o);
  if (!p.rc.model.experts_enabled) throw ConfigError("gates: the configured model has no experts");
  const auto& raw = p.ds.raw;
  const std::int64_t t0 = data::parse_timestamp(o.from), t1 = data::parse_timestamp(o.to);
  if (t1 < t0) throw ConfigError("gates: --to is before --from");
  const std::size_t from = raw.row_of(t0);
  const std::size_t to = t1 > raw.timestamps.back() ? raw.size() : raw.row_of(t1);

  std::vector<moe::GateRecord> rows;
  if (to > from) {
    const data::WindowInstance w = data::window_at(raw, from, 1, p.rc.week_length(raw));
    train::Checkpoint ck = load_compatible(checkpoint_path(o, p.rc), p, true);
    Model model = ck.model();
    const std::size_t M = p.rc.model.num_experts;
    BatchInput in;
    in.batch = 1;
    in.steps = to - w.context_begin;
    in.loads = Tensor({in.steps, p.rc.model.load_width});
    in.externals = Tensor({in.steps, M});
    for (std::size_t s = 0; s < in.steps; ++s) {
      for (std::size_t c = 0; c < p.rc.model.load_width; ++c)
        in.loads(s, c) = p.ds.loads(w.context_begin + s, c);
      for (std::size_t j = 0; j < M; ++j) in.externals(s, j) = p.ds.externals(w.context_begin + s, j);
    }
    std::vector<GateStep> trace;
    Graph g;
    model.forward(g, model.bind(g), in, &trace);
    for (std::size_t s = from - w.context_begin; s < trace.size(); ++s) {
      moe::GateRecord r;
      r.time = data::format_timestamp(raw.timestamps[w.context_begin + s]);
      for (std::size_t j = 0; j < M; ++j) {
        r.logits.push_back(trace[s].logits(0, j));
        r.weights.push_back(trace[s].weights(0, j));
        r.selected.push_back(trace[s].mask(0, j) != 0.0);
      }
      rows.push_back(std::move(r));
    }
  }
  const fs::path path = p.rc.out / "gates.csv";
  write_file(path, moe::gate_trace_csv(expert_names(raw), rows));
  out << rows.size() << " gate rows written to " << path.string() << '\n';
  return ok;
}

int cmd_synth(const Options& o, std::ostream& out, std::ostream&) {
  if (o.out.empty()) throw ConfigError("--out is required");
  data::SyntheticOptions opt;
  opt.weeks = o.weeks;
  opt.seed = o.seed.value_or(0);
  const data::TimeSeriesDataset ds = data::synthetic_regime_series(opt);
  fs::create_directories(o.out);
  write_file(fs::path(o.out) / "synthetic.csv", data::to_csv(ds));
  write_file(fs::path(o.out) / "synthetic.schema", data::schema_of(ds).to_text());
  out << ds.size() << " rows written to " << o.out << '\n';
  return ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive load forecasting with a mixture of hypernetwork experts", "m2oe2"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run config (key = value)")->required();
    sub->add_option("--seed", o.seed, "Override train.seed");
    sub->add_option("--out", o.out, "Override the output directory");
  };
  auto with_checkpoint = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", o.checkpoint, "Checkpoint (default <out>/best.ckpt)");
    sub->add_option("--samples", o.samples, "Monte Carlo draws per forecast");
  };

  CLI::App* train = app.add_subcommand("train", "Train a model and write checkpoints");
  common(train);
  train->add_flag("--baselines", o.baselines, "Also train the base GRU");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on the test split");
  common(evaluate);
  with_checkpoint(evaluate);
  evaluate->add_flag("--baselines", o.baselines, "Add base GRU and persistence rows");

  CLI::App* forecast = app.add_subcommand("forecast", "K-step forecast at one origin");
  common(forecast);
  with_checkpoint(forecast);
  forecast->add_option("--origin", o.origin, "First forecast timestamp")->required();

  CLI::App* gates = app.add_subcommand("gates", "Gate trace over a time range");
  common(gates);
  with_checkpoint(gates);
  gates->add_option("--from", o.from, "First timestamp (inclusive)")->required();
  gates->add_option("--to", o.to, "Last timestamp (exclusive)")->required();

  CLI::App* synth = app.add_subcommand("synth", "Write the synthetic regime-switching dataset");
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->add_option("--seed", o.seed, "Generator seed");
  synth->add_option("--weeks", o.weeks, "Length in weeks")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : invalid_input;
  }

  try {
    if (train->parsed()) return cmd_train(o, out, err);
    if (evaluate->parsed()) return cmd_evaluate(o, out, err);
    if (forecast->parsed()) return cmd_forecast(o, out, err);
    if (gates->parsed()) return cmd_gates(o, out, err);
    if (synth->parsed()) return cmd_synth(o, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return invalid_input;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return runtime_failure;
  }
  return invalid_input;
}

}  // namespace m2oe2::cli
