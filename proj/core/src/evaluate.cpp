#include "m2oe2/eval/evaluate.hpp"

#include <cmath>
#include <optional>

#include "m2oe2/eval/metrics.hpp"
#include "m2oe2/rng.hpp"

namespace m2oe2::eval {

void check_stats(const std::string& expected_fingerprint, const data::NormStats& actual) {
  const std::string got = actual.fingerprint();
  if (got != expected_fingerprint)
    throw StatsMismatch("normalization stats fingerprint mismatch: checkpoint has " +
                        expected_fingerprint + ", dataset gives " + got);
}

Forecaster model_forecaster(const Model& model, std::uint64_t seed, std::size_t samples) {
  return [&model, seed, samples](const data::Batch& b, const std::vector<std::size_t>& positions) {
    const auto& c = model.config();
    Graph g;
    auto p = model.bind(g);
    HeadOutputs out = model.forward(g, p, b.input);
    std::vector<seq::ForecastDistribution> result;
    const std::size_t B = b.input.batch;
    auto row = [](const Tensor& t, std::size_t r) {
      const std::size_t w = t.cols();
      return Tensor({w}, std::vector<double>(t.values().begin() + static_cast<std::ptrdiff_t>(r * w),
                                             t.values().begin() + static_cast<std::ptrdiff_t>((r + 1) * w)));
    };
    for (std::size_t k = 0; k < B; ++k) {
      switch (c.head) {
        case HeadKind::deterministic:
          result.push_back(seq::point_forecast(row(out.point.value(), k), c.load_width));
          break;
        case HeadKind::gaussian:
          result.push_back(seq::gaussian_forecast(row(out.gaussian.mean.value(), k),
                                                  row(out.gaussian.log_var.value(), k),
                                                  c.load_width));
          break;
        case HeadKind::variational:
          result.push_back(seq::mc_forecast(p.dec, row(out.latent.mean.value(), k),
                                            row(out.latent.log_var.value(), k), samples,
                                            split_seed(seed, Stream::eval_noise, positions[k]),
                                            c.load_width));
          break;
      }
    }
    return result;
  };
}

Forecaster persistence_forecaster(std::size_t horizon, std::size_t load_width) {
  return [horizon, load_width](const data::Batch& b, const std::vector<std::size_t>&) {
    const std::size_t B = b.input.batch, T = b.input.steps;
    std::vector<seq::ForecastDistribution> result;
    for (std::size_t k = 0; k < B; ++k) {
      Tensor mean({horizon * load_width});
      for (std::size_t h = 0; h < horizon; ++h)
        for (std::size_t c = 0; c < load_width; ++c)
          mean[h * load_width + c] = b.input.loads((T - 1) * B + k, c);
      result.push_back(seq::point_forecast(mean, load_width));
    }
    return result;
  };
}

EvalReport evaluate(const std::string& name, const Forecaster& forecaster,
                    const data::NormalizedDataset& ds,
                    const std::vector<data::WindowInstance>& instances, std::size_t horizon,
                    std::size_t batch_size) {
  if (instances.empty()) throw data::DataError("no instances to evaluate");
  const std::size_t dx = ds.loads.cols();
  std::vector<std::optional<seq::ForecastDistribution>> dists(instances.size());
  for (const auto& members : data::batch_in_order(instances, batch_size)) {
    data::Batch b = data::assemble(ds, instances, members, horizon);
    auto out = forecaster(b, members);
    if (out.size() != members.size())
      throw std::logic_error("forecaster returned " + std::to_string(out.size()) +
                             " distributions for " + std::to_string(members.size()) + " instances");
    for (std::size_t k = 0; k < members.size(); ++k) dists[members[k]] = std::move(out[k]);
  }

  EvalReport r;
  r.model = name;
  r.instances = instances.size();
  r.stats_fingerprint = ds.stats.fingerprint();
  r.mse_by_step.assign(horizon, 0.0);
  r.crps_by_step.assign(horizon, 0.0);
  double mse_sum = 0.0, crps_sum = 0.0, mse_phys_sum = 0.0, crps_phys_sum = 0.0;
  const double per_instance = static_cast<double>(horizon * dx);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& w = instances[i];
    const auto& d = *dists[i];
    double se = 0.0, cr = 0.0, se_p = 0.0, cr_p = 0.0;
    for (std::size_t h = 0; h < horizon; ++h) {
      for (std::size_t c = 0; c < dx; ++c) {
        const double truth = ds.loads(w.origin + h, c);
        const double mu = d.mean(h, c), sd = d.std(h, c);
        const auto& st = ds.stats.loads[c];
        const double truth_p = ds.raw.loads(w.origin + h, c);
        const double mu_p = ds.stats.denormalize_load(mu, c);
        const double sd_p = st.constant ? 0.0 : sd * st.std;
        const double err = (mu - truth) * (mu - truth);
        const double crps = d.point || !(sd > 0.0) ? crps_point(mu, truth) : crps_gaussian(mu, sd, truth);
        const double crps_p = !(sd_p > 0.0) ? crps_point(mu_p, truth_p) : crps_gaussian(mu_p, sd_p, truth_p);
        se += err;
        cr += crps;
        se_p += (mu_p - truth_p) * (mu_p - truth_p);
        cr_p += crps_p;
        r.mse_by_step[h] += err;
        r.crps_by_step[h] += crps;
        r.plot.push_back({ds.raw.timestamps[w.origin], ds.raw.timestamps[w.origin + h], h + 1, c,
                          truth_p, mu_p, sd_p});
      }
    }
    mse_sum += se / per_instance;
    crps_sum += cr / per_instance;
    mse_phys_sum += se_p / per_instance;
    crps_phys_sum += cr_p / per_instance;
  }
  const double n = static_cast<double>(instances.size());
  r.mse = mse_sum / n;
  r.crps = crps_sum / n;
  r.mse_physical = mse_phys_sum / n;
  r.crps_physical = crps_phys_sum / n;
  for (std::size_t h = 0; h < horizon; ++h) {
    r.mse_by_step[h] /= n * static_cast<double>(dx);
    r.crps_by_step[h] /= n * static_cast<double>(dx);
  }
  return r;
}

std::string report_csv(const std::vector<EvalReport>& reports) {
  std::size_t K = 0;
  for (const auto& r : reports) K = std::max(K, r.mse_by_step.size());
  std::string out = "model,instances,mse,crps,mse_physical,crps_physical";
  for (std::size_t h = 1; h <= K; ++h) out += ",mse_h" + std::to_string(h);
  for (std::size_t h = 1; h <= K; ++h) out += ",crps_h" + std::to_string(h);
  out += ",config_fingerprint,stats_fingerprint\n";
  for (const auto& r : reports) {
    out += r.model + "," + std::to_string(r.instances) + "," + format_double(r.mse) + "," +
           format_double(r.crps) + "," + format_double(r.mse_physical) + "," +
           format_double(r.crps_physical);
    for (std::size_t h = 0; h < K; ++h)
      out += "," + (h < r.mse_by_step.size() ? format_double(r.mse_by_step[h]) : std::string());
    for (std::size_t h = 0; h < K; ++h)
      out += "," + (h < r.crps_by_step.size() ? format_double(r.crps_by_step[h]) : std::string());
    out += "," + r.config_fingerprint + "," + r.stats_fingerprint + "\n";
  }
  return out;
}

std::string plot_csv(const EvalReport& report) {
  std::string out = "origin,timestamp,step,channel,truth,mean,std,lower,upper\n";
  for (const auto& p : report.plot)
    out += data::format_timestamp(p.origin_time) + "," + data::format_timestamp(p.target_time) +
           "," + std::to_string(p.step) + "," + std::to_string(p.channel) + "," +
           format_double(p.truth) + "," + format_double(p.mean) + "," + format_double(p.std) +
           "," + format_double(p.mean - 2.0 * p.std) + "," + format_double(p.mean + 2.0 * p.std) +
           "\n";
  return out;
}

}  // namespace m2oe2::eval
