#include <benchmark/benchmark.h>

#include <random>

#include "m2oe2/diff/ops.hpp"
#include "m2oe2/eval/metrics.hpp"
#include "m2oe2/model.hpp"
#include "m2oe2/seq/seqmodel.hpp"
#include "m2oe2/train/losses.hpp"

using namespace m2oe2;

namespace {

Tensor normal_tensor(diff::Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = n(rng);
  return t;
}

ModelConfig reference(bool experts) {
  ModelConfig c;
  c.experts_enabled = experts;
  return c;
}

BatchInput batch_input(std::size_t batch, std::size_t steps, std::size_t externals) {
  BatchInput in;
  in.batch = batch;
  in.steps = steps;
  in.loads = normal_tensor({batch * steps, 1}, 1);
  in.externals = normal_tensor({batch * steps, externals}, 2);
  return in;
}

void BM_GruStep(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const Model model(reference(false), 0);
  const Tensor x = normal_tensor({batch, model.config().input_width}, 3);
  for (auto _ : state) {
    Graph g;
    auto p = model.bind(g);
    std::vector<Var> h(p.gru.layers.size(), g.constant(Tensor({batch, p.gru.hidden_width})));
    benchmark::DoNotOptimize(seq::gru_step(p.gru, g.constant(x), h).back().value()[0]);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_GruStep)->Arg(1)->Arg(16);

void BM_ExpertForward(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const Model model(reference(true), 0);
  const Tensor w = normal_tensor({rows, 1}, 4);
  for (auto _ : state) {
    Graph g;
    auto p = model.bind(g);
    benchmark::DoNotOptimize(moe::expert_forward(p.experts[0], g.constant(w), 1e-5).value()[0]);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}
BENCHMARK(BM_ExpertForward)->Arg(1)->Arg(16);

// One training step's worth of work: forward over a week-long context plus
// reverse-mode gradients of the negative ELBO.
void BM_ForwardBackward(benchmark::State& state) {
  const bool experts = state.range(0) != 0;
  const auto steps = static_cast<std::size_t>(state.range(1));
  const Model model(reference(experts), 0);
  const ModelConfig& c = model.config();
  const BatchInput in = batch_input(16, steps, c.num_experts);
  const Tensor targets = normal_tensor({16, c.horizon}, 5);
  const Tensor noise = normal_tensor({16, c.latent_width}, 6);
  for (auto _ : state) {
    Graph g;
    auto p = model.bind(g);
    auto out = model.forward(g, p, in);
    Var loss = train::elbo_loss(model, p, out, targets, 0.01, noise).loss;
    benchmark::DoNotOptimize(g.backward(loss, model.params()).global_norm());
  }
  state.SetLabel(experts ? "m2oe2" : "base-gru");
}
BENCHMARK(BM_ForwardBackward)->Args({1, 24})->Args({0, 24})->Args({1, 168})->Args({0, 168})
    ->Unit(benchmark::kMillisecond);

void BM_CrpsGaussian(benchmark::State& state) {
  double x = -2.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval::crps_gaussian(0.3, 1.2, x));
    x = x > 2.0 ? -2.0 : x + 1e-3;
  }
}
BENCHMARK(BM_CrpsGaussian);

void BM_CrpsEmpirical(benchmark::State& state) {
  const auto J = static_cast<std::size_t>(state.range(0));
  const Tensor draws = normal_tensor({J}, 7);
  const std::vector<double> samples(draws.values().begin(), draws.values().end());
  for (auto _ : state) {
    auto cdf = eval::empirical_cdf(samples);
    benchmark::DoNotOptimize(eval::crps_numeric(cdf, 0.1, -6.0, 6.0, 1e-2));
  }
}
BENCHMARK(BM_CrpsEmpirical)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
