#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "m2oe2/diff/ops.hpp"
#include "m2oe2/model.hpp"
#include "m2oe2/moe/metamoe.hpp"
#include "support.hpp"

using namespace m2oe2;
using namespace m2oe2::diff;
using namespace m2oe2::moe;
using testing::random_tensor;

namespace {

Expert random_expert(Graph& g, std::size_t dw, std::size_t hidden, std::size_t P, std::mt19937_64& rng) {
  return {g.constant(random_tensor({dw, hidden}, rng, -1, 1)), g.constant(random_tensor({hidden}, rng, -1, 1)),
          g.constant(random_tensor({hidden, P}, rng, -1, 1)),  g.constant(random_tensor({P}, rng, -1, 1)),
          g.constant(random_tensor({P}, rng, 0.5, 1.5)),       g.constant(random_tensor({P}, rng, -1, 1))};
}

ModelConfig small_config() {
  ModelConfig c;
  c.input_width = 6;
  c.hidden_width = 5;
  c.latent_width = 3;
  c.layers = 2;
  c.expert_hidden = 4;
  c.mc_samples = 10;
  return c;
}

BatchInput random_batch(const ModelConfig& c, std::size_t B, std::size_t T, std::mt19937_64& rng) {
  BatchInput in;
  in.batch = B;
  in.steps = T;
  in.loads = random_tensor({T * B, c.load_width}, rng, -2, 2);
  in.externals = random_tensor({T * B, c.num_experts * c.external_width}, rng, -1, 1);
  return in;
}

}  // namespace

TEST_CASE("layer_norm examples") {
  Graph g;
  Tensor out = layer_norm(g.constant(Tensor::from_rows({{1, 2, 3}})), g.constant(Tensor({3}, 1.0)),
                          g.constant(Tensor({3}, 0.0)), 0.0)
                   .value();
  CHECK(out[0] == doctest::Approx(-std::sqrt(1.5)).epsilon(1e-14));
  CHECK(out[1] == 0.0);
  CHECK(out[2] == doctest::Approx(std::sqrt(1.5)).epsilon(1e-14));

  Tensor bias = Tensor::vector({0.3, -0.1, 2.0, 0.0});
  Tensor flat = layer_norm(g.constant(Tensor({1, 4}, 7.25)), g.constant(Tensor({4}, 3.0)),
                           g.constant(bias), 1e-5)
                    .value();
  for (std::size_t k = 0; k < 4; ++k) CHECK(flat[k] == bias[k]);

  std::mt19937_64 rng(1);
  Tensor rows = layer_norm(g.constant(random_tensor({5, 9}, rng)), g.constant(Tensor({9}, 1.0)),
                           g.constant(Tensor({9}, 0.0)), 1e-5)
                    .value();
  for (std::size_t r = 0; r < 5; ++r) {
    double m = 0.0;
    for (std::size_t k = 0; k < 9; ++k) m += rows(r, k);
    CHECK(std::abs(m / 9.0) < 1e-10);
  }
}

TEST_CASE("expert_forward") {
  std::mt19937_64 rng(2);
  Graph g;
  Expert e = random_expert(g, 1, 40, 40, rng);

  SUBCASE("width d_x * d_x'") {
    CHECK(expert_forward(e, g.constant(Tensor({3, 1}, 0.2)), 1e-5).shape() == Shape{3, 40});
  }
  SUBCASE("zero gain gives the bias for any input") {
    e.ln_gain = g.constant(Tensor({40}, 0.0));
    Tensor a = expert_forward(e, g.constant(Tensor({1, 1}, -3.0)), 1e-5).value();
    Tensor b = expert_forward(e, g.constant(Tensor({1, 1}, 5.0)), 1e-5).value();
    CHECK(a == b);
    for (std::size_t k = 0; k < 40; ++k) CHECK(a[k] == e.ln_bias.value()[k]);
  }
  SUBCASE("constant pre-norm output collapses to the bias") {
    e.w2 = g.constant(Tensor({40, 40}, 0.0));
    e.b2 = g.constant(Tensor({40}, 1.7));
    Tensor a = expert_forward(e, g.constant(Tensor({1, 1}, 0.9)), 1e-5).value();
    for (std::size_t k = 0; k < 40; ++k) CHECK(std::abs(a[k] - e.ln_bias.value()[k]) < 1e-9);
  }
  SUBCASE("unit gain and zero bias give zero mean and unit variance") {
    e.ln_gain = g.constant(Tensor({40}, 1.0));
    e.ln_bias = g.constant(Tensor({40}, 0.0));
    Tensor a = expert_forward(e, g.constant(Tensor({1, 1}, 0.4)), 0.0).value();
    double m = 0.0, v = 0.0;
    for (double x : a.values()) m += x;
    m /= 40.0;
    for (double x : a.values()) v += (x - m) * (x - m);
    CHECK(std::abs(m) < 1e-10);
    CHECK(std::abs(v / 40.0 - 1.0) < 1e-10);
  }
  SUBCASE("non-finite input is rejected") {
    CHECK_THROWS_AS(expert_forward(e, g.constant(Tensor({1, 1}, std::numeric_limits<double>::quiet_NaN())), 1e-5),
                    std::invalid_argument);
    CHECK_THROWS_AS(expert_forward(e, g.constant(Tensor({1, 1}, HUGE_VAL)), 1e-5), std::invalid_argument);
  }
}

TEST_CASE("gate") {
  Graph g;
  SUBCASE("hand softmax over the retained logits") {
    // identity map from h to logits
    GateParams p{g.constant(Tensor::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}})),
                 g.constant(Tensor({3}, 0.0)), 2};
    GateOutput out = gate(p, g.constant(Tensor::from_rows({{2.0, 1.0, 0.5}})));
    const double e2 = std::exp(2.0), e1 = std::exp(1.0);
    CHECK(out.weights.value()[0] == doctest::Approx(e2 / (e2 + e1)).epsilon(1e-14));
    CHECK(out.weights.value()[1] == doctest::Approx(e1 / (e2 + e1)).epsilon(1e-14));
    CHECK(out.weights.value()[2] == 0.0);
    CHECK(out.weights.value()[0] == doctest::Approx(0.7311).epsilon(1e-4));
    CHECK(out.mask == Tensor::from_rows({{1, 1, 0}}));
  }
  SUBCASE("m = M with equal logits is uniform") {
    GateParams p{g.constant(Tensor({2, 4}, 0.0)), g.constant(Tensor({4}, 0.3)), 4};
    Tensor w = gate(p, g.constant(Tensor({1, 2}, 1.0))).weights.value();
    for (double v : w.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("ties go to the lower index") {
    CHECK(top_m_mask(Tensor::from_rows({{1.0, 3.0, 3.0, 3.0}}), 2) == Tensor::from_rows({{0, 1, 1, 0}}));
    CHECK(top_m_mask(Tensor::from_rows({{0.0, 0.0, 0.0}}), 1) == Tensor::from_rows({{1, 0, 0}}));
  }
  SUBCASE("m outside [1, M] is rejected") {
    CHECK_THROWS_AS(top_m_mask(Tensor({1, 3}), 0), std::invalid_argument);
    CHECK_THROWS_AS(top_m_mask(Tensor({1, 3}), 4), std::invalid_argument);
  }
  SUBCASE("gradient reaches only the retained logits") {
    std::mt19937_64 rng(3);
    Tensor h = random_tensor({1, 3}, rng);
    Var hv = g.input(Tensor::from_rows({{0.9, -0.2, 0.4}}).set_requires_grad(true));
    GateParams p{g.constant(Tensor::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}})), g.constant(Tensor({3}, 0.0)), 2};
    GateOutput out = gate(p, hv);
    g.backward(sum(out.weights * g.constant(h)));
    CHECK(g.grad(hv)[1] == 0.0);
    CHECK(g.grad(hv)[0] != 0.0);
  }
}

TEST_CASE("compose_theta") {
  Graph g;
  std::mt19937_64 rng(4);
  Tensor t0 = random_tensor({1, 6}, rng);
  std::vector<Tensor> e;
  for (int j = 0; j < 3; ++j) e.push_back(random_tensor({1, 6}, rng));
  auto experts = [&](const std::vector<Tensor>& v) {
    std::vector<Var> out;
    for (const auto& t : v) out.push_back(g.constant(t));
    return out;
  };

  Tensor zero_theta = compose_theta(g.constant(Tensor::from_rows({{0.6, 0.4, 0.0}})),
                                    experts({Tensor({1, 6}), Tensor({1, 6}), Tensor({1, 6})}), g.constant(t0))
                          .value();
  CHECK(zero_theta == t0);

  Tensor one_hot = compose_theta(g.constant(Tensor::from_rows({{0, 1, 0}})), experts(e), g.constant(t0)).value();
  for (std::size_t k = 0; k < 6; ++k) CHECK(one_hot[k] == e[1][k] + t0[k]);

  Tensor half = compose_theta(g.constant(Tensor::from_rows({{0.5, 0.5, 0}})), experts(e), g.constant(t0)).value();
  for (std::size_t k = 0; k < 6; ++k)
    CHECK(half[k] == doctest::Approx(0.5 * e[0][k] + 0.5 * e[1][k] + t0[k]).epsilon(1e-15));

  CHECK_THROWS_AS(compose_theta(g.constant(Tensor::from_rows({{0.5, 0.5}})), experts(e), g.constant(t0)),
                  ShapeError);
}

TEST_CASE("modulate_input") {
  Graph g;
  std::mt19937_64 rng(5);
  Tensor theta = random_tensor({1, 40}, rng);
  Tensor zero = modulate_input(g.constant(theta), g.constant(Tensor({1, 1}, 0.0)), 1, 40).value();
  CHECK(zero == Tensor({1, 40}, 0.0));

  Tensor out = modulate_input(g.constant(theta), g.constant(Tensor({1, 1}, -1.5)), 1, 40).value();
  CHECK(out.shape() == Shape{1, 40});
  for (std::size_t k = 0; k < 40; ++k) CHECK(out[k] == -1.5 * theta[k]);

  // d_x = 2: x' = x^T theta with theta read as 2 x 3
  Tensor t2 = Tensor::from_rows({{1, 2, 3, 4, 5, 6}});
  Tensor x2 = modulate_input(g.constant(t2), g.constant(Tensor::from_rows({{1.0, -1.0}})), 2, 3).value();
  CHECK(x2 == Tensor::from_rows({{-3, -3, -3}}));

  CHECK_THROWS_AS(modulate_input(g.constant(theta), g.constant(Tensor({1, 2})), 1, 40), ShapeError);
  CHECK_THROWS_AS(modulate_input(g.constant(theta), g.constant(Tensor({1, 1})), 1, 30), ShapeError);
}

TEST_CASE("model parameter layout") {
  ModelConfig c = small_config();
  Model m(c, 1);
  auto expected = expected_parameters(c);
  CHECK(m.params().size() == expected.size());
  for (const auto& [name, shape] : expected) CHECK(m.params().value(name).shape() == shape);
  CHECK(m.params().value("theta0").shape() == Shape{1, 6});
  CHECK(m.params()[m.params().index_of("gate.w")].group == ParamGroup::gate);
  CHECK(m.params()[m.params().index_of("expert.2.ln_gain")].group == ParamGroup::experts);

  const double theta_bound = 1.0 / std::sqrt(6.0);
  for (double v : m.params().value("theta0").values()) CHECK(std::abs(v) <= theta_bound);
  for (double v : m.params().value("expert.0.w2").values()) CHECK(std::abs(v) <= 0.1 * theta_bound);

  Model same(c, 1), other(c, 2);
  CHECK(same.params().value("gru.1.w_h") == m.params().value("gru.1.w_h"));
  CHECK(!(other.params().value("gru.1.w_h") == m.params().value("gru.1.w_h")));

  ParamSet missing;
  CHECK_THROWS_AS(Model(c, missing), ConfigError);
  ModelConfig base = c;
  base.experts_enabled = false;
  CHECK(m.base_counterpart().params().size() == expected_parameters(base).size());
}

TEST_CASE("silenced experts reproduce the base model") {
  std::mt19937_64 rng(6);
  for (HeadKind head : {HeadKind::deterministic, HeadKind::gaussian, HeadKind::variational}) {
    ModelConfig c = small_config();
    c.head = head;
    Model m(c, 3);
    m.silence_experts();
    Model base = m.base_counterpart();
    BatchInput in = random_batch(c, 3, 7, rng);
    Graph g1, g2;
    auto p1 = m.bind(g1);
    auto p2 = base.bind(g2);
    HeadOutputs a = m.forward(g1, p1, in);
    HeadOutputs b = base.forward(g2, p2, in);
    switch (head) {
      case HeadKind::deterministic: CHECK(a.point.value() == b.point.value()); break;
      case HeadKind::gaussian:
        CHECK(a.gaussian.mean.value() == b.gaussian.mean.value());
        CHECK(a.gaussian.log_var.value() == b.gaussian.log_var.value());
        break;
      case HeadKind::variational:
        CHECK(a.latent.mean.value() == b.latent.mean.value());
        CHECK(a.latent.log_var.value() == b.latent.log_var.value());
        break;
    }
  }
}

TEST_CASE("an external input reaches theta only through its own expert") {
  std::mt19937_64 rng(7);
  Graph g;
  std::vector<Expert> experts;
  for (int j = 0; j < 3; ++j) experts.push_back(random_expert(g, 1, 4, 6, rng));
  Tensor gates = Tensor::from_rows({{0.7, 0.0, 0.3}});
  Tensor theta0 = random_tensor({1, 6}, rng);
  auto theta_for = [&](const Tensor& w) {
    std::vector<Var> outs;
    for (int j = 0; j < 3; ++j)
      outs.push_back(expert_forward(experts[j], slice(g.constant(w), 1, j, j + 1), 1e-5));
    return std::make_pair(compose_theta(g.constant(gates), outs, g.constant(theta0)).value(), outs);
  };
  Tensor w = Tensor::from_rows({{0.1, -0.4, 0.8}});
  Tensor w2 = w;
  w2[2] = -0.9;
  auto [t1, o1] = theta_for(w);
  auto [t2, o2] = theta_for(w2);
  for (std::size_t k = 0; k < 6; ++k)
    CHECK(t2[k] - t1[k] == doctest::Approx(0.3 * (o2[2].value()[k] - o1[2].value()[k])).epsilon(1e-12));
}

TEST_CASE("permuting sources with their experts and gate columns keeps forecasts") {
  std::mt19937_64 rng(8);
  ModelConfig c = small_config();
  c.head = HeadKind::gaussian;
  Model m(c, 5);
  // Distinct biases: with h_0 = 0 all logits would otherwise tie at the
  // first step, and ties resolve by index, which a permutation changes.
  m.params().value("gate.b") = Tensor::vector({0.3, -0.2, 0.1});
  const std::size_t perm[3] = {2, 0, 1};  // new slot j holds old source perm[j]

  ParamSet moved = m.params();
  for (std::size_t j = 0; j < 3; ++j)
    for (const char* part : {"w1", "b1", "w2", "b2", "ln_gain", "ln_bias"})
      moved.value("expert." + std::to_string(j) + "." + part) =
          m.params().value("expert." + std::to_string(perm[j]) + "." + part);
  const Tensor& gw = m.params().value("gate.w");
  const Tensor& gb = m.params().value("gate.b");
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t r = 0; r < gw.rows(); ++r) moved.value("gate.w")(r, j) = gw(r, perm[j]);
    moved.value("gate.b")[j] = gb[perm[j]];
  }
  Model pm(c, moved);

  BatchInput in = random_batch(c, 2, 9, rng);
  BatchInput pin = in;
  for (std::size_t r = 0; r < in.externals.rows(); ++r)
    for (std::size_t j = 0; j < 3; ++j) pin.externals(r, j) = in.externals(r, perm[j]);

  Graph g1, g2;
  auto p1 = m.bind(g1);
  auto p2 = pm.bind(g2);
  Tensor a = m.forward(g1, p1, in).gaussian.mean.value();
  Tensor b = pm.forward(g2, p2, pin).gaussian.mean.value();
  CHECK(testing::max_rel_diff(a, b) < 1e-12);
}

TEST_CASE("forward records one gate step per recurrence step") {
  std::mt19937_64 rng(9);
  ModelConfig c = small_config();
  Model m(c, 1);
  BatchInput in = random_batch(c, 2, 5, rng);
  Graph g;
  auto p = m.bind(g);
  std::vector<GateStep> trace;
  m.forward(g, p, in, &trace);
  REQUIRE(trace.size() == 5);
  for (const auto& s : trace) {
    for (std::size_t r = 0; r < 2; ++r) {
      double total = 0.0;
      int nonzero = 0;
      for (std::size_t j = 0; j < 3; ++j) {
        total += s.weights(r, j);
        nonzero += s.weights(r, j) != 0.0;
      }
      CHECK(nonzero == 2);
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }
  BatchInput bad = in;
  bad.externals = Tensor({10, 2});
  CHECK_THROWS_AS(m.forward(g, p, bad), ShapeError);
}
