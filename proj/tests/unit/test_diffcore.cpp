#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "doctest.h"
#include "m2oe2/diff/gradcheck.hpp"
#include "m2oe2/diff/ops.hpp"
#include "support.hpp"

using namespace m2oe2::diff;
using testing::max_rel_diff;
using testing::numeric_grad;
using testing::random_tensor;

namespace {

// Gradient of sum(w * op(x)) w.r.t. x, analytic vs numeric. The random
// weights make every output entry matter.
double primitive_error(const std::function<Var(Var)>& op, const Tensor& x, std::mt19937_64& rng) {
  Tensor probe_out;
  {
    Graph g;
    probe_out = op(g.constant(x)).value();
  }
  Tensor w = random_tensor(probe_out.shape(), rng, -1.0, 1.0);
  auto f = [&](const Tensor& at) {
    Graph g;
    return sum(op(g.constant(at)) * g.constant(w)).value().item();
  };
  Graph g;
  Tensor leaf = x;
  leaf.set_requires_grad(true);
  Var xv = g.input(leaf);
  g.backward(sum(op(xv) * g.constant(w)));
  return max_rel_diff(g.grad(xv), numeric_grad(f, x));
}

}  // namespace

TEST_CASE("evaluate examples") {
  Graph g;
  CHECK(tanh(g.constant(Tensor::scalar(0.0))).value().item() == 0.0);

  Tensor s = softmax(g.constant(Tensor::vector({0, 0, 0}))).value();
  for (double v : s.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  Tensor ax = matmul(g.constant(Tensor::from_rows({{1, 2}, {3, 4}})), g.constant(Tensor::vector({1, 1}))).value();
  CHECK(ax.shape() == Shape{2});
  CHECK(ax[0] == 3.0);
  CHECK(ax[1] == 7.0);
}

TEST_CASE("backward examples") {
  SUBCASE("sum") {
    Graph g;
    Var x = g.input(Tensor::vector({0.3, -1.0, 2.0}).set_requires_grad(true));
    g.backward(sum(x));
    CHECK(g.grad(x) == Tensor::vector({1, 1, 1}));
  }
  SUBCASE("tanh at zero") {
    Graph g;
    Var x = g.input(Tensor::vector({0, 0, 0, 0}).set_requires_grad(true));
    g.backward(sum(tanh(x)));
    CHECK(g.grad(x) == Tensor::vector({1, 1, 1, 1}));
  }
  SUBCASE("squared norm of A x") {
    Graph g;
    Var a = g.constant(Tensor::from_rows({{1, 0}, {0, 2}}));
    Var x = g.input(Tensor::vector({1, 1}).set_requires_grad(true));
    g.backward(sum(square(matmul(a, x))));
    CHECK(g.grad(x) == Tensor::vector({2, 8}));
  }
}

TEST_CASE("backward rejects a non-scalar loss") {
  Graph g;
  Var x = g.input(Tensor::vector({1, 2}).set_requires_grad(true));
  CHECK_THROWS_AS(g.backward(tanh(x)), ShapeError);
}

TEST_CASE("unreachable parameters get zero gradients") {
  ParamSet ps;
  ps.add("used", ParamGroup::base, Tensor::vector({1, 2}));
  ps.add("unused", ParamGroup::heads, Tensor({2, 3}, 5.0));
  Graph g;
  Gradients grads = g.backward(sum(square(g.param(ps, "used"))), ps);
  CHECK(grads.at("used") == Tensor::vector({2, 4}));
  CHECK(grads.at("unused") == Tensor({2, 3}, 0.0));
}

TEST_CASE("shape mismatch names both shapes") {
  Graph g;
  Var a = g.constant(Tensor({2, 3}));
  Var b = g.constant(Tensor({4, 5}));
  try {
    (void)matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2, 3]") != std::string::npos);
    CHECK(msg.find("[4, 5]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(g.constant(Tensor({2, 3})), g.constant(Tensor({3, 2}))), ShapeError);
}

TEST_CASE("exp and log clamp") {
  Graph g;
  CHECK(exp(g.constant(Tensor::scalar(1000.0))).value().item() == std::exp(kExpMax));
  CHECK(exp(g.constant(Tensor::scalar(-1000.0))).value().item() == std::exp(kExpMin));
  CHECK(log(g.constant(Tensor::scalar(0.0))).value().item() == std::log(kLogFloor));
  CHECK(std::isfinite(log(g.constant(Tensor::scalar(-5.0))).value().item()));
}

TEST_CASE("every primitive matches central differences") {
  std::mt19937_64 rng(11);
  const double tol = 1e-5;
  Tensor m23 = random_tensor({2, 3}, rng);
  Tensor other23 = random_tensor({2, 3}, rng);
  Tensor m34 = random_tensor({3, 4}, rng);
  Tensor row3 = random_tensor({3}, rng);
  Tensor col2 = random_tensor({2, 1}, rng);
  Tensor gain = random_tensor({3}, rng);
  Tensor bias = random_tensor({3}, rng);
  Tensor mask = Tensor::from_rows({{1, 0, 1}, {0, 1, 1}});

  auto c = [](Var like, const Tensor& t) { return like.graph().constant(t); };
  CHECK(primitive_error([&](Var x) { return x + c(x, other23); }, m23, rng) < tol);
  CHECK(primitive_error([&](Var x) { return x - c(x, row3); }, m23, rng) < tol);
  CHECK(primitive_error([&](Var x) { return c(x, col2) - x; }, m23, rng) < tol);
  CHECK(primitive_error([&](Var x) { return x * c(x, other23); }, m23, rng) < tol);
  CHECK(primitive_error([&](Var x) { return x * x; }, m23, rng) < tol);
  CHECK(primitive_error([&](Var x) { return c(x, m23) * x; }, row3, rng) < tol);
  CHECK(primitive_error([&](Var x) { return c(x, m23) + x; }, col2, rng) < tol);
  CHECK(primitive_error([&](Var x) { return matmul(x, c(x, m34)); }, m23, rng) < tol);
  CHECK(primitive_error([&](Var x) { return matmul(c(x, m23), x); }, m34, rng) < tol);
  CHECK(primitive_error([&](Var x) { return matmul(c(x, m23), x); }, row3, rng) < tol);
  CHECK(primitive_error([&](Var x) { return matmul(x, c(x, m34)); }, row3, rng) < tol);
  CHECK(primitive_error([](Var x) { return tanh(x); }, m23, rng) < tol);
  CHECK(primitive_error([](Var x) { return sigmoid(x); }, m23, rng) < tol);
  CHECK(primitive_error([](Var x) { return exp(x); }, m23, rng) < tol);
  CHECK(primitive_error([](Var x) { return log(square(x) + 0.5); }, m23, rng) < tol);
  CHECK(primitive_error([](Var x) { return softmax(x, 1); }, m23, rng) < tol);
  CHECK(primitive_error([](Var x) { return softmax(x, 0); }, m23, rng) < tol);
  CHECK(primitive_error([&](Var x) { return masked_softmax(x, mask); }, m23, rng) < tol);
  CHECK(primitive_error([&](Var x) { return layer_norm(x, c(x, gain), c(x, bias), 1e-5); }, m23, rng) < tol);
  CHECK(primitive_error([&](Var x) { return layer_norm(c(x, m23), x, c(x, bias), 1e-5); }, gain, rng) < tol);
  CHECK(primitive_error([&](Var x) { return layer_norm(c(x, m23), c(x, gain), x, 1e-5); }, bias, rng) < tol);
  CHECK(primitive_error([&](Var x) { return concat({x, c(x, other23), x}, 0); }, m23, rng) < tol);
  CHECK(primitive_error([&](Var x) { return concat({c(x, col2), x}, 1); }, m23, rng) < tol);
  CHECK(primitive_error([](Var x) { return slice(x, 1, 1, 3); }, m23, rng) < tol);
  CHECK(primitive_error([](Var x) { return slice(x, 0, 1, 2); }, m23, rng) < tol);
  CHECK(primitive_error([](Var x) { return reshape(x, {3, 2}); }, m23, rng) < tol);
  CHECK(primitive_error([](Var x) { return sum(x); }, m23, rng) < tol);
  CHECK(primitive_error([](Var x) { return mean(x); }, m23, rng) < tol);
  CHECK(primitive_error([](Var x) { return scale(x, -2.5); }, m23, rng) < tol);
  CHECK(primitive_error([](Var x) { return 3.0 - x; }, m23, rng) < tol);
}

TEST_CASE("masked softmax passes no gradient to dropped logits") {
  Graph g;
  Var x = g.input(Tensor::from_rows({{2.0, 1.0, 0.5}}).set_requires_grad(true));
  Tensor mask = Tensor::from_rows({{1, 1, 0}});
  Var y = masked_softmax(x, mask);
  const double e2 = std::exp(2.0), e1 = std::exp(1.0);
  CHECK(y.value()(0, 0) == doctest::Approx(e2 / (e2 + e1)).epsilon(1e-14));
  CHECK(y.value()(0, 2) == 0.0);
  g.backward(sum(y * g.constant(Tensor::from_rows({{1.0, -2.0, 4.0}}))));
  CHECK(g.grad(x)(0, 2) == 0.0);
}

TEST_CASE("backward is linear in the loss") {
  std::mt19937_64 rng(3);
  ParamSet ps;
  ps.add("a", ParamGroup::base, random_tensor({3, 2}, rng));
  ps.add("b", ParamGroup::gate, random_tensor({2}, rng));
  auto l1 = [](Graph& g, const ParamSet& p) {
    return sum(tanh(matmul(g.param(p, "a"), g.param(p, "b"))));
  };
  auto l2 = [](Graph& g, const ParamSet& p) { return mean(exp(g.param(p, "a")) * g.param(p, "b")); };
  Graph g1, g2, g12;
  Gradients s1 = g1.backward(l1(g1, ps), ps);
  Gradients s2 = g2.backward(l2(g2, ps), ps);
  Gradients both = g12.backward(l1(g12, ps) + l2(g12, ps), ps);
  s1 += s2;
  for (std::size_t i = 0; i < ps.size(); ++i) CHECK(max_rel_diff(s1[i], both[i]) < 1e-14);
}

TEST_CASE("repeated evaluate/backward is bit-identical") {
  std::mt19937_64 rng(5);
  ParamSet ps;
  ps.add("w", ParamGroup::base, random_tensor({4, 4}, rng));
  auto run = [&] {
    Graph g;
    Var w = g.param(ps, "w");
    Var loss = sum(layer_norm(tanh(matmul(w, w)), g.constant(Tensor({4}, 1.0)),
                              g.constant(Tensor({4}, 0.0)), 1e-5) * w);
    return std::make_pair(loss.value().item(), g.backward(loss, ps)[0]);
  };
  auto [v1, g1] = run();
  auto [v2, g2] = run();
  CHECK(v1 == v2);
  CHECK(g1 == g2);
}

TEST_CASE("finite_diff_check") {
  ParamSet ps;
  std::mt19937_64 rng(9);
  ps.add("x", ParamGroup::base, random_tensor({5}, rng));

  SUBCASE("quadratic") {
    auto quad = [](Graph& g, const ParamSet& p) {
      Var x = g.param(p, "x");
      return sum(square(x) * 1.5) + sum(x);
    };
    CHECK(finite_diff_check(quad, ps, 1e-5, 5).max_error < 1e-6);
  }
  SUBCASE("constant loss") {
    auto constant = [](Graph& g, const ParamSet&) { return sum(g.constant(Tensor::vector({2, 3}))); };
    auto r = finite_diff_check(constant, ps, 1e-5, 5);
    CHECK(r.max_error == 0.0);
  }
  SUBCASE("eps outside the allowed range") {
    auto quad = [](Graph& g, const ParamSet& p) { return sum(square(g.param(p, "x"))); };
    CHECK_THROWS_AS(finite_diff_check(quad, ps, 1e-2, 3), std::invalid_argument);
    CHECK_THROWS_AS(finite_diff_check(quad, ps, 1e-9, 3), std::invalid_argument);
  }
  SUBCASE("nondeterministic loss is rejected") {
    int calls = 0;
    auto drifting = [&](Graph& g, const ParamSet& p) {
      return sum(g.param(p, "x")) + static_cast<double>(++calls);
    };
    CHECK_THROWS_AS(finite_diff_check(drifting, ps, 1e-5, 3), NondeterministicLoss);
  }
}
