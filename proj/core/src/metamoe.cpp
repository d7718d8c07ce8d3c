#include "m2oe2/moe/metamoe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "m2oe2/config.hpp"
#include "m2oe2/diff/ops.hpp"

namespace m2oe2::moe {

using namespace m2oe2::diff;

Var expert_forward(const Expert& expert, Var w, double ln_eps) {
  for (double v : w.value().values())
    if (!std::isfinite(v)) throw std::invalid_argument("expert_forward: non-finite external input");
  Var hidden = tanh(matmul(w, expert.w1) + expert.b1);
  Var raw = matmul(hidden, expert.w2) + expert.b2;
  return layer_norm(raw, expert.ln_gain, expert.ln_bias, ln_eps);
}

Tensor top_m_mask(const Tensor& logits, std::size_t m) {
  const std::size_t rows = logits.rows(), cols = logits.cols();
  if (m < 1 || m > cols)
    throw std::invalid_argument("top_m_mask: m=" + std::to_string(m) + " outside [1, " +
                                std::to_string(cols) + "]");
  Tensor mask(logits.shape(), 0.0);
  std::vector<std::size_t> order(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return logits(r, a) > logits(r, b);
    });
    for (std::size_t k = 0; k < m; ++k) mask(r, order[k]) = 1.0;
  }
  return mask;
}

GateOutput gate(const GateParams& params, Var h_prev) {
  Var logits = matmul(h_prev, params.w) + params.b;
  Tensor mask = top_m_mask(logits.value(), params.top_m);
  Var weights = masked_softmax(logits, mask);
  return {weights, logits.value(), std::move(mask)};
}

Var compose_theta(Var gates, const std::vector<Var>& expert_outputs, Var theta0) {
  const std::size_t M = expert_outputs.size();
  if (gates.value().cols() != M)
    throw ShapeError("compose_theta gates", gates.shape(),
                     Shape{gates.value().rows(), M});
  Var theta = theta0;
  bool first = true;
  for (std::size_t j = 0; j < M; ++j) {
    if (expert_outputs[j].value().cols() != theta0.value().size())
      throw ShapeError("compose_theta expert", expert_outputs[j].shape(), theta0.shape());
    Var term = slice(gates, 1, j, j + 1) * expert_outputs[j];
    theta = first ? term : theta + term;
    first = false;
  }
  if (first) return theta0;
  return theta + reshape(theta0, {1, theta0.value().size()});
}

Var modulate_input(Var theta, Var x, std::size_t load_width, std::size_t input_width) {
  const Tensor& t = theta.value();
  if (t.cols() != load_width * input_width)
    throw ShapeError("modulate_input theta", t.shape(), Shape{t.rows(), load_width * input_width});
  if (x.value().cols() != load_width)
    throw ShapeError("modulate_input x", x.shape(), Shape{x.value().rows(), load_width});
  if (load_width == 1) return x * theta;
  Var out;
  for (std::size_t a = 0; a < load_width; ++a) {
    Var term = slice(x, 1, a, a + 1) * slice(theta, 1, a * input_width, (a + 1) * input_width);
    out = a == 0 ? term : out + term;
  }
  return out;
}

std::string gate_trace_csv(const std::vector<std::string>& experts,
                           const std::vector<GateRecord>& rows) {
  std::string out = "timestamp";
  for (const auto& e : experts) out += ",logit_" + e;
  for (const auto& e : experts) out += ",weight_" + e;
  out += ",selected\n";
  for (const auto& r : rows) {
    if (r.logits.size() != experts.size() || r.weights.size() != experts.size() ||
        r.selected.size() != experts.size())
      throw std::invalid_argument("gate_trace_csv: row " + r.time + " does not have " +
                                  std::to_string(experts.size()) + " experts");
    out += r.time;
    for (double v : r.logits) out += "," + format_double(v);
    for (double v : r.weights) out += "," + format_double(v);
    std::string sel;
    for (std::size_t j = 0; j < experts.size(); ++j)
      if (r.selected[j]) sel += (sel.empty() ? "" : ";") + experts[j];
    out += "," + sel + "\n";
  }
  return out;
}

}  // namespace m2oe2::moe
