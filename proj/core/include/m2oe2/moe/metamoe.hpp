#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "m2oe2/diff/graph.hpp"

namespace m2oe2::moe {

using diff::Tensor;
using diff::Var;

/// Hypernetwork for one external source: a two-layer tanh MLP from d_w
/// scalars to a flattened d_x x d_x' block, followed by layer normalization
/// with the expert's own gain and bias.
struct Expert {
  Var w1, b1, w2, b2;
  Var ln_gain, ln_bias;
};

/// Rows of `w` are independent inputs (rows x d_w). All entries must be finite.
Var expert_forward(const Expert& expert, Var w, double ln_eps);

struct GateParams {
  Var w, b;  // d_h x M, M
  std::size_t top_m = 1;
};

struct GateOutput {
  Var weights;    // rows x M, exactly top_m nonzeros per row
  Tensor logits;  // pre-activation scores
  Tensor mask;    // 1 where selected
};

/// Indicator of the m largest entries of each row. Equal scores resolve to
/// the lower index.
Tensor top_m_mask(const Tensor& logits, std::size_t m);

/// Sparse softmax gate over the previous top-layer state.
GateOutput gate(const GateParams& params, Var h_prev);

/// theta = sum_j gates[:, j] * experts[j] + theta0, one flattened block per row.
Var compose_theta(Var gates, const std::vector<Var>& expert_outputs, Var theta0);

/// x' = x theta, per row, with theta read as a (d_x x d_x') block.
Var modulate_input(Var theta, Var x, std::size_t load_width, std::size_t input_width);

/// One row of a gate trace: a time label and the gate state of one sequence.
struct GateRecord {
  std::string time;
  std::vector<double> logits;
  std::vector<double> weights;
  std::vector<bool> selected;
};

/// timestamp,logit_<expert>...,weight_<expert>...,selected where `selected`
/// joins the chosen expert names with ';'.
std::string gate_trace_csv(const std::vector<std::string>& experts,
                           const std::vector<GateRecord>& rows);

}  // namespace m2oe2::moe
