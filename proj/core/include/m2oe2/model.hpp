#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "m2oe2/config.hpp"
#include "m2oe2/diff/graph.hpp"
#include "m2oe2/moe/metamoe.hpp"
#include "m2oe2/seq/seqmodel.hpp"

namespace m2oe2 {

using diff::Graph;
using diff::ParamSet;
using diff::Tensor;
using diff::Var;

/// A batch of equal-length contexts laid out time-major: row t*batch + b
/// holds step t of instance b.
struct BatchInput {
  std::size_t batch = 0;
  std::size_t steps = 0;
  Tensor loads;      // (steps*batch) x d_x, normalized
  Tensor externals;  // (steps*batch) x (M*d_w), normalized
};

/// Gate activity at one time step for every row of the batch.
struct GateStep {
  Tensor logits;   // batch x M
  Tensor weights;  // batch x M
  Tensor mask;     // batch x M
};

/// Head outputs after running the recurrence over a batch of contexts.
struct HeadOutputs {
  Var point;                 // deterministic head
  seq::GaussianOut gaussian; // gaussian head
  seq::GaussianOut latent;   // variational head: q(z | x'_last, h_prev)
};

/// The adaptive forecaster: stacked GRU over inputs modulated by a sparse
/// mixture of hypernetwork experts with a static shortcut theta_0.
///
/// With experts disabled the same object is the plain GRU baseline (every
/// step uses theta_0).
class Model {
 public:
  struct Bound {
    seq::GruStack gru;
    seq::DeterministicHead det;
    seq::GaussianHead gauss;
    seq::LatentEncoder enc;
    seq::LatentDecoder dec;
    std::vector<moe::Expert> experts;
    moe::GateParams gate;
    Var theta0;  // flattened 1 x (d_x*d_x')
  };

  Model(ModelConfig config, std::uint64_t seed);
  /// Adopts existing parameters; names and shapes must match the config.
  Model(ModelConfig config, ParamSet params);

  const ModelConfig& config() const noexcept { return config_; }
  const ParamSet& params() const noexcept { return params_; }
  ParamSet& params() noexcept { return params_; }

  Bound bind(Graph& g) const { return bind(g, params_); }
  /// Binds a parameter set with this model's layout (e.g. a perturbed copy).
  Bound bind(Graph& g, const ParamSet& params) const;

  /// Runs the recurrence over the batch and evaluates the configured head.
  /// Step t is gated with the top-layer state after step t-1 (zeros at t=0).
  HeadOutputs forward(Graph& g, const Bound& p, const BatchInput& in,
                      std::vector<GateStep>* trace = nullptr) const;

  /// Copy of this model with the experts and gate removed, sharing every
  /// other parameter value.
  Model base_counterpart() const;

  /// Zeroes every expert's layer-norm gain and bias.
  void silence_experts();

 private:
  static ParamSet init_params(const ModelConfig& c, std::uint64_t seed);
  void check_params() const;

  ModelConfig config_;
  ParamSet params_;
};

/// Parameters a model with this config must contain, with their shapes.
std::vector<std::pair<std::string, diff::Shape>> expected_parameters(const ModelConfig& c);

}  // namespace m2oe2
