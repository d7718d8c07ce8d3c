#pragma once

#include "m2oe2/diff/graph.hpp"
#include "m2oe2/model.hpp"

namespace m2oe2::train {

using diff::Tensor;
using diff::Var;

/// Mean squared error over all elements.
Var mse_loss(Var pred, Var target);

/// Gaussian negative log-likelihood without the constant term, averaged over
/// elements: mean(log_var + (x - mean)^2 / exp(log_var)).
Var nll_loss(Var mean, Var log_var, Var target);

/// KL(N(mean, exp(log_var)) || N(0, I)): summed over latent dimensions,
/// averaged over rows.
Var kl_gaussian(Var mean, Var log_var);

struct ElboTerms {
  Var loss;  // nll + kl_weight * kl
  Var nll;
  Var kl;
};

/// Negative ELBO for one batch with a single latent draw per row. `noise` is
/// the standard-normal draw (batch x d_z). Rejects non-variational models.
ElboTerms elbo_loss(const Model& model, const Model::Bound& p, const HeadOutputs& out,
                    const Tensor& targets, double kl_weight, const Tensor& noise);

/// Training objective for the model's head: MSE (deterministic), NLL
/// (gaussian) or negative ELBO (variational). `noise` is ignored unless the
/// head is variational.
Var head_loss(const Model& model, const Model::Bound& p, const HeadOutputs& out,
              const Tensor& targets, double kl_weight, const Tensor& noise);

}  // namespace m2oe2::train
