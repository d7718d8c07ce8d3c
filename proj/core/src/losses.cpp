#include "m2oe2/train/losses.hpp"

#include <stdexcept>

#include "m2oe2/diff/ops.hpp"

namespace m2oe2::train {

using namespace m2oe2::diff;

Var mse_loss(Var pred, Var target) {
  if (pred.shape() != target.shape()) throw ShapeError("mse_loss", pred.shape(), target.shape());
  return mean(square(pred - target));
}

Var nll_loss(Var mu, Var log_var, Var target) {
  if (mu.shape() != target.shape() || log_var.shape() != target.shape())
    throw ShapeError("nll_loss", mu.shape(), target.shape());
  return mean(log_var + square(target - mu) * exp(neg(log_var)));
}

Var kl_gaussian(Var mu, Var log_var) {
  if (mu.shape() != log_var.shape()) throw ShapeError("kl_gaussian", mu.shape(), log_var.shape());
  const double rows = static_cast<double>(mu.value().rows());
  Var per_entry = exp(log_var) + square(mu) - log_var + (-1.0);
  return scale(sum(per_entry), 0.5 / rows);
}

ElboTerms elbo_loss(const Model& model, const Model::Bound& p, const HeadOutputs& out,
                    const Tensor& targets, double kl_weight, const Tensor& noise) {
  if (model.config().head != HeadKind::variational)
    throw std::invalid_argument("elbo_loss: model head is " +
                                std::string(to_string(model.config().head)) +
                                ", expected variational");
  Graph& g = out.latent.mean.graph();
  Var z = seq::reparameterize(out.latent.mean, out.latent.log_var, g.constant(noise));
  seq::GaussianOut px = seq::decode(p.dec, z);
  ElboTerms t;
  t.nll = nll_loss(px.mean, px.log_var, g.constant(targets));
  t.kl = kl_gaussian(out.latent.mean, out.latent.log_var);
  t.loss = kl_weight == 0.0 ? t.nll : t.nll + scale(t.kl, kl_weight);
  return t;
}

Var head_loss(const Model& model, const Model::Bound& p, const HeadOutputs& out,
              const Tensor& targets, double kl_weight, const Tensor& noise) {
  switch (model.config().head) {
    case HeadKind::deterministic:
      return mse_loss(out.point, out.point.graph().constant(targets));
    case HeadKind::gaussian:
      return nll_loss(out.gaussian.mean, out.gaussian.log_var,
                      out.gaussian.mean.graph().constant(targets));
    case HeadKind::variational:
      return elbo_loss(model, p, out, targets, kl_weight, noise).loss;
  }
  throw std::logic_error("head_loss: unknown head");
}

}  // namespace m2oe2::train
