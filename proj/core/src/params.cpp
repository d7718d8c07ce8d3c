#include "m2oe2/diff/params.hpp"

#include <cmath>
#include <stdexcept>

namespace m2oe2::diff {

std::string_view to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::base: return "base";
    case ParamGroup::heads: return "heads";
    case ParamGroup::experts: return "experts";
    case ParamGroup::gate: return "gate";
    case ParamGroup::theta0: return "theta0";
  }
  return "unknown";
}

std::optional<ParamGroup> parse_param_group(std::string_view s) {
  for (auto g : {ParamGroup::base, ParamGroup::heads, ParamGroup::experts, ParamGroup::gate,
                 ParamGroup::theta0})
    if (to_string(g) == s) return g;
  return std::nullopt;
}

std::size_t ParamSet::add(std::string name, ParamGroup group, Tensor value) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  value.set_requires_grad(true);
  const std::size_t idx = params_.size();
  index_.emplace(name, idx);
  params_.push_back(Parameter{std::move(name), group, std::move(value)});
  return idx;
}

bool ParamSet::contains(std::string_view name) const {
  return index_.count(std::string(name)) != 0;
}

std::size_t ParamSet::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return it->second;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Gradients::Gradients(const ParamSet& params) {
  names_.reserve(params.size());
  grads_.reserve(params.size());
  for (const auto& p : params) {
    names_.push_back(p.name);
    grads_.emplace_back(p.value.shape(), 0.0);
  }
}

const Tensor& Gradients::at(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return grads_[i];
  throw std::out_of_range("no gradient for parameter: " + std::string(name));
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.grads_.size() != grads_.size())
    throw std::invalid_argument("gradient maps cover different parameter sets");
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    if (grads_[i].shape() != other.grads_[i].shape())
      throw ShapeError("gradient accumulate", grads_[i].shape(), other.grads_[i].shape());
    auto dst = grads_[i].values();
    auto src = other.grads_[i].values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
  return *this;
}

double Gradients::global_norm() const {
  double sq = 0.0;
  for (const auto& g : grads_)
    for (double v : g.values()) sq += v * v;
  return std::sqrt(sq);
}

bool Gradients::all_finite() const {
  for (const auto& g : grads_)
    for (double v : g.values())
      if (!std::isfinite(v)) return false;
  return true;
}

void Gradients::scale(double factor) {
  for (auto& g : grads_)
    for (double& v : g.values()) v *= factor;
}

}  // namespace m2oe2::diff
