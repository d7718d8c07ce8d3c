#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "m2oe2/diff/tensor.hpp"

namespace m2oe2::diff {

enum class ParamGroup { base, heads, experts, gate, theta0 };

std::string_view to_string(ParamGroup g);
std::optional<ParamGroup> parse_param_group(std::string_view s);

struct Parameter {
  std::string name;
  ParamGroup group;
  Tensor value;
};

/// Named trainable tensors. Names are unique; insertion order is stable and
/// defines the iteration order used by checkpoints and optimizers.
class ParamSet {
 public:
  std::size_t add(std::string name, ParamGroup group, Tensor value);

  std::size_t size() const noexcept { return params_.size(); }
  bool contains(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  Tensor& value(std::string_view name) { return params_[index_of(name)].value; }
  const Tensor& value(std::string_view name) const { return params_[index_of(name)].value; }

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }

  std::size_t scalar_count() const;

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Gradient map aligned with a ParamSet: one tensor per parameter, zeros for
/// parameters the loss does not reach.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParamSet& params);

  std::size_t size() const noexcept { return grads_.size(); }
  Tensor& operator[](std::size_t i) { return grads_[i]; }
  const Tensor& operator[](std::size_t i) const { return grads_[i]; }
  const Tensor& at(std::string_view name) const;

  Gradients& operator+=(const Gradients& other);
  double global_norm() const;
  bool all_finite() const;
  void scale(double factor);

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> grads_;
};

}  // namespace m2oe2::diff
