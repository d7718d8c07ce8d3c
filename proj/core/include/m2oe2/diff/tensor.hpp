#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace m2oe2::diff {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

/// Raised when two operands cannot be combined. The message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(const std::string& op, const Shape& lhs, const Shape& rhs);
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Dense row-major array of doubles.
///
/// Rank-1 tensors behave as row vectors in element-wise operations and as
/// column vectors on the right-hand side of matmul (numpy convention).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  // 2-D view: rank 1 is a single row; higher ranks fold leading extents.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double item() const;

  bool requires_grad() const noexcept { return requires_grad_; }
  Tensor& set_requires_grad(bool on) noexcept {
    requires_grad_ = on;
    return *this;
  }

  Tensor reshaped(Shape shape) const;
  void fill(double v);

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<double> values_;
  bool requires_grad_ = false;
};

std::size_t element_count(const Shape& shape);

}  // namespace m2oe2::diff
