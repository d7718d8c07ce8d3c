#include "m2oe2/diff/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace m2oe2::diff {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

ShapeError::ShapeError(const std::string& op, const Shape& lhs, const Shape& rhs)
    : std::invalid_argument(op + ": incompatible shapes " + to_string(lhs) + " and " +
                            to_string(rhs)) {}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

namespace {
void check_extents(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
  for (auto e : shape)
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape));
}
}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  values_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  check_extents(shape_);
  if (values_.size() != element_count(shape_))
    throw ShapeError("tensor: " + std::to_string(values_.size()) +
                     " values do not fill shape " + to_string(shape_));
}

Tensor Tensor::vector(std::vector<double> values) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("from_rows: ragged rows");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(v));
}

std::size_t Tensor::rows() const noexcept {
  if (shape_.size() <= 1) return 1;
  return values_.size() / shape_.back();
}

std::size_t Tensor::cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }

double Tensor::item() const {
  if (values_.size() != 1) throw ShapeError("item() on non-scalar tensor " + to_string(shape_));
  return values_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor out(std::move(shape), values_);
  out.requires_grad_ = requires_grad_;
  return out;
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

}  // namespace m2oe2::diff
