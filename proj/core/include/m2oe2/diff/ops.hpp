#pragma once

#include <vector>

#include "m2oe2/diff/graph.hpp"

namespace m2oe2::diff {

// Clamp bounds applied inside exp() and log().
inline constexpr double kExpMin = -30.0;
inline constexpr double kExpMax = 30.0;
inline constexpr double kLogFloor = 1e-12;

// Element-wise binary ops broadcast over the 2-D view of their operands:
// each extent must match or be 1 (row vectors, column vectors, scalars).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

Var matmul(Var a, Var b);

Var scale(Var a, double factor);
Var add_scalar(Var a, double c);
Var neg(Var a);
Var square(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);  // input clamped into [kExpMin, kExpMax]
Var log(Var a);  // input clamped below at kLogFloor

/// Softmax along `axis` (0 = down columns, 1 or -1 = along rows), with
/// max-subtraction.
Var softmax(Var a, int axis = -1);
/// Row-wise softmax restricted to entries where mask != 0; the rest are 0.
/// The mask is a constant: no gradient flows through the selection.
Var masked_softmax(Var a, const Tensor& mask);

/// Row-wise layer normalization with population variance. gain and bias
/// hold one value per column.
Var layer_norm(Var a, Var gain, Var bias, double eps);

Var concat(const std::vector<Var>& parts, int axis);
/// Half-open range [begin, end) along axis 0 (rows) or 1 (columns) of the
/// 2-D view. Slicing a rank-1 tensor along axis 0 slices its elements.
Var slice(Var a, int axis, std::size_t begin, std::size_t end);
Var reshape(Var a, Shape shape);

Var sum(Var a);
Var mean(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator+(Var a, double c) { return add_scalar(a, c); }
inline Var operator+(double c, Var a) { return add_scalar(a, c); }
inline Var operator-(double c, Var a) { return add_scalar(neg(a), c); }

}  // namespace m2oe2::diff
