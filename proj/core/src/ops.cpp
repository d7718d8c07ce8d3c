#include "m2oe2/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace m2oe2::diff {
namespace {

Graph& same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw std::logic_error("operands recorded on different graphs");
  return a.graph();
}

// Broadcast geometry for element-wise binary ops over 2-D views.
struct Broadcast {
  std::size_t rows, cols;
  std::size_t ra, ca, rb, cb;
  Shape out;
};

Broadcast broadcast_of(const char* op, const Tensor& a, const Tensor& b) {
  Broadcast g{};
  g.ra = a.rows();
  g.ca = a.cols();
  g.rb = b.rows();
  g.cb = b.cols();
  g.rows = std::max(g.ra, g.rb);
  g.cols = std::max(g.ca, g.cb);
  const bool ok = (g.ra == g.rows || g.ra == 1) && (g.rb == g.rows || g.rb == 1) &&
                  (g.ca == g.cols || g.ca == 1) && (g.cb == g.cols || g.cb == 1);
  if (!ok) throw ShapeError(op, a.shape(), b.shape());
  if (a.size() == g.rows * g.cols)
    g.out = a.shape();
  else if (b.size() == g.rows * g.cols)
    g.out = b.shape();
  else
    g.out = {g.rows, g.cols};
  return g;
}

inline std::size_t at(std::size_t r, std::size_t c, std::size_t nr, std::size_t nc) {
  return (nr == 1 ? 0 : r) * nc + (nc == 1 ? 0 : c);
}

// Adds a full-size gradient into a possibly broadcast operand's buffer.
void reduce_into(Tensor& dst, const Tensor& g, const Broadcast& bc, bool lhs, double sign) {
  const std::size_t nr = lhs ? bc.ra : bc.rb;
  const std::size_t nc = lhs ? bc.ca : bc.cb;
  auto d = dst.values();
  auto s = g.values();
  if (nr == bc.rows && nc == bc.cols) {
    for (std::size_t i = 0; i < s.size(); ++i) d[i] += sign * s[i];
    return;
  }
  for (std::size_t r = 0; r < bc.rows; ++r)
    for (std::size_t c = 0; c < bc.cols; ++c) d[at(r, c, nr, nc)] += sign * s[r * bc.cols + c];
}

template <typename F>
Tensor map_values(const Tensor& a, F f) {
  Tensor out(a.shape());
  auto src = a.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

// Unary op whose derivative is a function of (input, output).
template <typename F, typename D>
Var unary(Var a, F f, D df) {
  Tensor out = map_values(a.value(), f);
  const std::uint32_t ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia, df](Graph& g, std::uint32_t self) {
    Tensor* da = g.accumulator(ia);
    if (!da) return;
    auto x = g.node_value(ia).values();
    auto y = g.node_value(self).values();
    auto gy = g.node_grad(self).values();
    auto dx = da->values();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gy[i] * df(x[i], y[i]);
  });
}

// Mirrors numpy: rank-1 lhs is a row, rank-1 rhs is a column.
struct MatGeom {
  std::size_t m, k, n;
  Shape out;
};

MatGeom matmul_geom(const Tensor& a, const Tensor& b) {
  MatGeom g{};
  const bool a_vec = a.rank() == 1;
  const bool b_vec = b.rank() == 1;
  if (a.rank() > 2 || b.rank() > 2) throw ShapeError("matmul", a.shape(), b.shape());
  g.m = a_vec ? 1 : a.shape()[0];
  g.k = a_vec ? a.shape()[0] : a.shape()[1];
  const std::size_t bk = b.shape()[0];
  g.n = b_vec ? 1 : b.shape()[1];
  if (g.k != bk) throw ShapeError("matmul", a.shape(), b.shape());
  if (a_vec && b_vec)
    g.out = {1};
  else if (a_vec)
    g.out = {g.n};
  else if (b_vec)
    g.out = {g.m};
  else
    g.out = {g.m, g.n};
  return g;
}

}  // namespace

Var add(Var a, Var b) {
  Graph& gr = same_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() == y.shape()) {
    Tensor out(x.shape());
    auto o = out.values();
    auto xv = x.values();
    auto yv = y.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] + yv[i];
    const std::uint32_t ia = a.id(), ib = b.id();
    return gr.record(std::move(out), {a, b}, [ia, ib](Graph& g, std::uint32_t self) {
      auto gy = g.node_grad(self).values();
      for (std::uint32_t id : {ia, ib})
        if (Tensor* d = g.accumulator(id)) {
          auto dv = d->values();
          for (std::size_t i = 0; i < dv.size(); ++i) dv[i] += gy[i];
        }
    });
  }
  const Broadcast bc = broadcast_of("add", x, y);
  Tensor out(bc.out);
  for (std::size_t r = 0; r < bc.rows; ++r)
    for (std::size_t c = 0; c < bc.cols; ++c)
      out[r * bc.cols + c] = x[at(r, c, bc.ra, bc.ca)] + y[at(r, c, bc.rb, bc.cb)];
  const std::uint32_t ia = a.id(), ib = b.id();
  return gr.record(std::move(out), {a, b}, [ia, ib, bc](Graph& g, std::uint32_t self) {
    const Tensor& gy = g.node_grad(self);
    if (Tensor* d = g.accumulator(ia)) reduce_into(*d, gy, bc, true, 1.0);
    if (Tensor* d = g.accumulator(ib)) reduce_into(*d, gy, bc, false, 1.0);
  });
}

Var sub(Var a, Var b) {
  Graph& gr = same_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast bc = broadcast_of("sub", x, y);
  Tensor out(bc.out);
  for (std::size_t r = 0; r < bc.rows; ++r)
    for (std::size_t c = 0; c < bc.cols; ++c)
      out[r * bc.cols + c] = x[at(r, c, bc.ra, bc.ca)] - y[at(r, c, bc.rb, bc.cb)];
  const std::uint32_t ia = a.id(), ib = b.id();
  return gr.record(std::move(out), {a, b}, [ia, ib, bc](Graph& g, std::uint32_t self) {
    const Tensor& gy = g.node_grad(self);
    if (Tensor* d = g.accumulator(ia)) reduce_into(*d, gy, bc, true, 1.0);
    if (Tensor* d = g.accumulator(ib)) reduce_into(*d, gy, bc, false, -1.0);
  });
}

Var mul(Var a, Var b) {
  Graph& gr = same_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast bc = broadcast_of("mul", x, y);
  Tensor out(bc.out);
  for (std::size_t r = 0; r < bc.rows; ++r)
    for (std::size_t c = 0; c < bc.cols; ++c)
      out[r * bc.cols + c] = x[at(r, c, bc.ra, bc.ca)] * y[at(r, c, bc.rb, bc.cb)];
  const std::uint32_t ia = a.id(), ib = b.id();
  return gr.record(std::move(out), {a, b}, [ia, ib, bc](Graph& g, std::uint32_t self) {
    const Tensor& gy = g.node_grad(self);
    const Tensor& x = g.node_value(ia);
    const Tensor& y = g.node_value(ib);
    Tensor* da = g.accumulator(ia);
    Tensor* db = g.accumulator(ib);
    for (std::size_t r = 0; r < bc.rows; ++r)
      for (std::size_t c = 0; c < bc.cols; ++c) {
        const double go = gy[r * bc.cols + c];
        const std::size_t xa = at(r, c, bc.ra, bc.ca);
        const std::size_t yb = at(r, c, bc.rb, bc.cb);
        if (da) (*da)[xa] += go * y[yb];
        if (db) (*db)[yb] += go * x[xa];
      }
  });
}

Var matmul(Var a, Var b) {
  Graph& gr = same_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const MatGeom mg = matmul_geom(x, y);
  Tensor out(mg.out, 0.0);
  {
    auto o = out.values();
    auto xv = x.values();
    auto yv = y.values();
    for (std::size_t i = 0; i < mg.m; ++i)
      for (std::size_t p = 0; p < mg.k; ++p) {
        const double xip = xv[i * mg.k + p];
        const double* yrow = &yv[p * mg.n];
        double* orow = &o[i * mg.n];
        for (std::size_t j = 0; j < mg.n; ++j) orow[j] += xip * yrow[j];
      }
  }
  const std::uint32_t ia = a.id(), ib = b.id();
  return gr.record(std::move(out), {a, b}, [ia, ib, mg](Graph& g, std::uint32_t self) {
    auto gy = g.node_grad(self).values();
    if (Tensor* da = g.accumulator(ia)) {
      // dA = dC * B^T
      auto yv = g.node_value(ib).values();
      auto d = da->values();
      for (std::size_t i = 0; i < mg.m; ++i)
        for (std::size_t p = 0; p < mg.k; ++p) {
          double acc = 0.0;
          const double* yrow = &yv[p * mg.n];
          const double* grow = &gy[i * mg.n];
          for (std::size_t j = 0; j < mg.n; ++j) acc += grow[j] * yrow[j];
          d[i * mg.k + p] += acc;
        }
    }
    if (Tensor* db = g.accumulator(ib)) {
      // dB = A^T * dC
      auto xv = g.node_value(ia).values();
      auto d = db->values();
      for (std::size_t i = 0; i < mg.m; ++i)
        for (std::size_t p = 0; p < mg.k; ++p) {
          const double xip = xv[i * mg.k + p];
          const double* grow = &gy[i * mg.n];
          double* drow = &d[p * mg.n];
          for (std::size_t j = 0; j < mg.n; ++j) drow[j] += xip * grow[j];
        }
    }
  });
}

Var scale(Var a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double c) {
  return unary(
      a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var square(Var a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return unary(
      a, [](double x) { return std::exp(std::clamp(x, kExpMin, kExpMax)); },
      [](double x, double y) { return (x < kExpMin || x > kExpMax) ? 0.0 : y; });
}

Var log(Var a) {
  return unary(
      a, [](double x) { return std::log(std::max(x, kLogFloor)); },
      [](double x, double) { return x < kLogFloor ? 0.0 : 1.0 / x; });
}

namespace {

// Softmax over groups of `len` elements laid out with `stride`; mask may be empty.
Tensor softmax_values(const Tensor& x, std::size_t groups, std::size_t len, std::size_t outer_stride,
                      std::size_t inner_stride, const Tensor* mask) {
  Tensor out(x.shape(), 0.0);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const std::size_t base = gi * outer_stride;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t idx = base + i * inner_stride;
      if (mask && (*mask)[idx] == 0.0) continue;
      mx = std::max(mx, x[idx]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t idx = base + i * inner_stride;
      if (mask && (*mask)[idx] == 0.0) continue;
      const double e = std::exp(std::max(x[idx] - mx, kExpMin));
      out[idx] = e;
      total += e;
    }
    if (total > 0.0)
      for (std::size_t i = 0; i < len; ++i) out[base + i * inner_stride] /= total;
  }
  return out;
}

Var softmax_impl(Var a, int axis, const Tensor* mask) {
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  std::size_t groups, len, outer, inner;
  if (axis == 0) {
    groups = cols, len = rows, outer = 1, inner = cols;
  } else if (axis == 1 || axis == -1) {
    groups = rows, len = cols, outer = cols, inner = 1;
  } else {
    throw ShapeError("softmax: unsupported axis " + std::to_string(axis));
  }
  Tensor out = softmax_values(x, groups, len, outer, inner, mask);
  const std::uint32_t ia = a.id();
  return a.graph().record(std::move(out), {a},
                          [ia, groups, len, outer, inner](Graph& g, std::uint32_t self) {
                            Tensor* da = g.accumulator(ia);
                            if (!da) return;
                            const Tensor& y = g.node_value(self);
                            const Tensor& gy = g.node_grad(self);
                            for (std::size_t gi = 0; gi < groups; ++gi) {
                              const std::size_t base = gi * outer;
                              double dot = 0.0;
                              for (std::size_t i = 0; i < len; ++i) {
                                const std::size_t idx = base + i * inner;
                                dot += y[idx] * gy[idx];
                              }
                              for (std::size_t i = 0; i < len; ++i) {
                                const std::size_t idx = base + i * inner;
                                (*da)[idx] += y[idx] * (gy[idx] - dot);
                              }
                            }
                          });
}

}  // namespace

Var softmax(Var a, int axis) { return softmax_impl(a, axis, nullptr); }

Var masked_softmax(Var a, const Tensor& mask) {
  if (mask.size() != a.value().size() || mask.cols() != a.value().cols())
    throw ShapeError("masked_softmax", a.shape(), mask.shape());
  return softmax_impl(a, -1, &mask);
}

Var layer_norm(Var a, Var gain, Var bias, double eps) {
  Graph& gr = same_graph(a, gain);
  same_graph(a, bias);
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  if (gain.value().size() != cols) throw ShapeError("layer_norm gain", x.shape(), gain.shape());
  if (bias.value().size() != cols) throw ShapeError("layer_norm bias", x.shape(), bias.shape());
  if (cols < 2) throw ShapeError("layer_norm needs at least 2 features, got " + to_string(x.shape()));
  const Tensor& gm = gain.value();
  const Tensor& bt = bias.value();
  Tensor xhat(x.shape());
  std::vector<double> inv_std(rows);
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += x[r * cols + c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = x[r * cols + c] - mu;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      const double xh = (x[r * cols + c] - mu) * is;
      xhat[r * cols + c] = xh;
      out[r * cols + c] = xh * gm[c] + bt[c];
    }
  }
  const std::uint32_t ia = a.id(), ig = gain.id(), ib = bias.id();
  return gr.record(
      std::move(out), {a, gain, bias},
      [ia, ig, ib, rows, cols, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Graph& g, std::uint32_t self) {
        const Tensor& gy = g.node_grad(self);
        const Tensor& gm = g.node_value(ig);
        if (Tensor* dg = g.accumulator(ig))
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) (*dg)[c] += gy[r * cols + c] * xhat[r * cols + c];
        if (Tensor* db = g.accumulator(ib))
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) (*db)[c] += gy[r * cols + c];
        Tensor* da = g.accumulator(ia);
        if (!da) return;
        const double n = static_cast<double>(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            const double dxh = gy[r * cols + c] * gm[c];
            m1 += dxh;
            m2 += dxh * xhat[r * cols + c];
          }
          m1 /= n;
          m2 /= n;
          for (std::size_t c = 0; c < cols; ++c) {
            const double dxh = gy[r * cols + c] * gm[c];
            (*da)[r * cols + c] += inv_std[r] * (dxh - m1 - xhat[r * cols + c] * m2);
          }
        }
      });
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Graph& gr = parts.front().graph();
  for (const Var& p : parts) same_graph(parts.front(), p);
  const Tensor& first = parts.front().value();
  if (axis == 0) {
    const bool vectors = first.rank() == 1;
    const std::size_t cols = first.cols();
    std::size_t rows = 0;
    std::vector<double> v;
    for (const Var& p : parts) {
      const Tensor& t = p.value();
      if ((t.rank() == 1) != vectors || (!vectors && t.cols() != cols))
        throw ShapeError("concat axis 0", first.shape(), t.shape());
      rows += vectors ? t.size() : t.rows();
      v.insert(v.end(), t.values().begin(), t.values().end());
    }
    Shape shape = vectors ? Shape{rows} : Shape{rows, cols};
    std::vector<std::uint32_t> ids;
    for (const Var& p : parts) ids.push_back(p.id());
    return gr.record(Tensor(std::move(shape), std::move(v)), parts,
                     [ids](Graph& g, std::uint32_t self) {
                       auto gy = g.node_grad(self).values();
                       std::size_t off = 0;
                       for (std::uint32_t id : ids) {
                         const std::size_t n = g.node_value(id).size();
                         if (Tensor* d = g.accumulator(id)) {
                           auto dv = d->values();
                           for (std::size_t i = 0; i < n; ++i) dv[i] += gy[off + i];
                         }
                         off += n;
                       }
                     });
  }
  if (axis != 1 && axis != -1) throw ShapeError("concat: unsupported axis " + std::to_string(axis));
  const std::size_t rows = first.rows();
  std::size_t cols = 0;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    if (p.value().rows() != rows) throw ShapeError("concat axis 1", first.shape(), p.shape());
    widths.push_back(p.value().cols());
    cols += widths.back();
  }
  Tensor out(first.rank() == 1 ? Shape{cols} : Shape{rows, cols});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& t = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < widths[k]; ++c) out[r * cols + off + c] = t[r * widths[k] + c];
    off += widths[k];
  }
  std::vector<std::uint32_t> ids;
  for (const Var& p : parts) ids.push_back(p.id());
  return gr.record(std::move(out), parts, [ids, widths, rows, cols](Graph& g, std::uint32_t self) {
    const Tensor& gy = g.node_grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (Tensor* d = g.accumulator(ids[k]))
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < widths[k]; ++c) (*d)[r * widths[k] + c] += gy[r * cols + off + c];
      off += widths[k];
    }
  });
}

Var slice(Var a, int axis, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  const std::uint32_t ia = a.id();
  if (begin >= end) throw ShapeError("slice: empty range on " + to_string(x.shape()));
  if (axis == 0) {
    const bool vector = x.rank() == 1;
    const std::size_t extent = vector ? x.size() : x.rows();
    const std::size_t width = vector ? 1 : x.cols();
    if (end > extent) throw ShapeError("slice rows [" + std::to_string(begin) + ", " +
                                       std::to_string(end) + ") of " + to_string(x.shape()));
    std::vector<double> v(x.values().begin() + static_cast<std::ptrdiff_t>(begin * width),
                          x.values().begin() + static_cast<std::ptrdiff_t>(end * width));
    Shape shape = vector ? Shape{end - begin} : Shape{end - begin, width};
    return a.graph().record(Tensor(std::move(shape), std::move(v)), {a},
                            [ia, begin, width](Graph& g, std::uint32_t self) {
                              Tensor* d = g.accumulator(ia);
                              if (!d) return;
                              auto gy = g.node_grad(self).values();
                              auto dv = d->values();
                              const std::size_t off = begin * width;
                              for (std::size_t i = 0; i < gy.size(); ++i) dv[off + i] += gy[i];
                            });
  }
  if (axis != 1 && axis != -1) throw ShapeError("slice: unsupported axis " + std::to_string(axis));
  const std::size_t rows = x.rows(), cols = x.cols();
  if (end > cols) throw ShapeError("slice cols [" + std::to_string(begin) + ", " +
                                   std::to_string(end) + ") of " + to_string(x.shape()));
  const std::size_t w = end - begin;
  Tensor out(x.rank() == 1 ? Shape{w} : Shape{rows, w});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < w; ++c) out[r * w + c] = x[r * cols + begin + c];
  return a.graph().record(std::move(out), {a}, [ia, begin, w, rows, cols](Graph& g, std::uint32_t self) {
    Tensor* d = g.accumulator(ia);
    if (!d) return;
    const Tensor& gy = g.node_grad(self);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < w; ++c) (*d)[r * cols + begin + c] += gy[r * w + c];
  });
}

Var reshape(Var a, Shape shape) {
  const Tensor& x = a.value();
  if (element_count(shape) != x.size()) throw ShapeError("reshape", x.shape(), shape);
  const std::uint32_t ia = a.id();
  return a.graph().record(Tensor(std::move(shape), std::vector<double>(x.values().begin(), x.values().end())),
                          {a}, [ia](Graph& g, std::uint32_t self) {
                            Tensor* d = g.accumulator(ia);
                            if (!d) return;
                            auto gy = g.node_grad(self).values();
                            auto dv = d->values();
                            for (std::size_t i = 0; i < dv.size(); ++i) dv[i] += gy[i];
                          });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const std::uint32_t ia = a.id();
  return a.graph().record(Tensor::scalar(s), {a}, [ia](Graph& g, std::uint32_t self) {
    Tensor* d = g.accumulator(ia);
    if (!d) return;
    const double gy = g.node_grad(self)[0];
    for (double& v : d->values()) v += gy;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

}  // namespace m2oe2::diff
