// Copyright 2026 The mlfsc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mlfsc/autodiff.hpp"
#include "mlfsc/error.hpp"

namespace mlfsc::ad {
namespace {

[[noreturn]] void shape_error(std::string_view op, const Shape& a,
                              const Shape& b) {
  throw Error("shape-mismatch", std::string(op) + ": incompatible shapes " +
                                    shape_string(a) + " and " +
                                    shape_string(b));
}

[[noreturn]] void shape_error(std::string_view op, const Shape& a) {
  throw Error("shape-mismatch",
              std::string(op) + ": unsupported shape " + shape_string(a));
}

Tape& common_tape(Var a, Var b) {
  check(&a.tape() == &b.tape(), "invalid-var", "operands on different tapes");
  return a.tape();
}

enum class Broadcast { kNone, kLeftScalar, kRightScalar };

Broadcast broadcast_mode(std::string_view op, const Tensor& a,
                         const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (b.size() == 1) return Broadcast::kRightScalar;
  if (a.size() == 1) return Broadcast::kLeftScalar;
  shape_error(op, a.shape(), b.shape());
}

// Splits a shape around an axis into (outer, axis extent, inner) so that
// structural ops can be written once for every rank.
struct AxisView {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisView axis_view(const Shape& s, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename F>
Var unary(OpKind kind, Var a, F&& forward_fn,
          std::function<double(double x, double y)> derivative) {
  const Tensor& x = a.value();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = forward_fn(x[i]);
  Tensor y(x.shape(), std::move(out));
  return a.tape().record(
      kind, y, {a},
      [x, y, derivative = std::move(derivative)](std::span<const double> g,
                                                 GradSlots in) {
        for (std::size_t i = 0; i < g.size(); ++i)
          in[0][i] += g[i] * derivative(x[i], y[i]);
      });
}

}  // namespace

Var add(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast mode = broadcast_mode("add", x, y);
  const Tensor& big = mode == Broadcast::kLeftScalar ? y : x;
  std::vector<double> out(big.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (mode == Broadcast::kLeftScalar ? x[0] : x[i]) +
             (mode == Broadcast::kRightScalar ? y[0] : y[i]);
  }
  return tape.record(OpKind::kAdd, Tensor(big.shape(), std::move(out)), {a, b},
                     [mode](std::span<const double> g, GradSlots in) {
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         if (!in[0].empty())
                           in[0][mode == Broadcast::kLeftScalar ? 0 : i] += g[i];
                         if (!in[1].empty())
                           in[1][mode == Broadcast::kRightScalar ? 0 : i] += g[i];
                       }
                     });
}

Var sub(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast mode = broadcast_mode("sub", x, y);
  const Tensor& big = mode == Broadcast::kLeftScalar ? y : x;
  std::vector<double> out(big.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (mode == Broadcast::kLeftScalar ? x[0] : x[i]) -
             (mode == Broadcast::kRightScalar ? y[0] : y[i]);
  }
  return tape.record(OpKind::kSub, Tensor(big.shape(), std::move(out)), {a, b},
                     [mode](std::span<const double> g, GradSlots in) {
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         if (!in[0].empty())
                           in[0][mode == Broadcast::kLeftScalar ? 0 : i] += g[i];
                         if (!in[1].empty())
                           in[1][mode == Broadcast::kRightScalar ? 0 : i] -= g[i];
                       }
                     });
}

Var mul(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  const Tensor x = a.value();
  const Tensor y = b.value();
  const Broadcast mode = broadcast_mode("mul", x, y);
  const Tensor& big = mode == Broadcast::kLeftScalar ? y : x;
  std::vector<double> out(big.size());
  auto xi = [x, mode](std::size_t i) {
    return mode == Broadcast::kLeftScalar ? x[0] : x[i];
  };
  auto yi = [y, mode](std::size_t i) {
    return mode == Broadcast::kRightScalar ? y[0] : y[i];
  };
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xi(i) * yi(i);
  return tape.record(
      OpKind::kMul, Tensor(big.shape(), std::move(out)), {a, b},
      [mode, xi, yi](std::span<const double> g, GradSlots in) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (!in[0].empty())
            in[0][mode == Broadcast::kLeftScalar ? 0 : i] += g[i] * yi(i);
          if (!in[1].empty())
            in[1][mode == Broadcast::kRightScalar ? 0 : i] += g[i] * xi(i);
        }
      });
}

Var scale(Var a, double factor) {
  const Tensor& x = a.value();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = factor * x[i];
  return a.tape().record(OpKind::kScale, Tensor(x.shape(), std::move(out)), {a},
                         [factor](std::span<const double> g, GradSlots in) {
                           for (std::size_t i = 0; i < g.size(); ++i)
                             in[0][i] += factor * g[i];
                         });
}

Var matmul(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  const Tensor x = a.value();
  const Tensor y = b.value();
  if (x.rank() != 2 || y.rank() != 2 || x.dim(1) != y.dim(0))
    shape_error("matmul", x.shape(), y.shape());
  const std::size_t m = x.dim(0), k = x.dim(1), n = y.dim(1);
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x[i * k + p];
      if (xv == 0.0) continue;
      const double* yrow = y.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += xv * yrow[j];
    }
  }
  return tape.record(
      OpKind::kMatmul, Tensor({m, n}, std::move(out)), {a, b},
      [x, y, m, k, n](std::span<const double> g, GradSlots in) {
        if (!in[0].empty()) {  // dX = G * Y^T
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j)
                acc += g[i * n + j] * y[p * n + j];
              in[0][i * k + p] += acc;
            }
        }
        if (!in[1].empty()) {  // dY = X^T * G
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const double xv = x[i * k + p];
              if (xv == 0.0) continue;
              for (std::size_t j = 0; j < n; ++j)
                in[1][p * n + j] += xv * g[i * n + j];
            }
        }
      });
}

Var matvec(Var a, Var v) {
  Tape& tape = common_tape(a, v);
  const Tensor m = a.value();
  const Tensor x = v.value();
  if (m.rank() != 2 || x.rank() != 1 || m.dim(1) != x.dim(0))
    shape_error("matvec", m.shape(), x.shape());
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  std::vector<double> out(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += m[i * cols + j] * x[j];
    out[i] = acc;
  }
  return tape.record(OpKind::kMatvec, Tensor({rows}, std::move(out)), {a, v},
                     [m, x, rows, cols](std::span<const double> g, GradSlots in) {
                       for (std::size_t i = 0; i < rows; ++i)
                         for (std::size_t j = 0; j < cols; ++j) {
                           if (!in[0].empty()) in[0][i * cols + j] += g[i] * x[j];
                           if (!in[1].empty()) in[1][j] += g[i] * m[i * cols + j];
                         }
                     });
}

Var transpose(Var a) {
  const Tensor& x = a.value();
  if (x.rank() != 2) shape_error("transpose", x.shape());
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  return a.tape().record(OpKind::kTranspose, Tensor({c, r}, std::move(out)), {a},
                         [r, c](std::span<const double> g, GradSlots in) {
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < c; ++j)
                               in[0][i * c + j] += g[j * r + i];
                         });
}

Var reshape(Var a, Shape shape) {
  return a.tape().record(OpKind::kReshape, a.value().reshaped(std::move(shape)),
                         {a}, [](std::span<const double> g, GradSlots in) {
                           for (std::size_t i = 0; i < g.size(); ++i)
                             in[0][i] += g[i];
                         });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return a.tape().record(OpKind::kSum, Tensor::scalar(total), {a},
                         [](std::span<const double> g, GradSlots in) {
                           for (double& d : in[0]) d += g[0];
                         });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.size());
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return a.tape().record(OpKind::kMean, Tensor::scalar(total / n), {a},
                         [n](std::span<const double> g, GradSlots in) {
                           for (double& d : in[0]) d += g[0] / n;
                         });
}

Var mean(Var a, std::size_t axis) {
  const Tensor& x = a.value();
  if (x.rank() != 2 || axis > 1) shape_error("mean-axis", x.shape());
  const std::size_t r = x.dim(0), c = x.dim(1);
  const std::size_t out_n = axis == 0 ? c : r;
  const double count = static_cast<double>(axis == 0 ? r : c);
  std::vector<double> out(out_n, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[axis == 0 ? j : i] += x[i * c + j];
  for (double& v : out) v /= count;
  return a.tape().record(
      OpKind::kMeanAxis, Tensor({out_n}, std::move(out)), {a},
      [r, c, axis, count](std::span<const double> g, GradSlots in) {
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j)
            in[0][i * c + j] += g[axis == 0 ? j : i] / count;
      });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  check(!parts.empty(), "shape-mismatch", "concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) shape_error("concat", first);
  Shape shape = first;
  shape[axis] = 0;
  std::vector<std::size_t> extents;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i)
      ok = i == axis || s[i] == first[i];
    if (!ok) shape_error("concat", first, s);
    shape[axis] += s[axis];
    extents.push_back(s[axis]);
  }
  const AxisView out_view = axis_view(shape, axis);
  std::vector<double> out(shape_size(shape));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& x = parts[p].value();
    const std::size_t block = extents[p] * out_view.inner;
    for (std::size_t o = 0; o < out_view.outer; ++o)
      std::copy_n(x.data() + o * block, block,
                  out.data() + (o * out_view.extent + offset) * out_view.inner);
    offset += extents[p];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().record(
      OpKind::kConcat, Tensor(shape, std::move(out)), std::move(inputs),
      [out_view, extents](std::span<const double> g, GradSlots in) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < extents.size(); ++p) {
          const std::size_t block = extents[p] * out_view.inner;
          if (!in[p].empty()) {
            for (std::size_t o = 0; o < out_view.outer; ++o)
              for (std::size_t t = 0; t < block; ++t)
                in[p][o * block + t] +=
                    g[(o * out_view.extent + off) * out_view.inner + t];
          }
          off += extents[p];
        }
      });
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = a.shape();
  if (axis >= s.size() || begin >= end || end > s[axis]) shape_error("slice", s);
  const AxisView v = axis_view(s, axis);
  Shape shape = s;
  shape[axis] = end - begin;
  const std::size_t block = (end - begin) * v.inner;
  const Tensor& x = a.value();
  std::vector<double> out(v.outer * block);
  for (std::size_t o = 0; o < v.outer; ++o)
    std::copy_n(x.data() + (o * v.extent + begin) * v.inner, block,
                out.data() + o * block);
  return a.tape().record(OpKind::kSlice, Tensor(shape, std::move(out)), {a},
                         [v, begin, block](std::span<const double> g,
                                           GradSlots in) {
                           for (std::size_t o = 0; o < v.outer; ++o)
                             for (std::size_t t = 0; t < block; ++t)
                               in[0][(o * v.extent + begin) * v.inner + t] +=
                                   g[o * block + t];
                         });
}

std::vector<Var> split(Var a, std::size_t axis, std::size_t parts) {
  const Shape& s = a.shape();
  if (axis >= s.size() || parts == 0 || s[axis] % parts != 0)
    throw Error("shape-mismatch", "split: cannot divide axis " +
                                      std::to_string(axis) + " of " +
                                      shape_string(s) + " into " +
                                      std::to_string(parts) + " parts");
  const std::size_t width = s[axis] / parts;
  std::vector<Var> out;
  out.reserve(parts);
  for (std::size_t p = 0; p < parts; ++p)
    out.push_back(slice(a, axis, p * width, (p + 1) * width));
  return out;
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  const Tensor& x = a.value();
  if (x.rank() != 2) shape_error("gather-rows", x.shape());
  check(!rows.empty(), "shape-mismatch", "gather-rows: empty index list");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  std::vector<double> out(idx.size() * c);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    check(idx[i] < r, "index-out-of-range",
          "gather-rows: row " + std::to_string(idx[i]) + " of " +
              std::to_string(r));
    std::copy_n(x.data() + idx[i] * c, c, out.data() + i * c);
  }
  const std::size_t n = idx.size();
  return a.tape().record(OpKind::kGatherRows, Tensor({n, c}, std::move(out)),
                         {a}, [idx, c](std::span<const double> g, GradSlots in) {
                           for (std::size_t i = 0; i < idx.size(); ++i)
                             for (std::size_t j = 0; j < c; ++j)
                               in[0][idx[i] * c + j] += g[i * c + j];
                         });
}

Var row(Var a, std::size_t r) {
  const std::size_t idx[] = {r};
  return reshape(gather_rows(a, idx), Shape{a.shape()[1]});
}

Var sigmoid(Var a) {
  return unary(OpKind::kSigmoid, a, stable_sigmoid,
               [](double, double y) { return y * (1.0 - y); });
}

Var log(Var a) {
  for (double v : a.value().values()) {
    check(v > 0.0 && std::isfinite(v), "domain",
          "log: input must be positive and finite, got " + std::to_string(v));
  }
  return unary(OpKind::kLog, a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Var relu(Var a) {
  return unary(OpKind::kRelu, a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var gelu(Var a) {
  return unary(OpKind::kGelu, a, [](double x) { return x * normal_cdf(x); },
               [](double x, double) { return normal_cdf(x) + x * normal_pdf(x); });
}

Var softmax(Var a) {
  const Tensor& x = a.value();
  check(x.rank() >= 1, "shape-mismatch", "softmax: needs rank >= 1");
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.size() / width;
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * width;
    double* o = out.data() + r * width;
    const double peak = *std::max_element(in, in + width);
    double total = 0.0;
    for (std::size_t j = 0; j < width; ++j) total += o[j] = std::exp(in[j] - peak);
    for (std::size_t j = 0; j < width; ++j) o[j] /= total;
  }
  Tensor y(x.shape(), std::move(out));
  return a.tape().record(OpKind::kSoftmax, y, {a},
                         [y, rows, width](std::span<const double> g,
                                          GradSlots in) {
                           for (std::size_t r = 0; r < rows; ++r) {
                             const std::size_t base = r * width;
                             double dot = 0.0;
                             for (std::size_t j = 0; j < width; ++j)
                               dot += g[base + j] * y[base + j];
                             for (std::size_t j = 0; j < width; ++j)
                               in[0][base + j] += y[base + j] * (g[base + j] - dot);
                           }
                         });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor in = x.value();
  check(in.rank() >= 1, "shape-mismatch", "layer-norm: needs rank >= 1");
  const std::size_t width = in.shape().back();
  if (gain.shape() != Shape{width} || bias.shape() != Shape{width})
    throw Error("shape-mismatch", "layer-norm: gain/bias " +
                                      shape_string(gain.shape()) + "/" +
                                      shape_string(bias.shape()) +
                                      " for input " + shape_string(in.shape()));
  const std::size_t rows = in.size() / width;
  const Tensor gv = gain.value();
  const Tensor bv = bias.value();
  std::vector<double> xhat(in.size()), out(in.size()), inv_sd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* v = in.data() + r * width;
    double mu = 0.0;
    for (std::size_t j = 0; j < width; ++j) mu += v[j];
    mu /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t j = 0; j < width; ++j) var += (v[j] - mu) * (v[j] - mu);
    var /= static_cast<double>(width);
    inv_sd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < width; ++j) {
      const std::size_t i = r * width + j;
      xhat[i] = (v[j] - mu) * inv_sd[r];
      out[i] = gv[j] * xhat[i] + bv[j];
    }
  }
  return x.tape().record(
      OpKind::kLayerNorm, Tensor(in.shape(), std::move(out)), {x, gain, bias},
      [xhat = std::move(xhat), inv_sd = std::move(inv_sd), gv, rows, width](
          std::span<const double> g, GradSlots grads) {
        const double w = static_cast<double>(width);
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t base = r * width;
          double mean_gx = 0.0, mean_gx_xhat = 0.0;
          for (std::size_t j = 0; j < width; ++j) {
            const double gx = g[base + j] * gv[j];
            mean_gx += gx;
            mean_gx_xhat += gx * xhat[base + j];
            if (!grads[1].empty()) grads[1][j] += g[base + j] * xhat[base + j];
            if (!grads[2].empty()) grads[2][j] += g[base + j];
          }
          mean_gx /= w;
          mean_gx_xhat /= w;
          if (!grads[0].empty()) {
            for (std::size_t j = 0; j < width; ++j) {
              const double gx = g[base + j] * gv[j];
              grads[0][base + j] +=
                  inv_sd[r] * (gx - mean_gx - xhat[base + j] * mean_gx_xhat);
            }
          }
        }
      });
}

Var cosine(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  const Tensor x = a.value();
  const Tensor y = b.value();
  if (x.rank() != 1 || x.shape() != y.shape())
    shape_error("cosine", x.shape(), y.shape());
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * y[i];
    nx += x[i] * x[i];
    ny += y[i] * y[i];
  }
  check(nx > 0.0 && ny > 0.0, "degenerate-vector",
        "cosine of a zero-norm vector");
  nx = std::sqrt(nx);
  ny = std::sqrt(ny);
  const double c = dot / (nx * ny);
  return tape.record(OpKind::kCosine, Tensor::scalar(c), {a, b},
                     [x, y, nx, ny, c](std::span<const double> g, GradSlots in) {
                       for (std::size_t i = 0; i < x.size(); ++i) {
                         if (!in[0].empty())
                           in[0][i] += g[0] * (y[i] / (nx * ny) - c * x[i] / (nx * nx));
                         if (!in[1].empty())
                           in[1][i] += g[0] * (x[i] / (nx * ny) - c * y[i] / (ny * ny));
                       }
                     });
}

Var normalize_rows(Var a) {
  const Tensor& x = a.value();
  if (x.rank() != 2) shape_error("normalize-rows", x.shape());
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(x.size()), norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    double n2 = 0.0;
    for (std::size_t j = 0; j < c; ++j) n2 += x[i * c + j] * x[i * c + j];
    check(n2 > 0.0, "degenerate-vector",
          "normalize-rows: row " + std::to_string(i) + " has zero norm");
    norms[i] = std::sqrt(n2);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] / norms[i];
  }
  Tensor y(x.shape(), std::move(out));
  return a.tape().record(
      OpKind::kNormalizeRows, y, {a},
      [y, norms = std::move(norms), r, c](std::span<const double> g,
                                          GradSlots in) {
        for (std::size_t i = 0; i < r; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
          for (std::size_t j = 0; j < c; ++j)
            in[0][i * c + j] += (g[i * c + j] - y[i * c + j] * dot) / norms[i];
        }
      });
}

Var dropout(Var a, double rate, std::mt19937_64& rng, bool train) {
  check(rate >= 0.0 && rate < 1.0, "invalid-argument",
        "dropout rate must be in [0, 1)");
  if (!train || rate == 0.0) return a;
  const Tensor& x = a.value();
  std::bernoulli_distribution keep(1.0 - rate);
  const double factor = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size()), out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = keep(rng) ? factor : 0.0;
    out[i] = x[i] * mask[i];
  }
  return a.tape().record(OpKind::kDropout, Tensor(x.shape(), std::move(out)),
                         {a}, [mask = std::move(mask)](std::span<const double> g,
                                                       GradSlots in) {
                           for (std::size_t i = 0; i < g.size(); ++i)
                             in[0][i] += g[i] * mask[i];
                         });
}

Var bce_with_logits(Var logits, const Tensor& targets) {
  const Tensor s = logits.value();
  if (s.shape() != targets.shape())
    shape_error("bce-with-logits", s.shape(), targets.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double y = targets[i];
    check(y >= 0.0 && y <= 1.0, "domain", "bce target outside [0, 1]");
    const double v = s[i];
    total += std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))) - y * v;
  }
  return logits.tape().record(
      OpKind::kBceWithLogits, Tensor::scalar(total), {logits},
      [s, targets](std::span<const double> g, GradSlots in) {
        for (std::size_t i = 0; i < s.size(); ++i)
          in[0][i] += g[0] * (stable_sigmoid(s[i]) - targets[i]);
      });
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel,
                               std::size_t stride, std::size_t pad) {
  check(in + 2 * pad >= kernel && stride > 0, "shape-mismatch",
        "convolution kernel larger than padded input");
  return (in + 2 * pad - kernel) / stride + 1;
}

Var conv2d(Var x, Var weight, Var bias, std::size_t stride, std::size_t pad) {
  const Tensor in = x.value();
  const Tensor w = weight.value();
  const Tensor b = bias.value();
  if (in.rank() != 3 || w.rank() != 4 || w.dim(1) != in.dim(0))
    shape_error("conv2d", in.shape(), w.shape());
  if (b.shape() != Shape{w.dim(0)}) shape_error("conv2d", w.shape(), b.shape());
  const std::size_t c_in = in.dim(0), h = in.dim(1), wd = in.dim(2);
  const std::size_t c_out = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::size_t ho = conv_output_extent(h, kh, stride, pad);
  const std::size_t wo = conv_output_extent(wd, kw, stride, pad);

  // Visits every (output, input, kernel) triple that lands inside the image.
  auto for_each_tap = [=](auto&& fn) {
    for (std::size_t o = 0; o < c_out; ++o)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox)
          for (std::size_t c = 0; c < c_in; ++c)
            for (std::size_t ky = 0; ky < kh; ++ky) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                        static_cast<std::ptrdiff_t>(pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                          static_cast<std::ptrdiff_t>(pad);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
                fn((o * ho + oy) * wo + ox,
                   (c * h + static_cast<std::size_t>(iy)) * wd + static_cast<std::size_t>(ix),
                   ((o * c_in + c) * kh + ky) * kw + kx);
              }
            }
  };

  std::vector<double> out(c_out * ho * wo);
  for (std::size_t o = 0; o < c_out; ++o)
    std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(o * ho * wo), ho * wo, b[o]);
  for_each_tap([&](std::size_t oi, std::size_t ii, std::size_t wi) {
    out[oi] += w[wi] * in[ii];
  });
  return x.tape().record(
      OpKind::kConv2d, Tensor({c_out, ho, wo}, std::move(out)), {x, weight, bias},
      [in, w, for_each_tap, ho, wo](std::span<const double> g, GradSlots grads) {
        for_each_tap([&](std::size_t oi, std::size_t ii, std::size_t wi) {
          if (!grads[0].empty()) grads[0][ii] += g[oi] * w[wi];
          if (!grads[1].empty()) grads[1][wi] += g[oi] * in[ii];
        });
        if (!grads[2].empty()) {
          for (std::size_t i = 0; i < g.size(); ++i) grads[2][i / (ho * wo)] += g[i];
        }
      });
}

}  // namespace mlfsc::ad
