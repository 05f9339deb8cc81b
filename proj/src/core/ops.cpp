#include "core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace mc {

namespace {

int norm_axis(int axis, int64_t ndim, const char* op) {
  if (axis < 0) axis += static_cast<int>(ndim);
  MC_CHECK_SHAPE(axis >= 0 && axis < ndim, std::string(op) + ": axis out of range");
  return axis;
}

// Decompose a shape around `axis` into (outer, n, inner) extents.
struct AxisView {
  int64_t outer = 1, n = 1, inner = 1;
};

AxisView axis_view(const Shape& s, int axis) {
  AxisView v;
  for (int i = 0; i < axis; ++i) v.outer *= s[i];
  v.n = s[axis];
  for (size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const size_t n = std::max(a.size(), b.size());
  Shape out(n);
  for (size_t i = 0; i < n; ++i) {
    const int64_t da = i < n - a.size() ? 1 : a[i - (n - a.size())];
    const int64_t db = i < n - b.size() ? 1 : b[i - (n - b.size())];
    MC_CHECK_SHAPE(da == db || da == 1 || db == 1,
                   std::string(op) + ": shapes " + shape_str(a) + " and " +
                       shape_str(b) + " do not broadcast");
    out[i] = std::max(da, db);
  }
  return out;
}

// Flat-index map from output elements back into a broadcast input.
std::shared_ptr<std::vector<int64_t>> index_map(const Shape& in, const Shape& out) {
  const int64_t n_out = shape_numel(out);
  auto map = std::make_shared<std::vector<int64_t>>(n_out);
  const size_t pad = out.size() - in.size();
  std::vector<int64_t> in_stride(out.size(), 0);
  int64_t stride = 1;
  for (size_t i = out.size(); i-- > 0;) {
    if (i >= pad && in[i - pad] != 1) {
      in_stride[i] = stride;
      stride *= in[i - pad];
    }
  }
  std::vector<int64_t> counter(out.size(), 0);
  int64_t in_idx = 0;
  for (int64_t o = 0; o < n_out; ++o) {
    (*map)[o] = in_idx;
    for (size_t i = out.size(); i-- > 0;) {
      if (++counter[i] < out[i]) {
        in_idx += in_stride[i];
        break;
      }
      counter[i] = 0;
      in_idx -= in_stride[i] * (out[i] - 1);
    }
  }
  return map;
}

struct BinDesc {
  const char* name;
  double (*f)(double, double);
  double (*dfda)(double, double);
  double (*dfdb)(double, double);
};

Tensor apply_binary(const Tensor& a, const Tensor& b, const BinDesc& op) {
  MC_CHECK(a.defined() && b.defined(), std::string(op.name) + ": undefined input");
  const auto ad = a.data();
  const auto bd = b.data();

  if (a.shape() == b.shape()) {
    const int64_t n = a.numel();
    std::vector<double> out(n);
    for (int64_t i = 0; i < n; ++i) out[i] = op.f(ad[i], bd[i]);
    auto ai = a.impl();
    auto bi = b.impl();
    return make_op_result(
        a.shape(), std::move(out), {a, b}, [ai, bi, op](const TensorImpl& self) {
          const int64_t n = self.numel();
          if (ai->requires_grad) {
            ai->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
              ai->grad[i] += op.dfda(ai->data[i], bi->data[i]) * self.grad[i];
          }
          if (bi->requires_grad) {
            bi->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
              bi->grad[i] += op.dfdb(ai->data[i], bi->data[i]) * self.grad[i];
          }
        });
  }

  Shape out_shape = broadcast_shape(a.shape(), b.shape(), op.name);
  const int64_t n = shape_numel(out_shape);
  auto amap = index_map(a.shape(), out_shape);
  auto bmap = index_map(b.shape(), out_shape);
  std::vector<double> out(n);
  for (int64_t i = 0; i < n; ++i) out[i] = op.f(ad[(*amap)[i]], bd[(*bmap)[i]]);
  auto ai = a.impl();
  auto bi = b.impl();
  return make_op_result(
      std::move(out_shape), std::move(out), {a, b},
      [ai, bi, amap, bmap, op](const TensorImpl& self) {
        const int64_t n = self.numel();
        if (ai->requires_grad) {
          ai->ensure_grad();
          for (int64_t i = 0; i < n; ++i) {
            const int64_t j = (*amap)[i];
            ai->grad[j] += op.dfda(ai->data[j], bi->data[(*bmap)[i]]) * self.grad[i];
          }
        }
        if (bi->requires_grad) {
          bi->ensure_grad();
          for (int64_t i = 0; i < n; ++i) {
            const int64_t j = (*bmap)[i];
            bi->grad[j] += op.dfdb(ai->data[(*amap)[i]], bi->data[j]) * self.grad[i];
          }
        }
      });
}

struct UnDesc {
  const char* name;
  double (*f)(double);
  double (*df)(double x, double y);  // receives input and output
};

Tensor apply_unary(const Tensor& x, const UnDesc& op) {
  MC_CHECK(x.defined(), std::string(op.name) + ": undefined input");
  const auto xd = x.data();
  const int64_t n = x.numel();
  std::vector<double> out(n);
  for (int64_t i = 0; i < n; ++i) out[i] = op.f(xd[i]);
  auto xi = x.impl();
  return make_op_result(x.shape(), std::move(out), {x},
                        [xi, op](const TensorImpl& self) {
                          if (!xi->requires_grad) return;
                          xi->ensure_grad();
                          const int64_t n = self.numel();
                          for (int64_t i = 0; i < n; ++i)
                            xi->grad[i] += op.df(xi->data[i], self.data[i]) * self.grad[i];
                        });
}

}  // namespace

// ---- shape ops -------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  MC_CHECK_SHAPE(shape_numel(shape) == x.numel(),
                 "reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  std::vector<double> out(x.data().begin(), x.data().end());
  auto xi = x.impl();
  return make_op_result(std::move(shape), std::move(out), {x},
                        [xi](const TensorImpl& self) {
                          if (!xi->requires_grad) return;
                          xi->ensure_grad();
                          for (int64_t i = 0; i < self.numel(); ++i)
                            xi->grad[i] += self.grad[i];
                        });
}

Tensor transpose(const Tensor& x) {
  MC_CHECK_SHAPE(x.ndim() == 2, "transpose: expected 2-D, got " + shape_str(x.shape()));
  const int64_t r = x.size(0), c = x.size(1);
  const auto xd = x.data();
  std::vector<double> out(static_cast<size_t>(r * c));
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out[j * r + i] = xd[i * c + j];
  auto xi = x.impl();
  return make_op_result({c, r}, std::move(out), {x},
                        [xi, r, c](const TensorImpl& self) {
                          if (!xi->requires_grad) return;
                          xi->ensure_grad();
                          for (int64_t i = 0; i < r; ++i)
                            for (int64_t j = 0; j < c; ++j)
                              xi->grad[i * c + j] += self.grad[j * r + i];
                        });
}

Tensor slice(const Tensor& x, int axis, int64_t start, int64_t stop) {
  const int ax = norm_axis(axis, x.ndim(), "slice");
  const auto& s = x.shape();
  MC_CHECK_SHAPE(start >= 0 && start <= stop && stop <= s[ax],
                 "slice: range [" + std::to_string(start) + "," + std::to_string(stop) +
                     ") invalid for " + shape_str(s));
  const auto v = axis_view(s, ax);
  const int64_t m = stop - start;
  Shape out_shape = s;
  out_shape[ax] = m;
  std::vector<double> out(static_cast<size_t>(v.outer * m * v.inner));
  const auto xd = x.data();
  for (int64_t o = 0; o < v.outer; ++o)
    for (int64_t i = 0; i < m; ++i)
      std::copy_n(&xd[(o * v.n + start + i) * v.inner], v.inner,
                  &out[(o * m + i) * v.inner]);
  auto xi = x.impl();
  return make_op_result(std::move(out_shape), std::move(out), {x},
                        [xi, v, m, start](const TensorImpl& self) {
                          if (!xi->requires_grad) return;
                          xi->ensure_grad();
                          for (int64_t o = 0; o < v.outer; ++o)
                            for (int64_t i = 0; i < m; ++i) {
                              const double* g = &self.grad[(o * m + i) * v.inner];
                              double* dst = &xi->grad[(o * v.n + start + i) * v.inner];
                              for (int64_t j = 0; j < v.inner; ++j) dst[j] += g[j];
                            }
                        });
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
  MC_CHECK(!xs.empty(), "concat: no inputs");
  const int ax = norm_axis(axis, xs[0].ndim(), "concat");
  Shape out_shape = xs[0].shape();
  int64_t total = 0;
  for (const auto& x : xs) {
    MC_CHECK_SHAPE(x.ndim() == xs[0].ndim(), "concat: rank mismatch");
    for (int64_t d = 0; d < x.ndim(); ++d)
      MC_CHECK_SHAPE(d == ax || x.shape()[d] == out_shape[d],
                     "concat: shape mismatch off the concat axis");
    total += x.shape()[ax];
  }
  out_shape[ax] = total;
  const auto v = axis_view(out_shape, ax);
  std::vector<double> out(static_cast<size_t>(v.outer * v.n * v.inner));
  std::vector<int64_t> offsets;  // start of each input along the axis
  int64_t at = 0;
  for (const auto& x : xs) {
    offsets.push_back(at);
    const int64_t m = x.shape()[ax];
    const auto xd = x.data();
    for (int64_t o = 0; o < v.outer; ++o)
      for (int64_t i = 0; i < m; ++i)
        std::copy_n(&xd[(o * m + i) * v.inner], v.inner,
                    &out[(o * v.n + at + i) * v.inner]);
    at += m;
  }
  std::vector<std::shared_ptr<TensorImpl>> impls;
  std::vector<int64_t> widths;
  for (const auto& x : xs) {
    impls.push_back(x.impl());
    widths.push_back(x.shape()[ax]);
  }
  return make_op_result(
      std::move(out_shape), std::move(out), xs,
      [impls, widths, offsets, v](const TensorImpl& self) {
        for (size_t p = 0; p < impls.size(); ++p) {
          auto& xi = *impls[p];
          if (!xi.requires_grad) continue;
          xi.ensure_grad();
          const int64_t m = widths[p], at = offsets[p];
          for (int64_t o = 0; o < v.outer; ++o)
            for (int64_t i = 0; i < m; ++i) {
              const double* g = &self.grad[(o * v.n + at + i) * v.inner];
              double* dst = &xi.grad[(o * m + i) * v.inner];
              for (int64_t j = 0; j < v.inner; ++j) dst[j] += g[j];
            }
        }
      });
}

Tensor stack(const std::vector<Tensor>& xs) {
  MC_CHECK(!xs.empty(), "stack: no inputs");
  std::vector<Tensor> rows;
  rows.reserve(xs.size());
  for (const auto& x : xs) {
    Shape s = x.shape();
    s.insert(s.begin(), 1);
    rows.push_back(reshape(x, std::move(s)));
  }
  return concat(rows, 0);
}

// ---- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  static const BinDesc d{"add", [](double x, double y) { return x + y; },
                         [](double, double) { return 1.0; },
                         [](double, double) { return 1.0; }};
  return apply_binary(a, b, d);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  static const BinDesc d{"sub", [](double x, double y) { return x - y; },
                         [](double, double) { return 1.0; },
                         [](double, double) { return -1.0; }};
  return apply_binary(a, b, d);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  static const BinDesc d{"mul", [](double x, double y) { return x * y; },
                         [](double, double y) { return y; },
                         [](double x, double) { return x; }};
  return apply_binary(a, b, d);
}

Tensor div(const Tensor& a, const Tensor& b) {
  static const BinDesc d{"div", [](double x, double y) { return x / y; },
                         [](double, double y) { return 1.0 / y; },
                         [](double x, double y) { return -x / (y * y); }};
  return apply_binary(a, b, d);
}

Tensor scale(const Tensor& x, double s) {
  const auto xd = x.data();
  const int64_t n = x.numel();
  std::vector<double> out(n);
  for (int64_t i = 0; i < n; ++i) out[i] = xd[i] * s;
  auto xi = x.impl();
  return make_op_result(x.shape(), std::move(out), {x},
                        [xi, s](const TensorImpl& self) {
                          if (!xi->requires_grad) return;
                          xi->ensure_grad();
                          for (int64_t i = 0; i < self.numel(); ++i)
                            xi->grad[i] += s * self.grad[i];
                        });
}

Tensor shift(const Tensor& x, double c) {
  const auto xd = x.data();
  const int64_t n = x.numel();
  std::vector<double> out(n);
  for (int64_t i = 0; i < n; ++i) out[i] = xd[i] + c;
  auto xi = x.impl();
  return make_op_result(x.shape(), std::move(out), {x},
                        [xi](const TensorImpl& self) {
                          if (!xi->requires_grad) return;
                          xi->ensure_grad();
                          for (int64_t i = 0; i < self.numel(); ++i)
                            xi->grad[i] += self.grad[i];
                        });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor exp(const Tensor& x) {
  static const UnDesc d{"exp", [](double v) { return std::exp(v); },
                        [](double, double y) { return y; }};
  return apply_unary(x, d);
}

Tensor log(const Tensor& x) {
  static const UnDesc d{"log", [](double v) { return std::log(v); },
                        [](double v, double) { return 1.0 / v; }};
  return apply_unary(x, d);
}

Tensor sqrt(const Tensor& x) {
  static const UnDesc d{"sqrt", [](double v) { return std::sqrt(v); },
                        [](double, double y) { return 0.5 / y; }};
  return apply_unary(x, d);
}

Tensor sigmoid(const Tensor& x) {
  static const UnDesc d{"sigmoid",
                        [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
                        [](double, double y) { return y * (1.0 - y); }};
  return apply_unary(x, d);
}

Tensor swish(const Tensor& x) {
  static const UnDesc d{"swish",
                        [](double v) { return v / (1.0 + std::exp(-v)); },
                        [](double v, double y) {
                          const double s = 1.0 / (1.0 + std::exp(-v));
                          return s + y * (1.0 - s);
                        }};
  return apply_unary(x, d);
}

// ---- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  MC_CHECK_SHAPE(a.defined() && b.defined() && a.ndim() == 2 && b.ndim() == 2,
                 "matmul: expected two 2-D tensors");
  const int64_t m = a.size(0), k = a.size(1), k2 = b.size(0), n = b.size(1);
  MC_CHECK_SHAPE(k == k2, "matmul: inner dimensions disagree, " +
                              shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(static_cast<size_t>(m * n), 0.0);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t p = 0; p < k; ++p) {
      const double aip = ad[i * k + p];
      const double* brow = &bd[p * n];
      double* crow = &out[i * n];
      for (int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  auto ai = a.impl();
  auto bi = b.impl();
  return make_op_result(
      {m, n}, std::move(out), {a, b}, [ai, bi, m, k, n](const TensorImpl& self) {
        const auto& g = self.grad;
        if (ai->requires_grad) {
          ai->ensure_grad();
          // dA = dC · Bᵀ
          for (int64_t i = 0; i < m; ++i)
            for (int64_t p = 0; p < k; ++p) {
              const double* grow = &g[i * n];
              const double* brow = &bi->data[p * n];
              double acc = 0.0;
              for (int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              ai->grad[i * k + p] += acc;
            }
        }
        if (bi->requires_grad) {
          bi->ensure_grad();
          // dB = Aᵀ · dC
          for (int64_t i = 0; i < m; ++i)
            for (int64_t p = 0; p < k; ++p) {
              const double aip = ai->data[i * k + p];
              const double* grow = &g[i * n];
              double* drow = &bi->grad[p * n];
              for (int64_t j = 0; j < n; ++j) drow[j] += aip * grow[j];
            }
        }
      });
}

// ---- reductions ---------------------------------------------------------------

Tensor sum(const Tensor& x) {
  const auto xd = x.data();
  double acc = 0.0;
  for (double v : xd) acc += v;
  auto xi = x.impl();
  return make_op_result({}, {acc}, {x}, [xi](const TensorImpl& self) {
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    const double g = self.grad[0];
    for (auto& v : xi->grad) v += g;
  });
}

Tensor mean(const Tensor& x) {
  MC_CHECK_SHAPE(x.numel() > 0, "mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

namespace {
Shape reduced_shape(const Shape& s, int ax, bool keepdim) {
  Shape out = s;
  if (keepdim) {
    out[ax] = 1;
  } else {
    out.erase(out.begin() + ax);
  }
  return out;
}
}  // namespace

Tensor sum(const Tensor& x, int axis, bool keepdim) {
  const int ax = norm_axis(axis, x.ndim(), "sum");
  const auto v = axis_view(x.shape(), ax);
  const auto xd = x.data();
  std::vector<double> out(static_cast<size_t>(v.outer * v.inner), 0.0);
  for (int64_t o = 0; o < v.outer; ++o)
    for (int64_t i = 0; i < v.n; ++i)
      for (int64_t j = 0; j < v.inner; ++j)
        out[o * v.inner + j] += xd[(o * v.n + i) * v.inner + j];
  auto xi = x.impl();
  return make_op_result(reduced_shape(x.shape(), ax, keepdim), std::move(out), {x},
                        [xi, v](const TensorImpl& self) {
                          if (!xi->requires_grad) return;
                          xi->ensure_grad();
                          for (int64_t o = 0; o < v.outer; ++o)
                            for (int64_t i = 0; i < v.n; ++i)
                              for (int64_t j = 0; j < v.inner; ++j)
                                xi->grad[(o * v.n + i) * v.inner + j] +=
                                    self.grad[o * v.inner + j];
                        });
}

Tensor mean(const Tensor& x, int axis, bool keepdim) {
  const int ax = norm_axis(axis, x.ndim(), "mean");
  MC_CHECK_SHAPE(x.shape()[ax] > 0, "mean: empty axis");
  return scale(sum(x, axis, keepdim), 1.0 / static_cast<double>(x.shape()[ax]));
}

Tensor logsumexp(const Tensor& x, int axis, bool keepdim) {
  const int ax = norm_axis(axis, x.ndim(), "logsumexp");
  const auto v = axis_view(x.shape(), ax);
  const auto xd = x.data();
  std::vector<double> out(static_cast<size_t>(v.outer * v.inner));
  for (int64_t o = 0; o < v.outer; ++o)
    for (int64_t j = 0; j < v.inner; ++j) {
      double m = -std::numeric_limits<double>::infinity();
      for (int64_t i = 0; i < v.n; ++i)
        m = std::max(m, xd[(o * v.n + i) * v.inner + j]);
      double acc = 0.0;
      for (int64_t i = 0; i < v.n; ++i)
        acc += std::exp(xd[(o * v.n + i) * v.inner + j] - m);
      out[o * v.inner + j] = m + std::log(acc);
    }
  auto xi = x.impl();
  return make_op_result(
      reduced_shape(x.shape(), ax, keepdim), std::move(out), {x},
      [xi, v](const TensorImpl& self) {
        if (!xi->requires_grad) return;
        xi->ensure_grad();
        for (int64_t o = 0; o < v.outer; ++o)
          for (int64_t j = 0; j < v.inner; ++j) {
            const double lse = self.data[o * v.inner + j];
            const double g = self.grad[o * v.inner + j];
            for (int64_t i = 0; i < v.n; ++i) {
              const int64_t idx = (o * v.n + i) * v.inner + j;
              xi->grad[idx] += std::exp(xi->data[idx] - lse) * g;
            }
          }
      });
}

Tensor log_softmax(const Tensor& x, int axis) {
  const int ax = norm_axis(axis, x.ndim(), "log_softmax");
  MC_CHECK_SHAPE(x.shape()[ax] >= 1, "log_softmax: empty axis");
  const auto v = axis_view(x.shape(), ax);
  const auto xd = x.data();
  std::vector<double> out(static_cast<size_t>(x.numel()));
  for (int64_t o = 0; o < v.outer; ++o)
    for (int64_t j = 0; j < v.inner; ++j) {
      double m = -std::numeric_limits<double>::infinity();
      for (int64_t i = 0; i < v.n; ++i)
        m = std::max(m, xd[(o * v.n + i) * v.inner + j]);
      double acc = 0.0;
      for (int64_t i = 0; i < v.n; ++i)
        acc += std::exp(xd[(o * v.n + i) * v.inner + j] - m);
      const double lse = m + std::log(acc);
      for (int64_t i = 0; i < v.n; ++i) {
        const int64_t idx = (o * v.n + i) * v.inner + j;
        out[idx] = xd[idx] - lse;
      }
    }
  auto xi = x.impl();
  return make_op_result(
      x.shape(), std::move(out), {x}, [xi, v](const TensorImpl& self) {
        if (!xi->requires_grad) return;
        xi->ensure_grad();
        // dx = dy − softmax(x) · Σ_lane dy
        for (int64_t o = 0; o < v.outer; ++o)
          for (int64_t j = 0; j < v.inner; ++j) {
            double gsum = 0.0;
            for (int64_t i = 0; i < v.n; ++i)
              gsum += self.grad[(o * v.n + i) * v.inner + j];
            for (int64_t i = 0; i < v.n; ++i) {
              const int64_t idx = (o * v.n + i) * v.inner + j;
              xi->grad[idx] += self.grad[idx] - std::exp(self.data[idx]) * gsum;
            }
          }
      });
}

Tensor softmax(const Tensor& x, int axis) { return exp(log_softmax(x, axis)); }

// ---- indexing -------------------------------------------------------------------

Tensor gather_rows(const Tensor& x, const std::vector<int64_t>& rows) {
  MC_CHECK_SHAPE(x.ndim() == 2, "gather_rows: expected 2-D input");
  const int64_t n = x.size(0), c = x.size(1);
  for (int64_t r : rows)
    MC_CHECK(r >= 0 && r < n, "gather_rows: row index " + std::to_string(r) +
                                  " out of range for " + shape_str(x.shape()));
  const auto xd = x.data();
  const int64_t m = static_cast<int64_t>(rows.size());
  std::vector<double> out(static_cast<size_t>(m * c));
  for (int64_t i = 0; i < m; ++i)
    std::copy_n(&xd[rows[i] * c], c, &out[i * c]);
  auto xi = x.impl();
  return make_op_result({m, c}, std::move(out), {x},
                        [xi, rows, c](const TensorImpl& self) {
                          if (!xi->requires_grad) return;
                          xi->ensure_grad();
                          for (size_t i = 0; i < rows.size(); ++i) {
                            const double* g = &self.grad[i * c];
                            double* dst = &xi->grad[rows[i] * c];
                            for (int64_t j = 0; j < c; ++j) dst[j] += g[j];
                          }
                        });
}

Tensor gather_cols(const Tensor& x, const std::vector<int64_t>& cols) {
  MC_CHECK_SHAPE(x.ndim() == 2, "gather_cols: expected 2-D input");
  const int64_t n = x.size(0), c = x.size(1);
  for (int64_t j : cols)
    MC_CHECK(j >= 0 && j < c, "gather_cols: column index " + std::to_string(j) +
                                  " out of range for " + shape_str(x.shape()));
  const auto xd = x.data();
  const int64_t m = static_cast<int64_t>(cols.size());
  std::vector<double> out(static_cast<size_t>(n * m));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < m; ++j) out[i * m + j] = xd[i * c + cols[j]];
  auto xi = x.impl();
  return make_op_result({n, m}, std::move(out), {x},
                        [xi, cols, n, c](const TensorImpl& self) {
                          if (!xi->requires_grad) return;
                          xi->ensure_grad();
                          const int64_t m = static_cast<int64_t>(cols.size());
                          for (int64_t i = 0; i < n; ++i)
                            for (int64_t j = 0; j < m; ++j)
                              xi->grad[i * c + cols[j]] += self.grad[i * m + j];
                        });
}

Tensor take_per_row(const Tensor& x, const std::vector<int64_t>& idx) {
  MC_CHECK_SHAPE(x.ndim() == 2, "take_per_row: expected 2-D input");
  const int64_t n = x.size(0), c = x.size(1);
  MC_CHECK_SHAPE(static_cast<int64_t>(idx.size()) == n,
                 "take_per_row: need one index per row");
  for (int64_t j : idx)
    MC_CHECK(j >= 0 && j < c, "take_per_row: column index out of range");
  const auto xd = x.data();
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[i] = xd[i * c + idx[i]];
  auto xi = x.impl();
  return make_op_result({n}, std::move(out), {x},
                        [xi, idx, c](const TensorImpl& self) {
                          if (!xi->requires_grad) return;
                          xi->ensure_grad();
                          for (size_t i = 0; i < idx.size(); ++i)
                            xi->grad[static_cast<int64_t>(i) * c + idx[i]] += self.grad[i];
                        });
}

Tensor embedding(const Tensor& table, const std::vector<int64_t>& ids) {
  return gather_rows(table, ids);
}

// ---- network ops -------------------------------------------------------------------

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training) {
  MC_CHECK(p >= 0.0 && p < 1.0, "dropout: p must be in [0, 1)");
  if (!training || p == 0.0) return x;
  const int64_t n = x.numel();
  auto mask = std::make_shared<std::vector<double>>(n);
  const double keep_scale = 1.0 / (1.0 - p);
  const auto xd = x.data();
  std::vector<double> out(n);
  for (int64_t i = 0; i < n; ++i) {
    (*mask)[i] = rng.uniform() >= p ? keep_scale : 0.0;
    out[i] = xd[i] * (*mask)[i];
  }
  auto xi = x.impl();
  return make_op_result(x.shape(), std::move(out), {x},
                        [xi, mask](const TensorImpl& self) {
                          if (!xi->requires_grad) return;
                          xi->ensure_grad();
                          for (int64_t i = 0; i < self.numel(); ++i)
                            xi->grad[i] += (*mask)[i] * self.grad[i];
                        });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  MC_CHECK_SHAPE(x.ndim() >= 1, "layer_norm: scalar input");
  const int64_t c = x.size(-1);
  MC_CHECK_SHAPE(gain.ndim() == 1 && gain.size(0) == c && bias.ndim() == 1 &&
                     bias.size(0) == c,
                 "layer_norm: gain/bias must be [" + std::to_string(c) + "]");
  Tensor mu = mean(x, -1, true);
  Tensor centered = sub(x, mu);
  Tensor var = mean(mul(centered, centered), -1, true);
  Tensor normed = div(centered, sqrt(shift(var, eps)));
  return add(mul(normed, gain), bias);
}

Tensor glu(const Tensor& x, int axis) {
  const int ax = norm_axis(axis, x.ndim(), "glu");
  const int64_t c = x.shape()[ax];
  MC_CHECK_SHAPE(c % 2 == 0, "glu: axis size must be even, got " + std::to_string(c));
  Tensor a = slice(x, ax, 0, c / 2);
  Tensor b = slice(x, ax, c / 2, c);
  return mul(a, sigmoid(b));
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel) {
  MC_CHECK_SHAPE(x.ndim() == 2 && kernel.ndim() == 2, "depthwise_conv1d: expected 2-D");
  const int64_t t = x.size(0), c = x.size(1), k = kernel.size(0);
  MC_CHECK_SHAPE(kernel.size(1) == c, "depthwise_conv1d: channel mismatch");
  MC_CHECK_SHAPE(k % 2 == 1, "depthwise_conv1d: kernel length must be odd");
  const int64_t pad = k / 2;
  const auto xd = x.data();
  const auto wd = kernel.data();
  std::vector<double> out(static_cast<size_t>(t * c), 0.0);
  for (int64_t i = 0; i < t; ++i)
    for (int64_t q = 0; q < k; ++q) {
      const int64_t src = i + q - pad;
      if (src < 0 || src >= t) continue;
      const double* xrow = &xd[src * c];
      const double* wrow = &wd[q * c];
      double* orow = &out[i * c];
      for (int64_t ch = 0; ch < c; ++ch) orow[ch] += xrow[ch] * wrow[ch];
    }
  auto xi = x.impl();
  auto wi = kernel.impl();
  return make_op_result(
      {t, c}, std::move(out), {x, kernel},
      [xi, wi, t, c, k, pad](const TensorImpl& self) {
        const auto& g = self.grad;
        if (xi->requires_grad) {
          xi->ensure_grad();
          for (int64_t i = 0; i < t; ++i)
            for (int64_t q = 0; q < k; ++q) {
              const int64_t src = i + q - pad;
              if (src < 0 || src >= t) continue;
              const double* grow = &g[i * c];
              const double* wrow = &wi->data[q * c];
              double* drow = &xi->grad[src * c];
              for (int64_t ch = 0; ch < c; ++ch) drow[ch] += grow[ch] * wrow[ch];
            }
        }
        if (wi->requires_grad) {
          wi->ensure_grad();
          for (int64_t i = 0; i < t; ++i)
            for (int64_t q = 0; q < k; ++q) {
              const int64_t src = i + q - pad;
              if (src < 0 || src >= t) continue;
              const double* grow = &g[i * c];
              const double* xrow = &xi->data[src * c];
              double* drow = &wi->grad[q * c];
              for (int64_t ch = 0; ch < c; ++ch) drow[ch] += grow[ch] * xrow[ch];
            }
        }
      });
}

Tensor cross_entropy_from_log_probs(const Tensor& logp,
                                    const std::vector<int64_t>& targets) {
  return neg(sum(take_per_row(logp, targets)));
}

// ---- non-differentiable helpers -----------------------------------------------------

int64_t argmax_span(std::span<const double> v) {
  MC_CHECK(!v.empty(), "argmax_span: empty input");
  int64_t best = 0;
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int64_t>(i);
  return best;
}

std::vector<int64_t> argmax_rows(const Tensor& m) {
  MC_CHECK_SHAPE(m.ndim() == 2, "argmax_rows: expected 2-D input");
  const int64_t r = m.size(0), c = m.size(1);
  const auto d = m.data();
  std::vector<int64_t> out(static_cast<size_t>(r));
  for (int64_t i = 0; i < r; ++i) out[i] = argmax_span(d.subspan(i * c, c));
  return out;
}

}  // namespace mc
