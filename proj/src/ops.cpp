#include "ember/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ember/errors.hpp"
#include "ember/kernels.hpp"

namespace ember::ops {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

namespace {

// Accumulation target for a parent, or null when the parent needs no gradient.
std::vector<double>* grad_of(const NodePtr& n) {
  return n->requires_grad ? &n->ensure_grad() : nullptr;
}

template <class F, class D>
Tensor unary(const Tensor& x, F f, D derivative) {
  const auto xs = x.data();
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = f(xs[i]);
  NodePtr xn = x.node();
  return Tensor::make_result(x.shape(), std::move(out), {x}, [xn, derivative](Node& self) {
    auto* g = grad_of(xn);
    if (!g) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      (*g)[i] += self.grad[i] * derivative(xn->data[i], self.data[i]);
    }
  });
}

double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double stable_softplus(double v) { return std::log1p(std::exp(-std::abs(v))) + std::max(v, 0.0); }

// Broadcast layout of a binary op: which side (if any) is a single element.
struct Broadcast {
  Shape shape;
  bool a_scalar = false;
  bool b_scalar = false;
};

Broadcast broadcast(const Tensor& a, const Tensor& b, const char* name) {
  if (a.shape() == b.shape()) return {a.shape(), false, false};
  if (b.numel() == 1) return {a.shape(), false, true};
  if (a.numel() == 1) return {b.shape(), true, false};
  throw DimensionError(std::string(name) + ": shapes " + shape_string(a.shape()) + " and " +
                       shape_string(b.shape()) +
                       " are not broadcast-compatible (only equal shapes or a scalar operand)");
}

// f(a, b) -> value; da(a, b, y), db(a, b, y) -> partial derivatives.
template <class F, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, F f, DA da, DB db) {
  auto bc = broadcast(a, b, name);
  const auto as = a.data();
  const auto bs = b.data();
  const std::size_t n = shape_numel(bc.shape);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = f(as[bc.a_scalar ? 0 : i], bs[bc.b_scalar ? 0 : i]);
  }
  NodePtr an = a.node();
  NodePtr bn = b.node();
  const bool a_scalar = bc.a_scalar;
  const bool b_scalar = bc.b_scalar;
  return Tensor::make_result(
      std::move(bc.shape), std::move(out), {a, b}, [an, bn, a_scalar, b_scalar, da, db](Node& self) {
        auto* ga = grad_of(an);
        auto* gb = grad_of(bn);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          const std::size_t ia = a_scalar ? 0 : i;
          const std::size_t ib = b_scalar ? 0 : i;
          const double av = an->data[ia];
          const double bv = bn->data[ib];
          if (ga) (*ga)[ia] += self.grad[i] * da(av, bv, self.data[i]);
          if (gb) (*gb)[ib] += self.grad[i] * db(av, bv, self.data[i]);
        }
      });
}

// Maps each input element to its output slot for a reduction over `axes`.
struct Reduction {
  Shape out_shape;
  std::vector<std::size_t> target;
  std::size_t group = 1;  // elements folded into each output
};

Reduction plan_reduction(const Shape& shape, std::span<const std::size_t> axes) {
  std::vector<bool> reduced(shape.size(), axes.empty());
  for (auto ax : axes) {
    if (ax >= shape.size()) {
      throw DimensionError("reduce: axis " + std::to_string(ax) + " out of range for shape " +
                           shape_string(shape));
    }
    reduced[ax] = true;
  }
  Reduction r;
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (reduced[d]) {
      r.group *= shape[d];
    } else {
      r.out_shape.push_back(shape[d]);
    }
  }
  const std::size_t n = shape_numel(shape);
  r.target.resize(n);
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t o = 0;
    for (std::size_t d = 0; d < shape.size(); ++d) {
      if (!reduced[d]) o = o * shape[d] + idx[d];
    }
    r.target[flat] = o;
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
  return r;
}

Tensor reduce_impl(const Tensor& x, std::span<const std::size_t> axes, bool average) {
  auto plan = plan_reduction(x.shape(), axes);
  const auto xs = x.data();
  std::vector<double> out(shape_numel(plan.out_shape), 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) out[plan.target[i]] += xs[i];
  const double factor = average ? 1.0 / static_cast<double>(plan.group) : 1.0;
  if (average) {
    for (auto& v : out) v *= factor;
  }
  NodePtr xn = x.node();
  auto target = std::make_shared<std::vector<std::size_t>>(std::move(plan.target));
  return Tensor::make_result(std::move(plan.out_shape), std::move(out), {x},
                             [xn, target, factor](Node& self) {
                               auto* g = grad_of(xn);
                               if (!g) return;
                               for (std::size_t i = 0; i < g->size(); ++i) {
                                 (*g)[i] += self.grad[(*target)[i]] * factor;
                               }
                             });
}

void check_finite_positive(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!(x > 0.0)) throw DomainError(std::string(what) + ": requires strictly positive input, got " + std::to_string(x));
  }
}

thread_local std::vector<double> t_cols;
thread_local std::vector<double> t_dcols;
thread_local std::vector<double> t_kernel_t;

void im2col(const double* in, std::size_t h, std::size_t w, std::size_t cin, std::size_t k,
            double* cols) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t row_len = k * k * cin;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double* dst = cols + (y * w + x) * row_len;
      for (std::size_t dy = 0; dy < k; ++dy) {
        const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + dy) - pad;
        for (std::size_t dx = 0; dx < k; ++dx) {
          const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + dx) - pad;
          double* cell = dst + (dy * k + dx) * cin;
          if (sy < 0 || sx < 0 || sy >= static_cast<std::ptrdiff_t>(h) ||
              sx >= static_cast<std::ptrdiff_t>(w)) {
            std::fill(cell, cell + cin, 0.0);
          } else {
            const double* src = in + (static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)) * cin;
            std::copy(src, src + cin, cell);
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, std::size_t h, std::size_t w, std::size_t cin, std::size_t k,
                double* out) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t row_len = k * k * cin;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double* src = cols + (y * w + x) * row_len;
      for (std::size_t dy = 0; dy < k; ++dy) {
        const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + dy) - pad;
        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t dx = 0; dx < k; ++dx) {
          const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + dx) - pad;
          if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
          const double* cell = src + (dy * k + dx) * cin;
          double* dst = out + (static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)) * cin;
          for (std::size_t c = 0; c < cin; ++c) dst[c] += cell[c];
        }
      }
    }
  }
}

}  // namespace

// ---- elementwise ---------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double v : b.data()) {
    if (v == 0.0) throw DomainError("div: division by zero");
  }
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double out) { return -out / y; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor softplus(const Tensor& x) {
  return unary(x, stable_softplus, [](double v, double) { return stable_sigmoid(v); });
}

Tensor log(const Tensor& x) {
  check_finite_positive(x.data(), "log");
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor sqrt(const Tensor& x) {
  for (double v : x.data()) {
    if (v < 0.0) throw DomainError("sqrt: negative input " + std::to_string(v));
  }
  return unary(
      x, [](double v) { return std::sqrt(v); },
      [](double, double y) {
        if (y == 0.0) throw DomainError("sqrt: derivative undefined at 0");
        return 0.5 / y;
      });
}

Tensor neg(const Tensor& x) {
  return unary(
      x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor apply(UnaryOp op, const Tensor& x) {
  switch (op) {
    case UnaryOp::Sigmoid: return sigmoid(x);
    case UnaryOp::Tanh: return tanh(x);
    case UnaryOp::Relu: return relu(x);
    case UnaryOp::Exp: return exp(x);
    case UnaryOp::Softplus: return softplus(x);
    case UnaryOp::Log: return log(x);
    case UnaryOp::Square: return square(x);
    case UnaryOp::Abs: return abs(x);
    case UnaryOp::Sqrt: return sqrt(x);
    case UnaryOp::Neg: return neg(x);
  }
  throw ConfigError("apply: unknown unary op");
}

Tensor apply(BinaryOp op, const Tensor& a, const Tensor& b) {
  switch (op) {
    case BinaryOp::Add: return add(a, b);
    case BinaryOp::Sub: return sub(a, b);
    case BinaryOp::Mul: return mul(a, b);
    case BinaryOp::Div: return div(a, b);
  }
  throw ConfigError("apply: unknown binary op");
}

// ---- reductions ----------------------------------------------------------

Tensor sum(const Tensor& x, std::span<const std::size_t> axes) { return reduce_impl(x, axes, false); }

Tensor mean(const Tensor& x, std::span<const std::size_t> axes) { return reduce_impl(x, axes, true); }

Tensor reduce(ReduceOp op, const Tensor& x, std::span<const std::size_t> axes) {
  return op == ReduceOp::Sum ? sum(x, axes) : mean(x, axes);
}

// ---- layout --------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " +
                         shape_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  NodePtr xn = x.node();
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [xn](Node& self) {
    auto* g = grad_of(xn);
    if (!g) return;
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
  });
}

Tensor stack(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("stack: no tensors");
  const Shape& inner = parts[0].shape();
  const std::size_t n = parts[0].numel();
  std::vector<double> out;
  out.reserve(n * parts.size());
  std::vector<Tensor> parents;
  std::vector<NodePtr> nodes;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].shape() != inner) {
      throw DimensionError("stack: part " + std::to_string(i) + " has shape " +
                           shape_string(parts[i].shape()) + ", expected " + shape_string(inner));
    }
    out.insert(out.end(), parts[i].data().begin(), parts[i].data().end());
    parents.push_back(parts[i]);
    nodes.push_back(parts[i].node());
  }
  Shape shape{parts.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  return Tensor::make_result(std::move(shape), std::move(out), std::move(parents),
                             [nodes, n](Node& self) {
                               for (std::size_t p = 0; p < nodes.size(); ++p) {
                                 auto* g = grad_of(nodes[p]);
                                 if (!g) continue;
                                 for (std::size_t i = 0; i < n; ++i) (*g)[i] += self.grad[p * n + i];
                               }
                             });
}

Tensor select(const Tensor& x, std::size_t index) {
  if (x.ndim() == 0) throw DimensionError("select: scalar has no leading axis");
  if (index >= x.dim(0)) {
    throw DimensionError("select: index " + std::to_string(index) + " out of range on axis 0 of " +
                         shape_string(x.shape()));
  }
  Shape inner(x.shape().begin() + 1, x.shape().end());
  const std::size_t n = shape_numel(inner);
  const auto xs = x.data();
  std::vector<double> out(xs.begin() + static_cast<std::ptrdiff_t>(index * n),
                          xs.begin() + static_cast<std::ptrdiff_t>((index + 1) * n));
  NodePtr xn = x.node();
  return Tensor::make_result(std::move(inner), std::move(out), {x}, [xn, index, n](Node& self) {
    auto* g = grad_of(xn);
    if (!g) return;
    for (std::size_t i = 0; i < n; ++i) (*g)[index * n + i] += self.grad[i];
  });
}

Tensor concat_last(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat: no tensors");
  const Shape& first = parts[0].shape();
  if (first.empty()) throw DimensionError("concat: scalars have no last axis");
  Shape lead(first.begin(), first.end() - 1);
  const std::size_t rows = shape_numel(lead);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Shape& s = parts[p].shape();
    if (s.size() != first.size() || !std::equal(lead.begin(), lead.end(), s.begin())) {
      throw DimensionError("concat: part " + std::to_string(p) + " has shape " + shape_string(s) +
                           ", leading axes must match " + shape_string(first));
    }
    widths.push_back(s.back());
    total += s.back();
  }
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto src = parts[p].data();
    const std::size_t w = widths[p];
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(r * w), w, out.begin() + static_cast<std::ptrdiff_t>(r * total + offset));
    }
    offset += w;
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  std::vector<NodePtr> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  Shape shape = lead;
  shape.push_back(total);
  return Tensor::make_result(std::move(shape), std::move(out), std::move(parents),
                             [nodes, widths, rows, total](Node& self) {
                               std::size_t off = 0;
                               for (std::size_t p = 0; p < nodes.size(); ++p) {
                                 const std::size_t w = widths[p];
                                 if (auto* g = grad_of(nodes[p])) {
                                   for (std::size_t r = 0; r < rows; ++r) {
                                     for (std::size_t c = 0; c < w; ++c) {
                                       (*g)[r * w + c] += self.grad[r * total + off + c];
                                     }
                                   }
                                 }
                                 off += w;
                               }
                             });
}

Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.ndim() == 0) throw DimensionError("slice: scalars have no last axis");
  const std::size_t width = x.shape().back();
  if (begin >= end || end > width) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for last axis of size " + std::to_string(width));
  }
  const std::size_t rows = x.numel() / width;
  const std::size_t w = end - begin;
  const auto xs = x.data();
  std::vector<double> out(rows * w);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < w; ++c) out[r * w + c] = xs[r * width + begin + c];
  }
  Shape shape = x.shape();
  shape.back() = w;
  NodePtr xn = x.node();
  return Tensor::make_result(std::move(shape), std::move(out), {x},
                             [xn, rows, w, width, begin](Node& self) {
                               auto* g = grad_of(xn);
                               if (!g) return;
                               for (std::size_t r = 0; r < rows; ++r) {
                                 for (std::size_t c = 0; c < w; ++c) {
                                   (*g)[r * width + begin + c] += self.grad[r * w + c];
                                 }
                               }
                             });
}

// ---- convolution ---------------------------------------------------------

Tensor conv2d_same(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  if (input.ndim() != 3) {
    throw DimensionError("conv2d: input must be [H, W, Cin], got " + shape_string(input.shape()));
  }
  if (kernel.ndim() != 4) {
    throw DimensionError("conv2d: kernel must be [k, k, Cin, Cout], got " +
                         shape_string(kernel.shape()));
  }
  const std::size_t h = input.dim(0);
  const std::size_t w = input.dim(1);
  const std::size_t cin = input.dim(2);
  const std::size_t k = kernel.dim(0);
  const std::size_t cout = kernel.dim(3);
  if (kernel.dim(1) != k) {
    throw DimensionError("conv2d: kernel axis 1 (" + std::to_string(kernel.dim(1)) +
                         ") must equal axis 0 (" + std::to_string(k) + ")");
  }
  if (k % 2 == 0) throw DimensionError("conv2d: kernel axis 0 size must be odd, got " + std::to_string(k));
  if (kernel.dim(2) != cin) {
    throw DimensionError("conv2d: kernel axis 2 (Cin = " + std::to_string(kernel.dim(2)) +
                         ") does not match input axis 2 (Cin = " + std::to_string(cin) + ")");
  }
  if (bias.ndim() != 1 || bias.dim(0) != cout) {
    throw DimensionError("conv2d: bias axis 0 must equal kernel axis 3 (Cout = " +
                         std::to_string(cout) + "), got " + shape_string(bias.shape()));
  }

  const std::size_t pixels = h * w;
  const std::size_t row_len = k * k * cin;
  const auto& kt = kernels::active();

  std::vector<double> out(pixels * cout);
  const auto bs = bias.data();
  for (std::size_t p = 0; p < pixels; ++p) std::copy(bs.begin(), bs.end(), out.begin() + static_cast<std::ptrdiff_t>(p * cout));

  const double* cols = input.data().data();
  if (k > 1) {
    t_cols.resize(pixels * row_len);
    im2col(input.data().data(), h, w, cin, k, t_cols.data());
    cols = t_cols.data();
  }
  kt.gemm_nn(pixels, cout, row_len, cols, row_len, kernel.data().data(), cout, out.data(), cout);

  NodePtr in_n = input.node();
  NodePtr k_n = kernel.node();
  NodePtr b_n = bias.node();
  return Tensor::make_result(
      {h, w, cout}, std::move(out), {input, kernel, bias},
      [in_n, k_n, b_n, h, w, cin, k, cout, pixels, row_len](Node& self) {
        const auto& kt = kernels::active();
        const double* g = self.grad.data();
        if (auto* gb = grad_of(b_n)) {
          for (std::size_t p = 0; p < pixels; ++p) {
            for (std::size_t c = 0; c < cout; ++c) (*gb)[c] += g[p * cout + c];
          }
        }
        const double* cols = in_n->data.data();
        if (k > 1) {
          t_cols.resize(pixels * row_len);
          im2col(in_n->data.data(), h, w, cin, k, t_cols.data());
          cols = t_cols.data();
        }
        if (auto* gk = grad_of(k_n)) {
          kt.gemm_tn(pixels, cout, row_len, cols, row_len, g, cout, gk->data(), cout);
        }
        if (auto* gi = grad_of(in_n)) {
          // d(cols) = dOut * K^T, with K^T materialized so the product is a plain GEMM.
          t_kernel_t.resize(cout * row_len);
          const double* kd = k_n->data.data();
          for (std::size_t r = 0; r < row_len; ++r) {
            for (std::size_t c = 0; c < cout; ++c) t_kernel_t[c * row_len + r] = kd[r * cout + c];
          }
          if (k == 1) {
            kt.gemm_nn(pixels, row_len, cout, g, cout, t_kernel_t.data(), row_len, gi->data(), row_len);
          } else {
            t_dcols.assign(pixels * row_len, 0.0);
            kt.gemm_nn(pixels, row_len, cout, g, cout, t_kernel_t.data(), row_len, t_dcols.data(), row_len);
            col2im_add(t_dcols.data(), h, w, cin, k, gi->data());
          }
        }
      });
}

// ---- batch normalization -------------------------------------------------

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                  bool training) {
  if (x.ndim() != 3) throw DimensionError("batch_norm: input must be [H, W, C], got " + shape_string(x.shape()));
  const std::size_t c = x.dim(2);
  const std::size_t n = x.dim(0) * x.dim(1);
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
    throw DimensionError("batch_norm: gamma/beta must be [" + std::to_string(c) + "]");
  }
  if (state.running_mean.size() != c) state.running_mean.assign(c, 0.0);
  if (state.running_var.size() != c) state.running_var.assign(c, 1.0);

  const auto xs = x.data();
  std::vector<double> mu(c, 0.0);
  std::vector<double> var(c, 0.0);
  if (training) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t ch = 0; ch < c; ++ch) mu[ch] += xs[p * c + ch];
    }
    for (auto& m : mu) m /= static_cast<double>(n);
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double d = xs[p * c + ch] - mu[ch];
        var[ch] += d * d;
      }
    }
    for (auto& v : var) v /= static_cast<double>(n);
    for (std::size_t ch = 0; ch < c; ++ch) {
      state.running_mean[ch] = state.momentum * state.running_mean[ch] + (1.0 - state.momentum) * mu[ch];
      state.running_var[ch] = state.momentum * state.running_var[ch] + (1.0 - state.momentum) * var[ch];
    }
  } else {
    mu = state.running_mean;
    var = state.running_var;
  }
  auto inv_std = std::make_shared<std::vector<double>>(c);
  for (std::size_t ch = 0; ch < c; ++ch) (*inv_std)[ch] = 1.0 / std::sqrt(var[ch] + state.eps);

  auto xhat = std::make_shared<std::vector<double>>(xs.size());
  std::vector<double> out(xs.size());
  const auto gs = gamma.data();
  const auto bs = beta.data();
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t i = p * c + ch;
      (*xhat)[i] = (xs[i] - mu[ch]) * (*inv_std)[ch];
      out[i] = gs[ch] * (*xhat)[i] + bs[ch];
    }
  }

  NodePtr xn = x.node();
  NodePtr gn = gamma.node();
  NodePtr bn = beta.node();
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [xn, gn, bn, xhat, inv_std, n, c, training](Node& self) {
        const auto& g = self.grad;
        if (auto* gb = grad_of(bn)) {
          for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t ch = 0; ch < c; ++ch) (*gb)[ch] += g[p * c + ch];
          }
        }
        if (auto* gg = grad_of(gn)) {
          for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t ch = 0; ch < c; ++ch) (*gg)[ch] += g[p * c + ch] * (*xhat)[p * c + ch];
          }
        }
        auto* gx = grad_of(xn);
        if (!gx) return;
        const auto& gamma_v = gn->data;
        if (!training) {
          for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t ch = 0; ch < c; ++ch) {
              (*gx)[p * c + ch] += g[p * c + ch] * gamma_v[ch] * (*inv_std)[ch];
            }
          }
          return;
        }
        std::vector<double> sum_d(c, 0.0);
        std::vector<double> sum_dx(c, 0.0);
        for (std::size_t p = 0; p < n; ++p) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double d = g[p * c + ch] * gamma_v[ch];
            sum_d[ch] += d;
            sum_dx[ch] += d * (*xhat)[p * c + ch];
          }
        }
        const double nn = static_cast<double>(n);
        for (std::size_t p = 0; p < n; ++p) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t i = p * c + ch;
            const double d = g[i] * gamma_v[ch];
            (*gx)[i] += (*inv_std)[ch] / nn * (nn * d - sum_d[ch] - (*xhat)[i] * sum_dx[ch]);
          }
        }
      });
}

// ---- softmax -------------------------------------------------------------

Tensor softmax_last(const Tensor& x) {
  if (x.ndim() == 0) throw DimensionError("softmax: scalars have no last axis");
  const std::size_t k = x.shape().back();
  const std::size_t rows = x.numel() / k;
  const auto xs = x.data();
  std::vector<double> out(xs.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xs.data() + r * k;
    double* y = out.data() + r * k;
    const double m = *std::max_element(in, in + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += (y[j] = std::exp(in[j] - m));
    for (std::size_t j = 0; j < k; ++j) y[j] /= z;
  }
  NodePtr xn = x.node();
  return Tensor::make_result(x.shape(), std::move(out), {x}, [xn, rows, k](Node& self) {
    auto* g = grad_of(xn);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.data.data() + r * k;
      const double* gy = self.grad.data() + r * k;
      double dot = 0.0;
      for (std::size_t j = 0; j < k; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < k; ++j) (*g)[r * k + j] += y[j] * (gy[j] - dot);
    }
  });
}

// ---- gram ----------------------------------------------------------------

Tensor gram(const Tensor& a, double scale_factor) {
  if (a.ndim() != 2) throw DimensionError("gram: input must be [T, N], got " + shape_string(a.shape()));
  const std::size_t t = a.dim(0);
  const std::size_t n = a.dim(1);
  const auto& kt = kernels::active();
  const double* ad = a.data().data();
  std::vector<double> out(t * t);
  for (std::size_t s = 0; s < t; ++s) {
    for (std::size_t u = 0; u < t; ++u) out[s * t + u] = scale_factor * kt.dot(n, ad + s * n, ad + u * n);
  }
  NodePtr an = a.node();
  return Tensor::make_result({t, t}, std::move(out), {a}, [an, t, n, scale_factor](Node& self) {
    auto* g = grad_of(an);
    if (!g) return;
    const auto& kt = kernels::active();
    const double* ad = an->data.data();
    for (std::size_t s = 0; s < t; ++s) {
      for (std::size_t u = 0; u < t; ++u) {
        const double coef = scale_factor * (self.grad[s * t + u] + self.grad[u * t + s]);
        kt.axpy(n, coef, ad + u * n, g->data() + s * n);
      }
    }
  });
}

// ---- mixture density -----------------------------------------------------

Tensor mixture_nll(const Tensor& logits, const Tensor& mu, const Tensor& sigma, const Tensor& target) {
  if (logits.ndim() == 0 || logits.shape() != mu.shape() || logits.shape() != sigma.shape()) {
    throw DimensionError("mixture_nll: logits " + shape_string(logits.shape()) + ", mu " +
                         shape_string(mu.shape()) + ", sigma " + shape_string(sigma.shape()) +
                         " must share one shape [..., k]");
  }
  const std::size_t k = logits.shape().back();
  const std::size_t cells = logits.numel() / k;
  if (target.numel() != cells) {
    throw DimensionError("mixture_nll: target " + shape_string(target.shape()) + " holds " +
                         std::to_string(target.numel()) + " values, expected " + std::to_string(cells));
  }
  for (double s : sigma.data()) {
    if (!(s > 0.0)) throw DomainError("mixture_nll: sigma must be positive, got " + std::to_string(s));
  }
  const auto ls = logits.data();
  const auto ms = mu.data();
  const auto ss = sigma.data();
  const auto ys = target.data();
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);

  // Per component: softmax weight and posterior responsibility, kept for backward.
  auto weight = std::make_shared<std::vector<double>>(cells * k);
  auto resp = std::make_shared<std::vector<double>>(cells * k);
  std::vector<double> lw(k);
  std::vector<double> joint(k);
  double total = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    const std::size_t base = i * k;
    double lmax = ls[base];
    for (std::size_t j = 1; j < k; ++j) lmax = std::max(lmax, ls[base + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(ls[base + j] - lmax);
    const double log_z = lmax + std::log(z);
    for (std::size_t j = 0; j < k; ++j) {
      lw[j] = ls[base + j] - log_z;
      (*weight)[base + j] = std::exp(lw[j]);
      const double r = (ys[i] - ms[base + j]) / ss[base + j];
      joint[j] = lw[j] - half_log_2pi - std::log(ss[base + j]) - 0.5 * r * r;
    }
    double jmax = joint[0];
    for (std::size_t j = 1; j < k; ++j) jmax = std::max(jmax, joint[j]);
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) acc += std::exp(joint[j] - jmax);
    const double log_mix = jmax + std::log(acc);
    for (std::size_t j = 0; j < k; ++j) (*resp)[base + j] = std::exp(joint[j] - log_mix);
    total -= log_mix;
  }
  const double inv_cells = 1.0 / static_cast<double>(cells);

  NodePtr ln = logits.node();
  NodePtr mn = mu.node();
  NodePtr sn = sigma.node();
  NodePtr yn = target.node();
  return Tensor::make_result(
      {}, {total * inv_cells}, {logits, mu, sigma, target},
      [ln, mn, sn, yn, weight, resp, cells, k, inv_cells](Node& self) {
        const double g = self.grad[0] * inv_cells;
        auto* gl = grad_of(ln);
        auto* gm = grad_of(mn);
        auto* gs = grad_of(sn);
        auto* gy = grad_of(yn);
        for (std::size_t i = 0; i < cells; ++i) {
          const double y = yn->data[i];
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t idx = i * k + j;
            const double s = sn->data[idx];
            const double d = y - mn->data[idx];
            const double r = (*resp)[idx];
            if (gl) (*gl)[idx] += g * ((*weight)[idx] - r);
            if (gm) (*gm)[idx] -= g * r * d / (s * s);
            if (gs) (*gs)[idx] += g * r * (1.0 / s - d * d / (s * s * s));
            if (gy) (*gy)[i] += g * r * d / (s * s);
          }
        }
      });
}

}  // namespace ember::ops
