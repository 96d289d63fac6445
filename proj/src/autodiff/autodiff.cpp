#include "mexa/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "mexa/errors.hpp"

namespace mexa::ad {
namespace {

using kernels::GemmDims;
using kernels::Trans;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// Splits a shape around `axis` into (outer, axis extent, inner).
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  Array out(x.shape());
  const auto in = x.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return make_result(std::move(out), {x}, [deriv](Node& self) {
    Node& p = *self.parents[0];
    Array& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
    }
  });
}

thread_local int no_grad_depth = 0;

}  // namespace

NoGradGuard::NoGradGuard() { ++no_grad_depth; }
NoGradGuard::~NoGradGuard() { --no_grad_depth; }
bool grad_enabled() { return no_grad_depth == 0; }

Array& Node::grad_buffer() {
  if (grad.size() != value.size() || grad.shape() != value.shape()) grad = Array(value.shape());
  return grad;
}

Tensor Tensor::parameter(Array value, std::string name) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->name = std::move(name);
  return Tensor(std::move(n));
}

Tensor Tensor::constant(Array value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Tensor(std::move(n));
}

Array Tensor::grad() const {
  if (node_->grad.shape() == node_->value.shape() && node_->grad.size() == node_->value.size()) {
    return node_->grad;
  }
  return Array(node_->value.shape());
}

void Tensor::zero_grad() {
  if (node_->grad.shape() == node_->value.shape()) {
    node_->grad.fill(0.0);
  } else {
    node_->grad = Array(node_->value.shape());
  }
}

void Tensor::backward() const {
  if (node_->value.size() != 1) {
    throw DimensionError("backward() requires a scalar, got " + shape_string(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS: each node appears once, after all its parents.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() == n->value.size()) n->backward(*n);
  }
}

Tensor make_result(Array value, std::vector<Tensor> parents, BackwardFn backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = grad_enabled() && std::any_of(parents.begin(), parents.end(),
                                 [](const Tensor& t) { return t.defined() && t.requires_grad(); });
  if (n->requires_grad) {
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

void accumulate(Node& target, const Array& g) {
  if (!target.requires_grad) return;
  Array& buf = target.grad_buffer();
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Array out({m, n});
  kernels::gemm({m, k, n}, a.value().data(), b.value().data(), out.data());
  return make_result(std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      kernels::gemm({m, n, k, Trans::kNo, Trans::kYes, true}, self.grad.data(), pb.value.data(),
                    pa.grad_buffer().data());
    }
    if (pb.requires_grad) {
      kernels::gemm({k, m, n, Trans::kYes, Trans::kNo, true}, pa.value.data(), self.grad.data(),
                    pb.grad_buffer().data());
    }
  });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b) {
  const bool ok = a.shape().size() == 3 && b.shape().size() == 3 && a.dim(0) == b.dim(0) &&
                  a.dim(2) == (transpose_b ? b.dim(2) : b.dim(1));
  if (!ok) {
    throw DimensionError("bmm: incompatible shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + (transpose_b ? " (b transposed)" : ""));
  }
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  Array out({batch, m, n});
  kernels::batched_gemm(batch, {m, k, n, Trans::kNo, transpose_b ? Trans::kYes : Trans::kNo},
                        a.value().data(), b.value().data(), out.data());
  return make_result(std::move(out), {a, b}, [=](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (!transpose_b) {
      if (pa.requires_grad) {
        kernels::batched_gemm(batch, {m, n, k, Trans::kNo, Trans::kYes, true}, self.grad.data(),
                              pb.value.data(), pa.grad_buffer().data());
      }
      if (pb.requires_grad) {
        kernels::batched_gemm(batch, {k, m, n, Trans::kYes, Trans::kNo, true}, pa.value.data(),
                              self.grad.data(), pb.grad_buffer().data());
      }
    } else {
      if (pa.requires_grad) {
        kernels::batched_gemm(batch, {m, n, k, Trans::kNo, Trans::kNo, true}, self.grad.data(),
                              pb.value.data(), pa.grad_buffer().data());
      }
      if (pb.requires_grad) {
        kernels::batched_gemm(batch, {n, m, k, Trans::kYes, Trans::kNo, true}, self.grad.data(),
                              pa.value.data(), pb.grad_buffer().data());
      }
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (x.shape().empty() || w.shape().size() != 2 || x.shape().back() != w.dim(0) ||
      (bias.defined() && (bias.shape().size() != 1 || bias.dim(0) != w.dim(1)))) {
    throw DimensionError("linear: incompatible shapes x" + shape_string(x.shape()) + " w" +
                         shape_string(w.shape()) +
                         (bias.defined() ? " b" + shape_string(bias.shape()) : std::string{}));
  }
  const std::size_t k = w.dim(0), n = w.dim(1), rows = x.size() / k;
  Shape out_shape = x.shape();
  out_shape.back() = n;
  Array out(out_shape);
  kernels::gemm({rows, k, n}, x.value().data(), w.value().data(), out.data());
  if (bias.defined()) {
    const auto bv = bias.value().data();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bv[j];
    }
  }
  std::vector<Tensor> parents{x, w};
  if (bias.defined()) parents.push_back(bias);
  return make_result(std::move(out), std::move(parents), [rows, k, n](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    if (px.requires_grad) {
      kernels::gemm({rows, n, k, Trans::kNo, Trans::kYes, true}, self.grad.data(), pw.value.data(),
                    px.grad_buffer().data());
    }
    if (pw.requires_grad) {
      kernels::gemm({k, rows, n, Trans::kYes, Trans::kNo, true}, px.value.data(), self.grad.data(),
                    pw.grad_buffer().data());
    }
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      Array& gb = self.parents[2]->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n; ++j) gb[j] += self.grad[r * n + j];
      }
    }
  });
}

// ---- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Array out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Array out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    if (self.parents[1]->requires_grad) {
      Array& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Array out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Array& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      Array& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  return unary(a, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0 ? v : 0.0; },
               [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.value().data()) {
    if (!(v > 0)) throw NumericError("log of non-positive value " + std::to_string(v));
  }
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

// ---- structural -----------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  Array out = x.value().reshaped(std::move(shape));
  return make_result(std::move(out), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    Array& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw DimensionError("concat: axis out of range for " + shape_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) {
      throw DimensionError("concat: shape " + shape_string(s) + " incompatible with " +
                           shape_string(first) + " on axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  const AxisSplit os = split_at(out_shape, axis);
  Array out(out_shape);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t ext = p.shape()[axis];
    const auto src = p.value().data();
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(src.begin() + o * ext * os.inner, ext * os.inner,
                  out.data().begin() + (o * os.extent + offset) * os.inner);
    }
    offset += ext;
  }
  return make_result(std::move(out), parts, [os, offsets](Node& self) {
    for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
      Node& p = *self.parents[pi];
      if (!p.requires_grad) continue;
      Array& g = p.grad_buffer();
      const std::size_t ext = g.size() / (os.outer * os.inner);
      for (std::size_t o = 0; o < os.outer; ++o) {
        for (std::size_t e = 0; e < ext * os.inner; ++e) {
          g[o * ext * os.inner + e] += self.grad[(o * os.extent + offsets[pi]) * os.inner + e];
        }
      }
    }
  });
}

Tensor mul_rows(const Tensor& x, const Tensor& w) {
  if (x.shape().empty() || w.size() * x.shape().back() != x.size()) {
    throw DimensionError("mul_rows: row weights " + shape_string(w.shape()) +
                         " do not match rows of " + shape_string(x.shape()));
  }
  const std::size_t d = x.shape().back(), rows = w.size();
  Array out = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] *= w.value()[r];
  }
  return make_result(std::move(out), {x, w}, [rows, d](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    if (px.requires_grad) {
      Array& g = px.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < d; ++j) g[r * d + j] += self.grad[r * d + j] * pw.value[r];
      }
    }
    if (pw.requires_grad) {
      Array& g = pw.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += self.grad[r * d + j] * px.value[r * d + j];
        g[r] += s;
      }
    }
  });
}

Tensor mask_rows(const Tensor& x, const Mask& mask) {
  return mul_rows(x, Tensor::constant(mask.as_array()));
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& index) {
  if (x.shape().size() != 3 || index.size() != x.dim(0) * x.dim(1)) {
    throw DimensionError("gather_rows: input " + shape_string(x.shape()) + " with " + std::to_string(index.size()) +
                         " indices");
  }
  const std::size_t len = x.dim(1), d = x.dim(2);
  Array out(x.shape());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= len) throw DimensionError("gather_rows: index out of range");
    const std::size_t src = (r / len) * len + index[r];
    std::copy_n(x.value().data().begin() + static_cast<std::ptrdiff_t>(src * d), d,
                out.data().begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  return make_result(std::move(out), {x}, [index, len, d](Node& self) {
    Array& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < index.size(); ++r) {
      const std::size_t src = (r / len) * len + index[r];
      for (std::size_t k = 0; k < d; ++k) g[src * d + k] += self.grad[r * d + k];
    }
  });
}

// ---- normalization and reductions ----------------------------------------

Tensor softmax_rows(const Tensor& x, const Mask* mask, kernels::EmptyRow policy) {
  if (x.shape().empty()) throw DimensionError("softmax_rows: scalar input");
  if (mask != nullptr && mask->size() != x.size()) {
    throw DimensionError("softmax_rows: mask " + shape_string(mask->shape) + " vs input " +
                         shape_string(x.shape()));
  }
  const std::size_t cols = x.shape().back(), rows = x.size() / cols;
  Array out(x.shape());
  const std::span<const std::uint8_t> m =
      mask ? std::span<const std::uint8_t>(mask->bits) : std::span<const std::uint8_t>{};
  const std::size_t bad = kernels::softmax_rows(rows, cols, x.value().data(), m, policy, out.data());
  if (bad != rows) {
    throw DegenerateMaskError("softmax_rows: row " + std::to_string(bad) + " is fully masked");
  }
  return make_result(std::move(out), {x}, [rows, cols](Node& self) {
    Array& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = &self.value[r * cols];
      const double* gy = &self.grad[r * cols];
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < cols; ++j) g[r * cols + j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t cols = x.shape().empty() ? 0 : x.shape().back();
  if (cols == 0 || gain.size() != cols || bias.size() != cols) {
    throw DimensionError("layer_norm: x" + shape_string(x.shape()) + " gain" +
                         shape_string(gain.shape()) + " bias" + shape_string(bias.shape()));
  }
  const std::size_t rows = x.size() / cols;
  Array out(x.shape());
  auto mean = std::make_shared<std::vector<double>>(rows);
  auto rstd = std::make_shared<std::vector<double>>(rows);
  kernels::layer_norm_rows(rows, cols, x.value().data(), gain.value().data(), bias.value().data(),
                           eps, out.data(), *mean, *rstd);
  return make_result(std::move(out), {x, gain, bias}, [rows, cols, mean, rstd](Node& self) {
    Node& px = *self.parents[0];
    Node& pg = *self.parents[1];
    Node& pb = *self.parents[2];
    std::vector<double> xhat(cols), dxhat(cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = &px.value[r * cols];
      const double* gy = &self.grad[r * cols];
      double mean_d = 0.0, mean_dx = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        xhat[j] = (xr[j] - (*mean)[r]) * (*rstd)[r];
        dxhat[j] = gy[j] * pg.value[j];
        mean_d += dxhat[j];
        mean_dx += dxhat[j] * xhat[j];
      }
      mean_d /= static_cast<double>(cols);
      mean_dx /= static_cast<double>(cols);
      if (pg.requires_grad) {
        Array& gg = pg.grad_buffer();
        for (std::size_t j = 0; j < cols; ++j) gg[j] += gy[j] * xhat[j];
      }
      if (pb.requires_grad) {
        Array& gb = pb.grad_buffer();
        for (std::size_t j = 0; j < cols; ++j) gb[j] += gy[j];
      }
      if (px.requires_grad) {
        Array& gx = px.grad_buffer();
        for (std::size_t j = 0; j < cols; ++j) {
          gx[r * cols + j] += (*rstd)[r] * (dxhat[j] - mean_d - xhat[j] * mean_dx);
        }
      }
    }
  });
}

Tensor logsumexp_rows(const Tensor& x) {
  if (x.shape().size() != 2) throw DimensionError("logsumexp_rows: expects rank 2, got " + shape_string(x.shape()));
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  Array out({rows});
  Array soft(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, x.value()[r * cols + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      soft[r * cols + j] = std::exp(x.value()[r * cols + j] - mx);
      s += soft[r * cols + j];
    }
    for (std::size_t j = 0; j < cols; ++j) soft[r * cols + j] /= s;
    out[r] = mx + std::log(s);
  }
  return make_result(std::move(out), {x}, [rows, cols, soft = std::move(soft)](Node& self) {
    Array& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < cols; ++j) g[r * cols + j] += self.grad[r] * soft[r * cols + j];
    }
  });
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.shape().size()) throw DimensionError("mean_axis: axis out of range for " + shape_string(x.shape()));
  const AxisSplit s = split_at(x.shape(), axis);
  if (s.extent == 0) throw DegenerateMaskError("mean_axis: empty axis");
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Array out(out_shape);
  const double inv = 1.0 / static_cast<double>(s.extent);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        out[o * s.inner + i] += x.value()[(o * s.extent + e) * s.inner + i];
      }
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= inv;
  return make_result(std::move(out), {x}, [s, inv](Node& self) {
    Array& g = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t e = 0; e < s.extent; ++e) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          g[(o * s.extent + e) * s.inner + i] += self.grad[o * s.inner + i] * inv;
        }
      }
    }
  });
}

Tensor masked_mean(const Tensor& x, const Mask& mask, bool allow_empty) {
  if (x.shape().size() != 3 || mask.shape != Shape{x.dim(0), x.dim(1)}) {
    throw DimensionError("masked_mean: x" + shape_string(x.shape()) + " mask" + shape_string(mask.shape));
  }
  const std::size_t batch = x.dim(0), len = x.dim(1), d = x.dim(2);
  Array out({batch, d});
  std::vector<double> inv(batch, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t count = 0;
    for (std::size_t l = 0; l < len; ++l) {
      if (!mask[b * len + l]) continue;
      ++count;
      for (std::size_t j = 0; j < d; ++j) out[b * d + j] += x.value()[(b * len + l) * d + j];
    }
    if (count == 0) {
      if (!allow_empty) {
        throw DegenerateMaskError("masked_mean: batch entry " + std::to_string(b) + " has no valid positions");
      }
      continue;
    }
    inv[b] = 1.0 / static_cast<double>(count);
    for (std::size_t j = 0; j < d; ++j) out[b * d + j] *= inv[b];
  }
  return make_result(std::move(out), {x}, [batch, len, d, inv, mask](Node& self) {
    Array& g = self.parents[0]->grad_buffer();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t l = 0; l < len; ++l) {
        if (!mask[b * len + l]) continue;
        for (std::size_t j = 0; j < d; ++j) g[(b * len + l) * d + j] += self.grad[b * d + j] * inv[b];
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return make_result(Array::scalar(s), {x}, [](Node& self) {
    Array& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw DegenerateMaskError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

}  // namespace mexa::ad
