#pragma once

// Minimal reverse-mode differentiation over dense double-precision arrays.
//
// A `Tensor` is a shared handle to a graph node. Forward ops build the graph
// eagerly; `backward()` on a scalar result walks it once in reverse
// topological order and accumulates gradients into every node that requires
// them. Leaf gradients accumulate across calls until `zero_grad()`.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mexa/array.hpp"
#include "mexa/kernels.hpp"

namespace mexa::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node&)>;

struct Node {
  Array value;
  Array grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  BackwardFn backward;
  std::string name;

  /// Gradient buffer, allocated as zeros on first use.
  Array& grad_buffer();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  /// Trainable leaf.
  static Tensor parameter(Array value, std::string name = {});
  /// Constant leaf (never receives gradient).
  static Tensor constant(Array value);

  bool defined() const { return node_ != nullptr; }
  const Array& value() const { return node_->value; }
  /// In-place access to a leaf's value (optimizer updates, finite differences).
  Array& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t axis) const { return node_->value.dim(axis); }
  std::size_t size() const { return node_->value.size(); }
  double item() const { return node_->value.item(); }

  bool requires_grad() const { return node_->requires_grad; }
  const std::string& name() const { return node_->name; }
  /// Accumulated gradient; zeros when nothing has flowed into this node.
  Array grad() const;
  void zero_grad();

  /// Reverse pass from this scalar. Seeds d(this)/d(this) = 1.
  void backward() const;

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// While alive on a thread, ops on that thread build no graph (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

/// Builds a result node from `value`. The node requires grad when any parent
/// does, in which case `backward` is kept and later invoked with the node.
Tensor make_result(Array value, std::vector<Tensor> parents, BackwardFn backward);

/// Accumulate `g` into the gradient of a node when it participates in
/// differentiation.
void accumulate(Node& target, const Array& g);

// ---- linear algebra -------------------------------------------------------

/// a[m×k] · b[k×n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// Batched product per leading index: a[B×m×k] · b[B×k×n], or b[B×n×k]ᵀ when
/// `transpose_b`.
Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b = false);
/// x[..., k] · w[k×n] + bias[n]; bias may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

// ---- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);

// ---- structural -----------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape);
/// Concatenate along `axis`; every other axis must agree.
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Multiply each row x[..., i, :] by w[..., i].
Tensor mul_rows(const Tensor& x, const Tensor& w);
/// Zero the rows of x[..., L, d] whose mask[..., L] entry is false.
Tensor mask_rows(const Tensor& x, const Mask& mask);
/// y[b, l, :] = x[b, index[b·L + l], :] for x[B×L×d].
Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& index);

// ---- normalization and reductions ----------------------------------------

/// Softmax over the last axis. Masked entries are exactly zero. A fully masked
/// row raises DegenerateMaskError under `EmptyRow::kError` and yields zeros
/// under `EmptyRow::kZero`.
Tensor softmax_rows(const Tensor& x, const Mask* mask = nullptr,
                    kernels::EmptyRow policy = kernels::EmptyRow::kError);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
/// log Σ exp over the last axis; x[R×C] -> [R].
Tensor logsumexp_rows(const Tensor& x);

/// Mean over `axis` of a rank-2 or rank-3 tensor.
Tensor mean_axis(const Tensor& x, std::size_t axis);
/// x[B×L×d], mask[B×L] -> [B×d] averaging only valid rows. With
/// `allow_empty`, a batch entry with no valid rows yields a zero vector;
/// otherwise DegenerateMaskError.
Tensor masked_mean(const Tensor& x, const Mask& mask, bool allow_empty = false);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

}  // namespace mexa::ad
