#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. Every op builds a node holding its value and a closure that
// pushes the node's gradient back into its inputs. Nodes that do not
// depend on a trainable leaf carry no closure, so frozen parameters never
// receive gradient.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mmkd::ag {

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
struct Node {
  Matrix<S> value;
  Matrix<S> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix<S>& g);
  template <typename Expr>
  void accumulate_expr(const Expr& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

template <typename S>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<S>> node) : node_(std::move(node)) {}

  /// Leaf without gradient.
  static Tensor constant(Matrix<S> value);
  /// Leaf whose gradient is tracked when `trainable` is set.
  static Tensor leaf(Matrix<S> value, bool trainable);

  const Matrix<S>& value() const { return node_->value; }
  Matrix<S>& mutable_value() { return node_->value; }
  /// Gradient, zero-filled to the value's shape when nothing accumulated yet.
  const Matrix<S>& grad() const;
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  S item() const { return node_->value(0, 0); }

  bool defined() const { return static_cast<bool>(node_); }
  const std::shared_ptr<Node<S>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<S>> node_;
};

/// Runs backpropagation from a 1x1 root, accumulating into every leaf that
/// requires grad.
template <typename S>
void backward(const Tensor<S>& root);

// ---- ops ----

template <typename S> Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b);
/// a * b^T
template <typename S> Tensor<S> matmul_bt(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b);
/// a + bias, bias is 1 x cols broadcast over rows.
template <typename S> Tensor<S> add_row(const Tensor<S>& a, const Tensor<S>& bias);
template <typename S> Tensor<S> scale(const Tensor<S>& a, S factor);
/// Exact (erf-based) GELU.
template <typename S> Tensor<S> gelu(const Tensor<S>& a);
template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta, S eps);
template <typename S> Tensor<S> softmax_rows(const Tensor<S>& a);
template <typename S> Tensor<S> log_softmax_rows(const Tensor<S>& a);
template <typename S>
Tensor<S> gather_rows(const Tensor<S>& a, std::span<const std::int64_t> rows);
template <typename S>
Tensor<S> slice_cols(const Tensor<S>& a, Eigen::Index start, Eigen::Index count);
template <typename S> Tensor<S> concat_cols(std::span<const Tensor<S>> parts);
template <typename S> Tensor<S> concat_rows(std::span<const Tensor<S>> parts);
/// Row-wise L2 normalization. Throws NumericError when a row norm is <= eps.
template <typename S> Tensor<S> l2_normalize_rows(const Tensor<S>& a, S eps = S(1e-12));
template <typename S> Tensor<S> sum(const Tensor<S>& a);
/// Mean cross-entropy of row-wise softmax(logits) against integer targets.
template <typename S>
Tensor<S> cross_entropy(const Tensor<S>& logits, std::span<const std::int64_t> targets);
/// Inverted dropout with keep-mask drawn from `rng`; identity when p == 0.
template <typename S> Tensor<S> dropout(const Tensor<S>& a, S p, std::mt19937_64& rng);

/// Mutable views of the leaves making up a model, in a stable order.
template <typename S>
struct NamedParameter {
  std::string name;
  Tensor<S> tensor;
};

}  // namespace mmkd::ag
