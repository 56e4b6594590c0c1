#include "mmkd/autograd.hpp"

#include "mmkd/errors.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace mmkd::ag {

namespace {

template <typename S>
using NodePtr = std::shared_ptr<Node<S>>;

template <typename S>
bool any_requires_grad(std::initializer_list<const Tensor<S>*> inputs) {
  for (const auto* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Builds the result node. The closure is attached only when some input is
// trainable; otherwise the graph stops here.
template <typename S>
Tensor<S> make_result(Matrix<S> value, std::initializer_list<const Tensor<S>*> inputs,
                      std::function<void(Node<S>&)> fn) {
  auto node = std::make_shared<Node<S>>();
  node->value = std::move(value);
  if (any_requires_grad<S>(inputs)) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto* t : inputs) node->inputs.push_back(t->node());
    node->backward = std::move(fn);
  }
  return Tensor<S>(std::move(node));
}

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("shape mismatch in ") + what);
}

}  // namespace

template <typename S>
void Node<S>::accumulate(const Matrix<S>& g) {
  if (!requires_grad) return;
  accumulate_expr(g);
}

template <typename S>
Tensor<S> Tensor<S>::constant(Matrix<S> value) {
  auto node = std::make_shared<Node<S>>();
  node->value = std::move(value);
  return Tensor<S>(std::move(node));
}

template <typename S>
Tensor<S> Tensor<S>::leaf(Matrix<S> value, bool trainable) {
  auto node = std::make_shared<Node<S>>();
  node->value = std::move(value);
  node->requires_grad = trainable;
  return Tensor<S>(std::move(node));
}

template <typename S>
const Matrix<S>& Tensor<S>::grad() const {
  if (node_->grad.size() == 0) {
    node_->grad = Matrix<S>::Zero(node_->value.rows(), node_->value.cols());
  }
  return node_->grad;
}

template <typename S>
void backward(const Tensor<S>& root) {
  if (root.rows() != 1 || root.cols() != 1) {
    throw std::invalid_argument("backward requires a scalar root");
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node<S>*> order;
  std::unordered_set<Node<S>*> seen;
  std::vector<std::pair<Node<S>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<S>* child = node->inputs[next++].get();
      if (child->requires_grad && !seen.count(child)) {
        seen.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate_expr(Matrix<S>::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<S>* node = *it;
    if (node->backward && node->grad.size() != 0) node->backward(*node);
  }
  // Interior gradients are no longer needed; leaves keep theirs.
  for (Node<S>* node : order) {
    if (node->backward) node->grad.resize(0, 0);
  }
}

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  check(a.cols() == b.rows(), "matmul");
  Matrix<S> out = a.value() * b.value();
  return make_result<S>(std::move(out), {&a, &b}, [](Node<S>& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    if (x.requires_grad) x.accumulate_expr(self.grad * y.value.transpose());
    if (y.requires_grad) y.accumulate_expr(x.value.transpose() * self.grad);
  });
}

template <typename S>
Tensor<S> matmul_bt(const Tensor<S>& a, const Tensor<S>& b) {
  check(a.cols() == b.cols(), "matmul_bt");
  Matrix<S> out = a.value() * b.value().transpose();
  return make_result<S>(std::move(out), {&a, &b}, [](Node<S>& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    if (x.requires_grad) x.accumulate_expr(self.grad * y.value);
    if (y.requires_grad) y.accumulate_expr(self.grad.transpose() * x.value);
  });
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  Matrix<S> out = a.value() + b.value();
  return make_result<S>(std::move(out), {&a, &b}, [](Node<S>& self) {
    for (auto& in : self.inputs) {
      if (in->requires_grad) in->accumulate_expr(self.grad);
    }
  });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
  Matrix<S> out = a.value() - b.value();
  return make_result<S>(std::move(out), {&a, &b}, [](Node<S>& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    if (x.requires_grad) x.accumulate_expr(self.grad);
    if (y.requires_grad) y.accumulate_expr(-self.grad);
  });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "mul");
  Matrix<S> out = a.value().cwiseProduct(b.value());
  return make_result<S>(std::move(out), {&a, &b}, [](Node<S>& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    if (x.requires_grad) x.accumulate_expr(self.grad.cwiseProduct(y.value));
    if (y.requires_grad) y.accumulate_expr(self.grad.cwiseProduct(x.value));
  });
}

template <typename S>
Tensor<S> add_row(const Tensor<S>& a, const Tensor<S>& bias) {
  check(bias.rows() == 1 && bias.cols() == a.cols(), "add_row");
  Matrix<S> out = a.value().rowwise() + bias.value().row(0);
  return make_result<S>(std::move(out), {&a, &bias}, [](Node<S>& self) {
    auto& x = *self.inputs[0];
    auto& b = *self.inputs[1];
    if (x.requires_grad) x.accumulate_expr(self.grad);
    if (b.requires_grad) b.accumulate_expr(self.grad.colwise().sum());
  });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S factor) {
  Matrix<S> out = a.value() * factor;
  return make_result<S>(std::move(out), {&a}, [factor](Node<S>& self) {
    self.inputs[0]->accumulate_expr(self.grad * factor);
  });
}

template <typename S>
Tensor<S> gelu(const Tensor<S>& a) {
  const S inv_sqrt2 = S(1) / std::numbers::sqrt2_v<S>;
  Matrix<S> out = a.value().unaryExpr([inv_sqrt2](S x) {
    return S(0.5) * x * (S(1) + std::erf(x * inv_sqrt2));
  });
  return make_result<S>(std::move(out), {&a}, [inv_sqrt2](Node<S>& self) {
    auto& x = *self.inputs[0];
    const S inv_sqrt_2pi = inv_sqrt2 * std::numbers::inv_sqrtpi_v<S>;
    Matrix<S> d = x.value.unaryExpr([&](S v) {
      const S cdf = S(0.5) * (S(1) + std::erf(v * inv_sqrt2));
      const S pdf = inv_sqrt_2pi * std::exp(S(-0.5) * v * v);
      return cdf + v * pdf;
    });
    x.accumulate_expr(self.grad.cwiseProduct(d));
  });
}

template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta, S eps) {
  const auto n = x.cols();
  check(gamma.rows() == 1 && gamma.cols() == n && beta.rows() == 1 && beta.cols() == n,
        "layer_norm");
  Matrix<S> xhat(x.rows(), n);
  Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const auto row = x.value().row(r);
    const S mean = row.mean();
    const S var = (row.array() - mean).square().mean();
    inv_std(r) = S(1) / std::sqrt(var + eps);
    xhat.row(r) = (row.array() - mean) * inv_std(r);
  }
  Matrix<S> out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
                  beta.value().row(0).array();
  return make_result<S>(
      std::move(out), {&x, &gamma, &beta},
      [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<S>& self) {
        auto& in = *self.inputs[0];
        auto& g = *self.inputs[1];
        auto& b = *self.inputs[2];
        if (g.requires_grad) g.accumulate_expr(self.grad.cwiseProduct(xhat).colwise().sum());
        if (b.requires_grad) b.accumulate_expr(self.grad.colwise().sum());
        if (in.requires_grad) {
          Matrix<S> dxhat = self.grad.array().rowwise() * g.value.row(0).array();
          Matrix<S> dx(dxhat.rows(), dxhat.cols());
          for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
            const S m1 = dxhat.row(r).mean();
            const S m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
            dx.row(r) = (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_std(r);
          }
          in.accumulate_expr(dx);
        }
      });
}

namespace {
template <typename S>
Matrix<S> softmax_value(const Matrix<S>& a) {
  Matrix<S> out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const S mx = a.row(r).maxCoeff();
    out.row(r) = (a.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

template <typename S>
Matrix<S> log_softmax_value(const Matrix<S>& a) {
  Matrix<S> out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const S mx = a.row(r).maxCoeff();
    const S lse = mx + std::log((a.row(r).array() - mx).exp().sum());
    out.row(r) = a.row(r).array() - lse;
  }
  return out;
}
}  // namespace

template <typename S>
Tensor<S> softmax_rows(const Tensor<S>& a) {
  Matrix<S> out = softmax_value(a.value());
  return make_result<S>(std::move(out), {&a}, [](Node<S>& self) {
    const Matrix<S>& y = self.value;
    Eigen::Matrix<S, Eigen::Dynamic, 1> dots = self.grad.cwiseProduct(y).rowwise().sum();
    Matrix<S> dx = y.cwiseProduct(self.grad - dots.replicate(1, y.cols()));
    self.inputs[0]->accumulate_expr(dx);
  });
}

template <typename S>
Tensor<S> log_softmax_rows(const Tensor<S>& a) {
  Matrix<S> out = log_softmax_value(a.value());
  return make_result<S>(std::move(out), {&a}, [](Node<S>& self) {
    Matrix<S> p = self.value.array().exp();
    Eigen::Matrix<S, Eigen::Dynamic, 1> sums = self.grad.rowwise().sum();
    Matrix<S> dx = self.grad - p.cwiseProduct(sums.replicate(1, p.cols()));
    self.inputs[0]->accumulate_expr(dx);
  });
}

template <typename S>
Tensor<S> gather_rows(const Tensor<S>& a, std::span<const std::int64_t> rows) {
  Matrix<S> out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) throw std::out_of_range("gather_rows index");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  }
  std::vector<std::int64_t> idx(rows.begin(), rows.end());
  return make_result<S>(std::move(out), {&a}, [idx = std::move(idx)](Node<S>& self) {
    auto& in = *self.inputs[0];
    if (in.grad.size() == 0) in.grad = Matrix<S>::Zero(in.value.rows(), in.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      in.grad.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    }
  });
}

template <typename S>
Tensor<S> slice_cols(const Tensor<S>& a, Eigen::Index start, Eigen::Index count) {
  check(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols");
  Matrix<S> out = a.value().middleCols(start, count);
  return make_result<S>(std::move(out), {&a}, [start, count](Node<S>& self) {
    auto& in = *self.inputs[0];
    if (in.grad.size() == 0) in.grad = Matrix<S>::Zero(in.value.rows(), in.value.cols());
    in.grad.middleCols(start, count) += self.grad;
  });
}

template <typename S>
Tensor<S> concat_cols(std::span<const Tensor<S>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols of nothing");
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    check(p.rows() == parts[0].rows(), "concat_cols");
    total += p.cols();
  }
  Matrix<S> out(parts[0].rows(), total);
  Eigen::Index at = 0;
  bool needs = false;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
    needs = needs || p.requires_grad();
  }
  auto node = std::make_shared<Node<S>>();
  node->value = std::move(out);
  if (needs) {
    node->requires_grad = true;
    for (const auto& p : parts) node->inputs.push_back(p.node());
    node->backward = [](Node<S>& self) {
      Eigen::Index off = 0;
      for (auto& in : self.inputs) {
        const auto c = in->value.cols();
        if (in->requires_grad) in->accumulate_expr(self.grad.middleCols(off, c));
        off += c;
      }
    };
  }
  return Tensor<S>(std::move(node));
}

template <typename S>
Tensor<S> concat_rows(std::span<const Tensor<S>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows of nothing");
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    check(p.cols() == parts[0].cols(), "concat_rows");
    total += p.rows();
  }
  Matrix<S> out(total, parts[0].cols());
  Eigen::Index at = 0;
  bool needs = false;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
    needs = needs || p.requires_grad();
  }
  auto node = std::make_shared<Node<S>>();
  node->value = std::move(out);
  if (needs) {
    node->requires_grad = true;
    for (const auto& p : parts) node->inputs.push_back(p.node());
    node->backward = [](Node<S>& self) {
      Eigen::Index off = 0;
      for (auto& in : self.inputs) {
        const auto r = in->value.rows();
        if (in->requires_grad) in->accumulate_expr(self.grad.middleRows(off, r));
        off += r;
      }
    };
  }
  return Tensor<S>(std::move(node));
}

template <typename S>
Tensor<S> l2_normalize_rows(const Tensor<S>& a, S eps) {
  Eigen::Matrix<S, Eigen::Dynamic, 1> norms = a.value().rowwise().norm();
  for (Eigen::Index r = 0; r < norms.size(); ++r) {
    if (!(norms(r) > eps)) throw NumericError("l2 normalization of a near-zero vector");
  }
  Matrix<S> out = a.value().array().colwise() / norms.array();
  return make_result<S>(std::move(out), {&a}, [norms = std::move(norms)](Node<S>& self) {
    const Matrix<S>& y = self.value;
    Eigen::Matrix<S, Eigen::Dynamic, 1> dots = self.grad.cwiseProduct(y).rowwise().sum();
    Matrix<S> dx = (self.grad - y.cwiseProduct(dots.replicate(1, y.cols()))).array().colwise() /
                   norms.array();
    self.inputs[0]->accumulate_expr(dx);
  });
}

template <typename S>
Tensor<S> sum(const Tensor<S>& a) {
  Matrix<S> out(1, 1);
  out(0, 0) = a.value().sum();
  return make_result<S>(std::move(out), {&a}, [](Node<S>& self) {
    auto& in = *self.inputs[0];
    in.accumulate_expr(Matrix<S>::Constant(in.value.rows(), in.value.cols(), self.grad(0, 0)));
  });
}

template <typename S>
Tensor<S> cross_entropy(const Tensor<S>& logits, std::span<const std::int64_t> targets) {
  check(static_cast<std::size_t>(logits.rows()) == targets.size() && !targets.empty(),
        "cross_entropy");
  Matrix<S> logp = log_softmax_value(logits.value());
  S total = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || targets[i] >= logits.cols()) {
      throw std::out_of_range("cross_entropy target");
    }
    total -= logp(static_cast<Eigen::Index>(i), targets[i]);
  }
  const S n = static_cast<S>(targets.size());
  Matrix<S> out(1, 1);
  out(0, 0) = total / n;
  std::vector<std::int64_t> tgt(targets.begin(), targets.end());
  return make_result<S>(
      std::move(out), {&logits},
      [logp = std::move(logp), tgt = std::move(tgt), n](Node<S>& self) {
        Matrix<S> d = logp.array().exp();
        for (std::size_t i = 0; i < tgt.size(); ++i) d(static_cast<Eigen::Index>(i), tgt[i]) -= 1;
        self.inputs[0]->accumulate_expr(d * (self.grad(0, 0) / n));
      });
}

template <typename S>
Tensor<S> dropout(const Tensor<S>& a, S p, std::mt19937_64& rng) {
  if (p <= S(0)) return a;
  if (p >= S(1)) throw std::invalid_argument("dropout probability must be < 1");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const S keep_scale = S(1) / (S(1) - p);
  Matrix<S> mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = unif(rng) < static_cast<double>(p) ? S(0) : keep_scale;
  }
  Matrix<S> out = a.value().cwiseProduct(mask);
  return make_result<S>(std::move(out), {&a}, [mask = std::move(mask)](Node<S>& self) {
    self.inputs[0]->accumulate_expr(self.grad.cwiseProduct(mask));
  });
}

#define MMKD_INSTANTIATE(S)                                                                  \
  template struct Node<S>;                                                                   \
  template class Tensor<S>;                                                                  \
  template void backward<S>(const Tensor<S>&);                                               \
  template Tensor<S> matmul<S>(const Tensor<S>&, const Tensor<S>&);                          \
  template Tensor<S> matmul_bt<S>(const Tensor<S>&, const Tensor<S>&);                       \
  template Tensor<S> add<S>(const Tensor<S>&, const Tensor<S>&);                             \
  template Tensor<S> sub<S>(const Tensor<S>&, const Tensor<S>&);                             \
  template Tensor<S> mul<S>(const Tensor<S>&, const Tensor<S>&);                             \
  template Tensor<S> add_row<S>(const Tensor<S>&, const Tensor<S>&);                         \
  template Tensor<S> scale<S>(const Tensor<S>&, S);                                          \
  template Tensor<S> gelu<S>(const Tensor<S>&);                                              \
  template Tensor<S> layer_norm<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, S); \
  template Tensor<S> softmax_rows<S>(const Tensor<S>&);                                      \
  template Tensor<S> log_softmax_rows<S>(const Tensor<S>&);                                  \
  template Tensor<S> gather_rows<S>(const Tensor<S>&, std::span<const std::int64_t>);        \
  template Tensor<S> slice_cols<S>(const Tensor<S>&, Eigen::Index, Eigen::Index);            \
  template Tensor<S> concat_cols<S>(std::span<const Tensor<S>>);                             \
  template Tensor<S> concat_rows<S>(std::span<const Tensor<S>>);                             \
  template Tensor<S> l2_normalize_rows<S>(const Tensor<S>&, S);                              \
  template Tensor<S> sum<S>(const Tensor<S>&);                                               \
  template Tensor<S> cross_entropy<S>(const Tensor<S>&, std::span<const std::int64_t>);      \
  template Tensor<S> dropout<S>(const Tensor<S>&, S, std::mt19937_64&);

MMKD_INSTANTIATE(float)
MMKD_INSTANTIATE(double)

#undef MMKD_INSTANTIATE

}  // namespace mmkd::ag
