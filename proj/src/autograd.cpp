#include "osmsl/autograd.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace osmsl::ad {

namespace {

thread_local bool g_grad_enabled = true;

void push(const Var& p, const Matrix& g) {
  if (p->requires_grad) p->accumulate(g);
}

bool any_requires_grad(const std::vector<Var>& parents) {
  for (const auto& p : parents) {
    if (p->requires_grad) return true;
  }
  return false;
}

void check_shape(bool ok, const char* op) {
  if (!ok) throw std::invalid_argument(std::string("shape mismatch in ") + op);
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Matrix Node::grad_or_zero() const {
  if (grad.size() == 0) return Matrix::Zero(value.rows(), value.cols());
  return grad;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Var constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return node;
}

Var parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return node;
}

Var make_node(Matrix value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled && any_requires_grad(parents)) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return node;
}

void backward(const Var& root) {
  if (root->rows() != 1 || root->cols() != 1) throw std::invalid_argument("backward needs a scalar root");
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->grad.size() != 0) node->backward_fn(*node);
  }
}

Var add(const Var& a, const Var& b) {
  check_shape(a->rows() == b->rows() && a->cols() == b->cols(), "add");
  return make_node(a->value + b->value, {a, b}, [](Node& self) {
    push(self.parents[0], self.grad);
    push(self.parents[1], self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_shape(a->rows() == b->rows() && a->cols() == b->cols(), "sub");
  return make_node(a->value - b->value, {a, b}, [](Node& self) {
    push(self.parents[0], self.grad);
    push(self.parents[1], -self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  check_shape(a->rows() == b->rows() && a->cols() == b->cols(), "mul");
  return make_node(a->value.cwiseProduct(b->value), {a, b}, [](Node& self) {
    push(self.parents[0], self.grad.cwiseProduct(self.parents[1]->value));
    push(self.parents[1], self.grad.cwiseProduct(self.parents[0]->value));
  });
}

Var scale(const Var& a, double s) {
  return make_node(a->value * s, {a}, [s](Node& self) { push(self.parents[0], self.grad * s); });
}

Var matmul(const Var& a, const Var& b) {
  check_shape(a->cols() == b->rows(), "matmul");
  return make_node(a->value * b->value, {a, b}, [](Node& self) {
    const auto& A = self.parents[0];
    const auto& B = self.parents[1];
    if (A->requires_grad) A->accumulate(self.grad * B->value.transpose());
    if (B->requires_grad) B->accumulate(A->value.transpose() * self.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  check_shape(a->cols() == b->cols(), "matmul_nt");
  return make_node(a->value * b->value.transpose(), {a, b}, [](Node& self) {
    const auto& A = self.parents[0];
    const auto& B = self.parents[1];
    if (A->requires_grad) A->accumulate(self.grad * B->value);
    if (B->requires_grad) B->accumulate(self.grad.transpose() * A->value);
  });
}

Var add_row(const Var& a, const Var& row) {
  check_shape(row->rows() == 1 && row->cols() == a->cols(), "add_row");
  Matrix out = a->value.rowwise() + row->value.row(0);
  return make_node(std::move(out), {a, row}, [](Node& self) {
    push(self.parents[0], self.grad);
    push(self.parents[1], self.grad.colwise().sum());
  });
}

Var mul_col(const Var& a, const Var& col) {
  check_shape(col->cols() == 1 && col->rows() == a->rows(), "mul_col");
  Matrix out = a->value.array().colwise() * col->value.col(0).array();
  return make_node(std::move(out), {a, col}, [](Node& self) {
    const auto& A = self.parents[0];
    const auto& c = self.parents[1];
    if (A->requires_grad) A->accumulate(self.grad.array().colwise() * c->value.col(0).array());
    if (c->requires_grad) c->accumulate(self.grad.cwiseProduct(A->value).rowwise().sum());
  });
}

Var relu(const Var& a) {
  return make_node(a->value.cwiseMax(0.0), {a}, [](Node& self) {
    const Matrix mask = (self.parents[0]->value.array() > 0.0).cast<double>();
    push(self.parents[0], self.grad.cwiseProduct(mask));
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols of nothing");
  const auto rows = parts[0]->rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    check_shape(p->rows() == rows, "concat_cols");
    cols += p->cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p->cols()) = p->value;
    at += p->cols();
  }
  return make_node(std::move(out), {parts.begin(), parts.end()}, [](Node& self) {
    Eigen::Index at = 0;
    for (const auto& p : self.parents) {
      if (p->requires_grad) p->accumulate(self.grad.middleCols(at, p->cols()));
      at += p->cols();
    }
  });
}

Var vstack(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("vstack of nothing");
  const auto cols = parts[0]->cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    check_shape(p->cols() == cols, "vstack");
    rows += p->rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p->rows()) = p->value;
    at += p->rows();
  }
  return make_node(std::move(out), {parts.begin(), parts.end()}, [](Node& self) {
    Eigen::Index at = 0;
    for (const auto& p : self.parents) {
      if (p->requires_grad) p->accumulate(self.grad.middleRows(at, p->rows()));
      at += p->rows();
    }
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  check_shape(start >= 0 && count >= 0 && start + count <= a->rows(), "slice_rows");
  return make_node(a->value.middleRows(start, count), {a}, [start, count](Node& self) {
    const auto& A = self.parents[0];
    Matrix g = Matrix::Zero(A->rows(), A->cols());
    g.middleRows(start, count) = self.grad;
    A->accumulate(g);
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  check_shape(start >= 0 && count >= 0 && start + count <= a->cols(), "slice_cols");
  return make_node(a->value.middleCols(start, count), {a}, [start, count](Node& self) {
    const auto& A = self.parents[0];
    Matrix g = Matrix::Zero(A->rows(), A->cols());
    g.middleCols(start, count) = self.grad;
    A->accumulate(g);
  });
}

Var gather_rows(const Var& a, std::vector<int> indices) {
  Matrix out(static_cast<Eigen::Index>(indices.size()), a->cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    check_shape(indices[i] >= 0 && indices[i] < a->rows(), "gather_rows");
    out.row(static_cast<Eigen::Index>(i)) = a->value.row(indices[i]);
  }
  return make_node(std::move(out), {a}, [indices = std::move(indices)](Node& self) {
    const auto& A = self.parents[0];
    Matrix g = Matrix::Zero(A->rows(), A->cols());
    for (std::size_t i = 0; i < indices.size(); ++i) g.row(indices[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    A->accumulate(g);
  });
}

Var mean_rows(const Var& a) {
  const double n = static_cast<double>(a->rows());
  return make_node(a->value.colwise().mean(), {a}, [n](Node& self) {
    const auto& A = self.parents[0];
    A->accumulate(Matrix::Ones(A->rows(), 1) * self.grad / n);
  });
}

Var sum_all(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a->value.sum();
  return make_node(std::move(out), {a}, [](Node& self) {
    const auto& A = self.parents[0];
    A->accumulate(Matrix::Constant(A->rows(), A->cols(), self.grad(0, 0)));
  });
}

Var softmax_rows(const Var& a) {
  Matrix y = a->value;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double m = y.row(i).maxCoeff();
    y.row(i) = (y.row(i).array() - m).exp();
    y.row(i) /= y.row(i).sum();
  }
  return make_node(std::move(y), {a}, [](Node& self) {
    const Matrix& y = self.value;
    const Eigen::VectorXd dot = self.grad.cwiseProduct(y).rowwise().sum();
    Matrix g = y.cwiseProduct(self.grad.colwise() - dot);
    self.parents[0]->accumulate(g);
  });
}

Var row_cosine(const Var& a, const Var& b) {
  check_shape(a->rows() == b->rows() && a->cols() == b->cols(), "row_cosine");
  const auto n = a->rows();
  Matrix out(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double na = a->value.row(i).norm();
    const double nb = b->value.row(i).norm();
    out(i, 0) = (na == 0.0 || nb == 0.0) ? 0.0 : a->value.row(i).dot(b->value.row(i)) / (na * nb);
  }
  return make_node(std::move(out), {a, b}, [](Node& self) {
    const auto& A = self.parents[0];
    const auto& B = self.parents[1];
    Matrix ga = Matrix::Zero(A->rows(), A->cols());
    Matrix gb = Matrix::Zero(B->rows(), B->cols());
    for (Eigen::Index i = 0; i < A->rows(); ++i) {
      const double na = A->value.row(i).norm();
      const double nb = B->value.row(i).norm();
      if (na == 0.0 || nb == 0.0) continue;
      const double c = self.value(i, 0);
      const double g = self.grad(i, 0);
      ga.row(i) = g * (B->value.row(i) / (na * nb) - c * A->value.row(i) / (na * na));
      gb.row(i) = g * (A->value.row(i) / (na * nb) - c * B->value.row(i) / (nb * nb));
    }
    push(A, ga);
    push(B, gb);
  });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
  check_shape(gamma->rows() == 1 && gamma->cols() == x->cols() && beta->cols() == x->cols(), "layer_norm_rows");
  const auto n = x->rows();
  const auto d = x->cols();
  Matrix xhat(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x->value.row(i).mean();
    const double var = (x->value.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x->value.row(i).array() - mu) * inv_std(i);
  }
  Matrix out = (xhat.array().rowwise() * gamma->value.row(0).array()).rowwise() + beta->value.row(0).array();
  return make_node(std::move(out), {x, gamma, beta}, [xhat, inv_std](Node& self) {
    const auto& X = self.parents[0];
    const auto& G = self.parents[1];
    const auto& Bt = self.parents[2];
    if (G->requires_grad) G->accumulate(self.grad.cwiseProduct(xhat).colwise().sum());
    if (Bt->requires_grad) Bt->accumulate(self.grad.colwise().sum());
    if (X->requires_grad) {
      const Matrix gx_hat = self.grad.array().rowwise() * G->value.row(0).array();
      Matrix gx(gx_hat.rows(), gx_hat.cols());
      for (Eigen::Index i = 0; i < gx.rows(); ++i) {
        const double m1 = gx_hat.row(i).mean();
        const double m2 = gx_hat.row(i).cwiseProduct(xhat.row(i)).mean();
        gx.row(i) = inv_std(i) * (gx_hat.row(i).array() - m1 - xhat.row(i).array() * m2);
      }
      X->accumulate(gx);
    }
  });
}

Var softmax_cross_entropy(const Var& logits, std::span<const int> targets) {
  check_shape(static_cast<Eigen::Index>(targets.size()) == logits->rows() && logits->rows() > 0,
              "softmax_cross_entropy");
  const auto n = logits->rows();
  Matrix prob(n, logits->cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = logits->value.row(i).maxCoeff();
    prob.row(i) = (logits->value.row(i).array() - m).exp();
    const double z = prob.row(i).sum();
    prob.row(i) /= z;
    loss -= logits->value(i, targets[i]) - m - std::log(z);
  }
  Matrix out(1, 1);
  out(0, 0) = loss / static_cast<double>(n);
  std::vector<int> t(targets.begin(), targets.end());
  return make_node(std::move(out), {logits}, [prob, t](Node& self) {
    Matrix g = prob;
    for (std::size_t i = 0; i < t.size(); ++i) g(static_cast<Eigen::Index>(i), t[i]) -= 1.0;
    self.parents[0]->accumulate(g * (self.grad(0, 0) / static_cast<double>(t.size())));
  });
}

Var bce_with_logits(const Var& logits, std::span<const double> targets) {
  check_shape(logits->cols() == 1 && static_cast<Eigen::Index>(targets.size()) == logits->rows() &&
                  logits->rows() > 0,
              "bce_with_logits");
  const auto n = logits->rows();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = logits->value(i, 0);
    loss += std::max(z, 0.0) - z * targets[i] + std::log1p(std::exp(-std::abs(z)));
  }
  Matrix out(1, 1);
  out(0, 0) = loss / static_cast<double>(n);
  std::vector<double> t(targets.begin(), targets.end());
  return make_node(std::move(out), {logits}, [t](Node& self) {
    const auto& L = self.parents[0];
    Matrix g(L->rows(), 1);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double z = L->value(i, 0);
      const double sig = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      g(i, 0) = (sig - t[i]) * self.grad(0, 0) / static_cast<double>(t.size());
    }
    L->accumulate(g);
  });
}

}  // namespace osmsl::ad
