#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "latentbo/math/tensor.hpp"

namespace latentbo::ad {

using math::Tensor;

enum class Op : std::uint8_t {
  leaf,
  add,
  sub,
  mul,
  matmul,
  add_rowvec,
  exp_,
  log_,
  tanh_,
  softplus_,
  relu_,
  sigmoid_,
  neg_,
  scale_,
  add_scalar_,
  abs_,
  pow_c_,
  sqrt_,
  sum_,
  mean_,
  sum_rows_,
  select_row_,
  reshape_,
  logsumexp_rows_,
  clamp_,
  gauss_sample_,
};

struct Node {
  Op op = Op::leaf;
  int a = -1, b = -1, c = -1;  // parents
  double p0 = 0.0, p1 = 0.0;   // op parameters (scale factor, clamp bounds, exponent, row)
  Tensor value;
  Tensor adjoint;
  bool requires_grad = false;
  bool has_adjoint = false;
};

class Tape;

// Lightweight handle into a tape. Valid while the tape is alive.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  const Tensor& value() const;
};

class Tape {
 public:
  Var input(Tensor value, bool requires_grad) {
    math::ensure_finite(value, "tape input");
    Node n;
    n.op = Op::leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
  }

  Var constant(Tensor value) { return input(std::move(value), false); }
  Var constant(double v) { return input(Tensor::scalar(v), false); }

  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Reverse sweep from a scalar root; adjoints accumulate on every node that
  // requires gradients. Parent ids always precede children, so reverse
  // creation order is a reverse topological order.
  void backward(Var root) {
    if (root.tape != this) throw std::invalid_argument("backward: var from another tape");
    Node& r = node(root.id);
    if (r.value.size() != 1) throw std::invalid_argument("backward: root must be scalar");
    for (auto& n : nodes_) {
      n.has_adjoint = false;
    }
    r.adjoint = r.value;
    for (double& v : r.adjoint.data()) v = 1.0;
    r.has_adjoint = true;
    for (int i = root.id; i >= 0; --i) {
      Node& n = node(i);
      if (!n.has_adjoint || !n.requires_grad || n.op == Op::leaf) continue;
      if (n.a >= i || n.b >= i || n.c >= i) throw std::runtime_error("backward: cycle detected");
      propagate(n);
    }
  }

  // Gradient of the last backward() root with respect to a leaf.
  Tensor grad(Var leaf) const {
    const Node& n = node(leaf.id);
    if (n.has_adjoint) return n.adjoint;
    Tensor z = n.value;
    for (double& v : z.data()) v = 0.0;
    return z;
  }

  Var make(Op op, Tensor value, int a, int b = -1, int c = -1, double p0 = 0.0, double p1 = 0.0) {
    math::ensure_finite(value, op_name(op));
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.c = c;
    n.p0 = p0;
    n.p1 = p1;
    n.value = std::move(value);
    n.requires_grad = (a >= 0 && node(a).requires_grad) || (b >= 0 && node(b).requires_grad) ||
                      (c >= 0 && node(c).requires_grad);
    return push(std::move(n));
  }

 private:
  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  void accumulate(int target, const Tensor& delta) {
    if (target < 0) return;
    Node& t = node(target);
    if (!t.requires_grad) return;
    if (!t.has_adjoint) {
      t.adjoint = delta;
      t.has_adjoint = true;
    } else {
      for (int i = 0; i < delta.size(); ++i) t.adjoint[i] += delta[i];
    }
  }

  void propagate(Node& n) {
    const Tensor& g = n.adjoint;
    switch (n.op) {
      case Op::leaf:
        break;
      case Op::add:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::sub:
        accumulate(n.a, g);
        accumulate(n.b, math::neg(g));
        break;
      case Op::mul:
        accumulate(n.a, math::mul(g, node(n.b).value));
        accumulate(n.b, math::mul(g, node(n.a).value));
        break;
      case Op::matmul: {
        const Tensor& A = node(n.a).value;
        const Tensor& B = node(n.b).value;
        if (node(n.a).requires_grad) {
          Tensor gA = Tensor::matrix(A.rows(), A.cols());
          for (int i = 0; i < A.rows(); ++i)
            for (int j = 0; j < B.cols(); ++j) {
              const double gij = g.at(i, j);
              if (gij == 0.0) continue;
              for (int k = 0; k < A.cols(); ++k) gA.at(i, k) += gij * B.at(k, j);
            }
          accumulate(n.a, gA);
        }
        if (node(n.b).requires_grad) {
          Tensor gB = Tensor::matrix(B.rows(), B.cols());
          for (int i = 0; i < A.rows(); ++i)
            for (int k = 0; k < A.cols(); ++k) {
              const double aik = A.at(i, k);
              if (aik == 0.0) continue;
              for (int j = 0; j < B.cols(); ++j) gB.at(k, j) += aik * g.at(i, j);
            }
          accumulate(n.b, gB);
        }
        break;
      }
      case Op::add_rowvec: {
        accumulate(n.a, g);
        if (node(n.b).requires_grad) {
          Tensor gv = Tensor::vector(g.cols());
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) gv[j] += g.at(i, j);
          accumulate(n.b, gv);
        }
        break;
      }
      case Op::exp_:
        accumulate(n.a, math::mul(g, n.value));
        break;
      case Op::log_: {
        Tensor d = g;
        const Tensor& x = node(n.a).value;
        for (int i = 0; i < d.size(); ++i) d[i] /= x[i];
        accumulate(n.a, d);
        break;
      }
      case Op::tanh_: {
        Tensor d = g;
        for (int i = 0; i < d.size(); ++i) d[i] *= 1.0 - n.value[i] * n.value[i];
        accumulate(n.a, d);
        break;
      }
      case Op::softplus_: {
        Tensor d = g;
        const Tensor& x = node(n.a).value;
        for (int i = 0; i < d.size(); ++i) d[i] *= math::sigmoid_scalar(x[i]);
        accumulate(n.a, d);
        break;
      }
      case Op::relu_: {
        Tensor d = g;
        const Tensor& x = node(n.a).value;
        for (int i = 0; i < d.size(); ++i) d[i] *= x[i] > 0.0 ? 1.0 : 0.0;
        accumulate(n.a, d);
        break;
      }
      case Op::sigmoid_: {
        Tensor d = g;
        for (int i = 0; i < d.size(); ++i) d[i] *= n.value[i] * (1.0 - n.value[i]);
        accumulate(n.a, d);
        break;
      }
      case Op::neg_:
        accumulate(n.a, math::neg(g));
        break;
      case Op::scale_:
        accumulate(n.a, math::scale(g, n.p0));
        break;
      case Op::add_scalar_:
        accumulate(n.a, g);
        break;
      case Op::abs_: {
        Tensor d = g;
        const Tensor& x = node(n.a).value;
        for (int i = 0; i < d.size(); ++i)
          d[i] *= x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
        accumulate(n.a, d);
        break;
      }
      case Op::pow_c_: {
        Tensor d = g;
        const Tensor& x = node(n.a).value;
        for (int i = 0; i < d.size(); ++i) {
          // subgradient 0 at the x=0 kink of fractional powers
          d[i] *= (x[i] == 0.0 && n.p0 < 1.0) ? 0.0 : n.p0 * std::pow(x[i], n.p0 - 1.0);
        }
        accumulate(n.a, d);
        break;
      }
      case Op::sqrt_: {
        Tensor d = g;
        for (int i = 0; i < d.size(); ++i) d[i] *= n.value[i] > 0.0 ? 0.5 / n.value[i] : 0.0;
        accumulate(n.a, d);
        break;
      }
      case Op::sum_: {
        Tensor d = node(n.a).value;
        const double gs = g[0];
        for (double& v : d.data()) v = gs;
        accumulate(n.a, d);
        break;
      }
      case Op::mean_: {
        Tensor d = node(n.a).value;
        const double gs = g[0] / d.size();
        for (double& v : d.data()) v = gs;
        accumulate(n.a, d);
        break;
      }
      case Op::sum_rows_: {
        const Tensor& x = node(n.a).value;
        Tensor d = Tensor::matrix(x.rows(), x.cols());
        for (int i = 0; i < x.rows(); ++i)
          for (int j = 0; j < x.cols(); ++j) d.at(i, j) = g[i];
        accumulate(n.a, d);
        break;
      }
      case Op::select_row_: {
        const Tensor& x = node(n.a).value;
        Tensor d = Tensor::matrix(x.rows(), x.cols());
        const int r = static_cast<int>(n.p0);
        for (int j = 0; j < x.cols(); ++j) d.at(r, j) = g[j];
        accumulate(n.a, d);
        break;
      }
      case Op::reshape_: {
        const Tensor& x = node(n.a).value;
        Tensor d = x;
        for (int i = 0; i < d.size(); ++i) d[i] = g[i];
        accumulate(n.a, d);
        break;
      }
      case Op::logsumexp_rows_: {
        const Tensor& x = node(n.a).value;
        Tensor d = Tensor::matrix(x.rows(), x.cols());
        for (int i = 0; i < x.rows(); ++i)
          for (int j = 0; j < x.cols(); ++j) d.at(i, j) = g[i] * std::exp(x.at(i, j) - n.value[i]);
        accumulate(n.a, d);
        break;
      }
      case Op::clamp_: {
        Tensor d = g;
        const Tensor& x = node(n.a).value;
        for (int i = 0; i < d.size(); ++i)
          d[i] *= (x[i] > n.p0 && x[i] < n.p1) ? 1.0 : 0.0;
        accumulate(n.a, d);
        break;
      }
      case Op::gauss_sample_: {
        accumulate(n.a, g);
        if (n.b >= 0 && node(n.b).requires_grad) {
          Tensor d = g;
          const Tensor& mu = node(n.a).value;
          for (int i = 0; i < d.size(); ++i) d[i] *= 0.5 * (n.value[i] - mu[i]);
          accumulate(n.b, d);
        }
        break;
      }
    }
  }

  static const char* op_name(Op op) {
    switch (op) {
      case Op::matmul: return "matmul";
      case Op::exp_: return "exp";
      case Op::log_: return "log";
      case Op::pow_c_: return "pow";
      case Op::sqrt_: return "sqrt";
      case Op::logsumexp_rows_: return "logsumexp_rows";
      default: return "tape op";
    }
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->node(id).value; }

namespace detail {
inline Tape& same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("vars from different tapes");
  return *a.tape;
}
}  // namespace detail

inline Var add(Var a, Var b) {
  return detail::same_tape(a, b).make(Op::add, math::add(a.value(), b.value()), a.id, b.id);
}
inline Var sub(Var a, Var b) {
  return detail::same_tape(a, b).make(Op::sub, math::sub(a.value(), b.value()), a.id, b.id);
}
inline Var mul(Var a, Var b) {
  return detail::same_tape(a, b).make(Op::mul, math::mul(a.value(), b.value()), a.id, b.id);
}
inline Var matmul(Var a, Var b) {
  return detail::same_tape(a, b).make(Op::matmul, math::matmul(a.value(), b.value()), a.id, b.id);
}
inline Var add_rowvec(Var a, Var v) {
  return detail::same_tape(a, v).make(Op::add_rowvec, math::add_rowvec(a.value(), v.value()), a.id,
                                      v.id);
}
inline Var exp(Var a) { return a.tape->make(Op::exp_, math::exp(a.value()), a.id); }
inline Var log(Var a) { return a.tape->make(Op::log_, math::log(a.value()), a.id); }
inline Var tanh(Var a) { return a.tape->make(Op::tanh_, math::tanh(a.value()), a.id); }
inline Var softplus(Var a) { return a.tape->make(Op::softplus_, math::softplus(a.value()), a.id); }
inline Var relu(Var a) { return a.tape->make(Op::relu_, math::relu(a.value()), a.id); }
inline Var sigmoid(Var a) { return a.tape->make(Op::sigmoid_, math::sigmoid(a.value()), a.id); }
inline Var neg(Var a) { return a.tape->make(Op::neg_, math::neg(a.value()), a.id); }
inline Var scale(Var a, double c) {
  return a.tape->make(Op::scale_, math::scale(a.value(), c), a.id, -1, -1, c);
}
inline Var add_scalar(Var a, double c) {
  return a.tape->make(Op::add_scalar_, math::add_scalar(a.value(), c), a.id, -1, -1, c);
}
inline Var abs(Var a) { return a.tape->make(Op::abs_, math::abs(a.value()), a.id); }
inline Var pow_c(Var a, double p) {
  return a.tape->make(Op::pow_c_, math::pow_c(a.value(), p), a.id, -1, -1, p);
}
inline Var sqrt(Var a) { return a.tape->make(Op::sqrt_, math::sqrt(a.value()), a.id); }
inline Var sum(Var a) { return a.tape->make(Op::sum_, math::sum(a.value()), a.id); }
inline Var mean(Var a) { return a.tape->make(Op::mean_, math::mean(a.value()), a.id); }
inline Var sum_rows(Var a) { return a.tape->make(Op::sum_rows_, math::sum_rows(a.value()), a.id); }
inline Var select_row(Var a, int r) {
  return a.tape->make(Op::select_row_, math::select_row(a.value(), r), a.id, -1, -1,
                      static_cast<double>(r));
}
inline Var reshape(Var a, int rows, int cols) {
  return a.tape->make(Op::reshape_, math::reshape(a.value(), rows, cols), a.id, -1, -1,
                      static_cast<double>(rows), static_cast<double>(cols));
}
inline Var logsumexp_rows(Var a) {
  return a.tape->make(Op::logsumexp_rows_, math::logsumexp_rows(a.value()), a.id);
}
inline Var clamp(Var a, double lo, double hi) {
  return a.tape->make(Op::clamp_, math::clamp(a.value(), lo, hi), a.id, -1, -1, lo, hi);
}

// Reparameterized Gaussian draw z = mean + exp(0.5 logvar) .* eps; eps is a
// fixed noise tensor, so KL and downstream losses backpropagate into mean and
// logvar.
inline Var gauss_sample(Var mean_v, Var logvar, const Tensor& eps) {
  Tape& t = detail::same_tape(mean_v, logvar);
  return t.make(Op::gauss_sample_, math::gauss_sample(mean_v.value(), logvar.value(), eps),
                mean_v.id, logvar.id);
}

// p-norm of a vector var, p >= 1 (smooth sqrt path for p == 2).
inline Var pnorm(Var v, double p) {
  if (p < 1.0) throw std::invalid_argument("pnorm: p must be >= 1");
  if (p == 2.0) return sqrt(sum(mul(v, v)));
  return pow_c(sum(pow_c(abs(v), p)), 1.0 / p);
}

inline Var dot(Var a, Var b) { return sum(mul(a, b)); }

}  // namespace latentbo::ad
