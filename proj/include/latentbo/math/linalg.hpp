#pragma once

#include <cmath>
#include <stdexcept>

#include "latentbo/math/tensor.hpp"

namespace latentbo::math {

struct CholeskyFactor {
  Tensor lower;        // n x n lower-triangular factor of A + jitter*I
  double jitter = 0.0; // jitter actually applied (0 if none was needed)
};

// Cholesky with jitter escalation: try A as-is, then A + j*I with
// j = 1e-10, 1e-9, ..., up to 1e-4. Throws if every attempt fails.
inline CholeskyFactor cholesky(const Tensor& a, double jitter_start = 1e-10,
                               double jitter_max = 1e-4) {
  if (a.rank() != 2 || a.rows() != a.cols()) throw std::invalid_argument("cholesky: square matrix required");
  const int n = a.rows();
  double jitter = 0.0;
  while (true) {
    Tensor l = Tensor::matrix(n, n);
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      for (int j = 0; j <= i; ++j) {
        double s = a.at(i, j);
        if (i == j) s += jitter;
        for (int k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
        if (i == j) {
          if (s <= 0.0 || !std::isfinite(s)) {
            ok = false;
            break;
          }
          l.at(i, j) = std::sqrt(s);
        } else {
          l.at(i, j) = s / l.at(j, j);
        }
      }
    }
    if (ok) return {std::move(l), jitter};
    if (jitter == 0.0) {
      jitter = jitter_start;
    } else if (jitter * 10.0 <= jitter_max * 1.0000001) {
      jitter *= 10.0;
    } else {
      throw std::runtime_error("cholesky: factorization failed after max-jitter escalation");
    }
  }
}

// Solve L y = b (forward substitution), L lower-triangular.
inline Tensor solve_lower(const Tensor& l, const Tensor& b) {
  const int n = l.rows();
  Tensor y = b;
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= l.at(i, k) * y[k];
    y[i] = s / l.at(i, i);
  }
  return y;
}

// Solve L^T x = y (back substitution).
inline Tensor solve_lower_transpose(const Tensor& l, const Tensor& y) {
  const int n = l.rows();
  Tensor x = y;
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < n; ++k) s -= l.at(k, i) * x[k];
    x[i] = s / l.at(i, i);
  }
  return x;
}

// Solve (A + jitter I) x = b via an existing factor.
inline Tensor cholesky_solve_vec(const CholeskyFactor& f, const Tensor& b) {
  return solve_lower_transpose(f.lower, solve_lower(f.lower, b));
}

// Solve A X = B column by column; A SPD (after jitter).
inline Tensor cholesky_solve(const Tensor& a, const Tensor& b) {
  const CholeskyFactor f = cholesky(a);
  if (b.rank() == 1) return cholesky_solve_vec(f, b);
  if (b.rank() != 2 || b.rows() != a.rows()) throw std::invalid_argument("cholesky_solve: shape mismatch");
  Tensor x = Tensor::matrix(b.rows(), b.cols());
  for (int j = 0; j < b.cols(); ++j) {
    Tensor col = Tensor::vector(b.rows());
    for (int i = 0; i < b.rows(); ++i) col[i] = b.at(i, j);
    Tensor sol = cholesky_solve_vec(f, col);
    for (int i = 0; i < b.rows(); ++i) x.at(i, j) = sol[i];
  }
  return x;
}

inline double log_det(const CholeskyFactor& f) {
  double s = 0.0;
  for (int i = 0; i < f.lower.rows(); ++i) s += std::log(f.lower.at(i, i));
  return 2.0 * s;
}

// Explicit inverse of the factored matrix, used by the marginal-likelihood
// trace terms where the full K^{-1} is contracted against dK/dtheta.
inline Tensor cholesky_inverse(const CholeskyFactor& f) {
  const int n = f.lower.rows();
  Tensor inv = Tensor::matrix(n, n);
  Tensor e = Tensor::vector(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) e[i] = i == j ? 1.0 : 0.0;
    Tensor col = cholesky_solve_vec(f, e);
    for (int i = 0; i < n; ++i) inv.at(i, j) = col[i];
  }
  return inv;
}

}  // namespace latentbo::math
