#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "latentbo/math/linalg.hpp"
#include "latentbo/math/rng.hpp"
#include "latentbo/math/tensor.hpp"

using namespace latentbo;
using math::Tensor;

namespace {

// Dense LU solve with partial pivoting; independent oracle for the Cholesky path.
std::vector<double> lu_solve(Tensor a, std::vector<double> b) {
  const int n = a.rows();
  std::vector<int> piv(n);
  for (int i = 0; i < n; ++i) piv[i] = i;
  for (int col = 0; col < n; ++col) {
    int best = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a.at(r, col)) > std::abs(a.at(best, col))) best = r;
    if (best != col) {
      for (int j = 0; j < n; ++j) std::swap(a.at(col, j), a.at(best, j));
      std::swap(b[col], b[best]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double m = a.at(r, col) / a.at(col, col);
      a.at(r, col) = 0.0;
      for (int j = col + 1; j < n; ++j) a.at(r, j) -= m * a.at(col, j);
      b[r] -= m * b[col];
    }
  }
  std::vector<double> x(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < n; ++j) s -= a.at(i, j) * x[j];
    x[i] = s / a.at(i, i);
  }
  return x;
}

Tensor random_spd(int n, math::Rng& rng) {
  Tensor m = Tensor::matrix(n, n);
  for (int i = 0; i < n * n; ++i) m[i] = rng.normal();
  Tensor spd = Tensor::matrix(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += m.at(i, k) * m.at(j, k);
      spd.at(i, j) = s + (i == j ? 0.5 * n : 0.0);
    }
  return spd;
}

}  // namespace

TEST_CASE("tensor basics and shape checks") {
  Tensor v = Tensor::from({3.0, 4.0});
  CHECK(v.rank() == 1);
  CHECK(math::pnorm(v, 2.0) == doctest::Approx(5.0).epsilon(1e-14));

  Tensor a = Tensor::matrix_from(2, 2, {1, 2, 3, 4});
  Tensor b = Tensor::matrix_from(2, 2, {5, 6, 7, 8});
  Tensor c = math::matmul(a, b);
  CHECK(c.at(0, 0) == 19);
  CHECK(c.at(1, 1) == 50);

  CHECK_THROWS_AS(math::add(v, Tensor::from({1.0, 2.0, 3.0})), std::invalid_argument);
  CHECK_THROWS_AS(math::matmul(a, Tensor::matrix(3, 2)), std::invalid_argument);
  CHECK_THROWS_AS(math::pnorm(v, 0.5), std::invalid_argument);
}

TEST_CASE("scalar op values against analytic constants") {
  CHECK(math::softplus_scalar(0.0) == doctest::Approx(0.6931471805599453).epsilon(1e-14));
  CHECK(std::tanh(0.7) == doctest::Approx(0.604368).epsilon(1e-6));
  CHECK(math::softplus_scalar(0.5) == doctest::Approx(0.974076984180851).epsilon(1e-12));
  // large-argument stability
  CHECK(math::softplus_scalar(800.0) == doctest::Approx(800.0));
  CHECK(math::softplus_scalar(-800.0) == doctest::Approx(0.0));
  CHECK(math::sigmoid_scalar(0.0) == doctest::Approx(0.5));
  CHECK(math::sigmoid_scalar(2.0) == doctest::Approx(0.8807970779778823).epsilon(1e-12));
}

TEST_CASE("logsumexp_rows is stable and exact") {
  Tensor m = Tensor::matrix_from(2, 3, {1000.0, 1000.0, 1000.0, 0.0, std::log(2.0), 0.0});
  Tensor lse = math::logsumexp_rows(m);
  CHECK(lse[0] == doctest::Approx(1000.0 + std::log(3.0)).epsilon(1e-12));
  CHECK(lse[1] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("cholesky solve: identity and diagonal") {
  Tensor eye = Tensor::matrix(3, 3);
  for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  Tensor b = Tensor::from({1.0, -2.0, 0.5});
  Tensor x = math::cholesky_solve(eye, b);
  for (int i = 0; i < 3; ++i) CHECK(x[i] == doctest::Approx(b[i]).epsilon(1e-14));

  Tensor d = Tensor::matrix(1, 1);
  d.at(0, 0) = 4.0;
  Tensor sol = math::cholesky_solve(d, Tensor::from({2.0}));
  CHECK(sol[0] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("cholesky solve matches dense LU oracle on random SPD systems") {
  math::Rng rng(20240811);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 8;
    Tensor a = random_spd(n, rng);
    Tensor b = Tensor::vector(n);
    for (int i = 0; i < n; ++i) b[i] = rng.normal();
    Tensor x = math::cholesky_solve(a, b);
    std::vector<double> x_lu = lu_solve(a, b.data());
    double bnorm = 0.0, resid = 0.0;
    for (int i = 0; i < n; ++i) {
      CHECK(x[i] == doctest::Approx(x_lu[i]).epsilon(1e-8));
      double r = -b[i];
      for (int j = 0; j < n; ++j) r += a.at(i, j) * x[j];
      resid = std::max(resid, std::abs(r));
      bnorm = std::max(bnorm, std::abs(b[i]));
    }
    CHECK(resid < 1e-8 * bnorm);
  }
}

TEST_CASE("cholesky solve handles matrix right-hand sides column by column") {
  math::Rng rng(31);
  const int n = 8, m = 3;
  Tensor a = random_spd(n, rng);
  Tensor b = Tensor::matrix(n, m);
  for (int i = 0; i < b.size(); ++i) b[i] = rng.normal();
  Tensor x = math::cholesky_solve(a, b);
  for (int j = 0; j < m; ++j) {
    std::vector<double> col(n);
    for (int i = 0; i < n; ++i) col[i] = b.at(i, j);
    auto ref = lu_solve(a, col);
    for (int i = 0; i < n; ++i) CHECK(x.at(i, j) == doctest::Approx(ref[i]).epsilon(1e-8));
  }
  CHECK_THROWS_AS(math::cholesky_solve(a, Tensor::matrix(5, 2)), std::invalid_argument);
}

TEST_CASE("cholesky jitter escalation on rank-deficient matrix stays within bound") {
  // rank-1 PSD matrix: plain factorization fails, jitter must rescue it
  Tensor a = Tensor::matrix(3, 3);
  std::vector<double> u = {1.0, 2.0, -1.0};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a.at(i, j) = u[i] * u[j];
  auto f = math::cholesky(a);
  CHECK(f.jitter > 0.0);
  CHECK(f.jitter <= 1e-4);
  // solution solves the jittered system to near machine precision
  Tensor b = Tensor::from({1.0, 0.0, 1.0});
  Tensor x = math::cholesky_solve_vec(f, b);
  for (int i = 0; i < 3; ++i) {
    double r = -b[i];
    for (int j = 0; j < 3; ++j) r += (a.at(i, j) + (i == j ? f.jitter : 0.0)) * x[j];
    CHECK(std::abs(r) < 1e-9);
  }
}

TEST_CASE("cholesky fails cleanly on indefinite input") {
  Tensor a = Tensor::matrix(2, 2);
  a.at(0, 0) = -5.0;
  a.at(1, 1) = -5.0;
  CHECK_THROWS_AS(math::cholesky(a), std::runtime_error);
}

TEST_CASE("cholesky inverse and log-det agree with direct computation") {
  math::Rng rng(7);
  Tensor a = random_spd(5, rng);
  auto f = math::cholesky(a);
  Tensor inv = math::cholesky_inverse(f);
  // A * inv(A) == I
  Tensor prod = math::matmul(a, inv);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) CHECK(prod.at(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-8));
}

TEST_CASE("rng determinism and substreams") {
  math::Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  // splits depend only on seed and tag, not on consumption
  math::Rng c(42);
  c.next_u64();
  CHECK(a.split(3).next_u64() == c.split(3).next_u64());
  CHECK(a.split(3).next_u64() != a.split(4).next_u64());
}

TEST_CASE("rng normal moments are sane") {
  math::Rng rng(1234);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}
