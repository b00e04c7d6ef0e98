#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace latentbo::math {

// Dense row-major tensor of rank 0 (scalar), 1 (vector) or 2 (matrix),
// 64-bit floats throughout.
class Tensor {
 public:
  Tensor() : rank_(0), rows_(1), cols_(1), data_(1, 0.0) {}

  static Tensor scalar(double v) {
    Tensor t;
    t.data_[0] = v;
    return t;
  }

  static Tensor vector(int n, double fill = 0.0) {
    Tensor t;
    t.rank_ = 1;
    t.rows_ = check_extent(n);
    t.cols_ = 1;
    t.data_.assign(static_cast<std::size_t>(n), fill);
    return t;
  }

  static Tensor matrix(int rows, int cols, double fill = 0.0) {
    Tensor t;
    t.rank_ = 2;
    t.rows_ = check_extent(rows);
    t.cols_ = check_extent(cols);
    t.data_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill);
    return t;
  }

  static Tensor from(std::vector<double> values) {
    Tensor t;
    t.rank_ = 1;
    t.rows_ = check_extent(static_cast<int>(values.size()));
    t.cols_ = 1;
    t.data_ = std::move(values);
    return t;
  }

  static Tensor matrix_from(int rows, int cols, std::vector<double> values) {
    if (static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) != values.size())
      throw std::invalid_argument("Tensor::matrix_from: size mismatch");
    Tensor t;
    t.rank_ = 2;
    t.rows_ = check_extent(rows);
    t.cols_ = check_extent(cols);
    t.data_ = std::move(values);
    return t;
  }

  int rank() const { return rank_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int size() const { return static_cast<int>(data_.size()); }

  std::vector<int> shape() const {
    if (rank_ == 0) return {};
    if (rank_ == 1) return {rows_};
    return {rows_, cols_};
  }

  bool same_shape(const Tensor& o) const {
    return rank_ == o.rank_ && rows_ == o.rows_ && cols_ == o.cols_;
  }

  double& operator[](int i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return data_[static_cast<std::size_t>(i)]; }

  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  double scalar_value() const {
    if (data_.size() != 1) throw std::invalid_argument("Tensor: scalar_value on non-scalar");
    return data_[0];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  static int check_extent(int n) {
    if (n <= 0) throw std::invalid_argument("Tensor: extents must be positive");
    return n;
  }

  int rank_;
  int rows_, cols_;
  std::vector<double> data_;
};

inline void ensure_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw std::runtime_error(std::string("non-finite values in ") + what);
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

// ---- elementwise ----

namespace detail {
template <class F>
Tensor map(const Tensor& a, F f) {
  Tensor out = a;
  for (double& v : out.data()) v = f(v);
  return out;
}
template <class F>
Tensor zip(const Tensor& a, const Tensor& b, const char* what, F f) {
  require_same_shape(a, b, what);
  Tensor out = a;
  for (int i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}
}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::zip(a, b, "add", [](double x, double y) { return x + y; });
}
inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::zip(a, b, "sub", [](double x, double y) { return x - y; });
}
inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::zip(a, b, "mul", [](double x, double y) { return x * y; });
}
inline Tensor neg(const Tensor& a) {
  return detail::map(a, [](double x) { return -x; });
}
inline Tensor scale(const Tensor& a, double c) {
  return detail::map(a, [c](double x) { return c * x; });
}
inline Tensor add_scalar(const Tensor& a, double c) {
  return detail::map(a, [c](double x) { return x + c; });
}
inline Tensor exp(const Tensor& a) {
  return detail::map(a, [](double x) { return std::exp(x); });
}
inline Tensor log(const Tensor& a) {
  return detail::map(a, [](double x) { return std::log(x); });
}
inline Tensor tanh(const Tensor& a) {
  return detail::map(a, [](double x) { return std::tanh(x); });
}
inline Tensor relu(const Tensor& a) {
  return detail::map(a, [](double x) { return x > 0.0 ? x : 0.0; });
}
inline Tensor abs(const Tensor& a) {
  return detail::map(a, [](double x) { return std::abs(x); });
}
inline Tensor sqrt(const Tensor& a) {
  return detail::map(a, [](double x) { return std::sqrt(x); });
}

inline double softplus_scalar(double x) {
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}
inline double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Tensor softplus(const Tensor& a) { return detail::map(a, softplus_scalar); }
inline Tensor sigmoid(const Tensor& a) { return detail::map(a, sigmoid_scalar); }

inline Tensor pow_c(const Tensor& a, double p) {
  return detail::map(a, [p](double x) { return std::pow(x, p); });
}
inline Tensor clamp(const Tensor& a, double lo, double hi) {
  return detail::map(a, [lo, hi](double x) { return std::min(hi, std::max(lo, x)); });
}

// ---- structural ----

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
    throw std::invalid_argument("matmul: incompatible shapes");
  Tensor out = Tensor::matrix(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) out.at(i, j) += aik * b.at(k, j);
    }
  }
  return out;
}

// matrix [n,m] + vector [m] broadcast over rows
inline Tensor add_rowvec(const Tensor& a, const Tensor& v) {
  if (a.rank() != 2 || v.rank() != 1 || v.rows() != a.cols())
    throw std::invalid_argument("add_rowvec: incompatible shapes");
  Tensor out = a;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.at(i, j) += v[j];
  return out;
}

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) s += a[i];
  return Tensor::scalar(s);
}

inline Tensor mean(const Tensor& a) {
  return Tensor::scalar(sum(a).scalar_value() / a.size());
}

inline Tensor sum_rows(const Tensor& a) {
  if (a.rank() != 2) throw std::invalid_argument("sum_rows: matrix required");
  Tensor out = Tensor::vector(a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < a.cols(); ++j) s += a.at(i, j);
    out[i] = s;
  }
  return out;
}

inline Tensor select_row(const Tensor& a, int r) {
  if (a.rank() != 2 || r < 0 || r >= a.rows()) throw std::invalid_argument("select_row: bad row");
  Tensor out = Tensor::vector(a.cols());
  for (int j = 0; j < a.cols(); ++j) out[j] = a.at(r, j);
  return out;
}

inline Tensor reshape(const Tensor& a, int rows, int cols) {
  if (rows * cols != a.size()) throw std::invalid_argument("reshape: element count mismatch");
  Tensor out = Tensor::matrix(rows, cols);
  out.data() = a.data();
  return out;
}

inline Tensor logsumexp_rows(const Tensor& a) {
  if (a.rank() != 2) throw std::invalid_argument("logsumexp_rows: matrix required");
  Tensor out = Tensor::vector(a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    double m = a.at(i, 0);
    for (int j = 1; j < a.cols(); ++j) m = std::max(m, a.at(i, j));
    double s = 0.0;
    for (int j = 0; j < a.cols(); ++j) s += std::exp(a.at(i, j) - m);
    out[i] = m + std::log(s);
  }
  return out;
}

// z = mean + exp(0.5 * logvar) .* eps
inline Tensor gauss_sample(const Tensor& mean_t, const Tensor& logvar, const Tensor& eps) {
  require_same_shape(mean_t, logvar, "gauss_sample");
  require_same_shape(mean_t, eps, "gauss_sample");
  Tensor out = mean_t;
  for (int i = 0; i < out.size(); ++i) out[i] += std::exp(0.5 * logvar[i]) * eps[i];
  return out;
}

inline double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// p-norm of a vector, p >= 1.
inline double pnorm(const Tensor& v, double p) {
  if (p < 1.0) throw std::invalid_argument("pnorm: p must be >= 1");
  double s = 0.0;
  for (int i = 0; i < v.size(); ++i) s += std::pow(std::abs(v[i]), p);
  return std::pow(s, 1.0 / p);
}

inline Tensor pnorm_t(const Tensor& v, double p) { return Tensor::scalar(pnorm(v, p)); }

}  // namespace latentbo::math
