#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "latentbo/math/linalg.hpp"
#include "latentbo/math/rng.hpp"
#include "latentbo/math/tensor.hpp"

namespace latentbo::gp {

using math::Tensor;

struct Standardizer {
  double mean = 0.0;
  double sd = 1.0;

  static Standardizer fit(const std::vector<double>& y) {
    Standardizer s;
    if (y.empty()) throw std::invalid_argument("Standardizer: empty targets");
    for (double v : y) s.mean += v;
    s.mean /= static_cast<double>(y.size());
    double var = 0.0;
    for (double v : y) var += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(std::max(var / static_cast<double>(y.size()), 1e-12));
    return s;
  }
  double to_std(double y) const { return (y - mean) / sd; }
  double to_raw(double m) const { return mean + sd * m; }
};

// Positive hyperparameters live in log space for unconstrained optimization.
struct GpHyperparams {
  std::vector<double> log_lengthscale;  // ARD, one per latent dimension
  double log_signal_var = 0.0;
  double log_noise_var = -4.0;
  double mean_const = 0.0;

  double lengthscale(int d) const { return std::exp(log_lengthscale[static_cast<std::size_t>(d)]); }
  double signal_var() const { return std::exp(log_signal_var); }
  double noise_var() const { return std::exp(log_noise_var); }
};

inline double rbf_kernel(const double* a, const double* b, int dim, const GpHyperparams& hyp) {
  double q = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double ell = hyp.lengthscale(d);
    const double diff = (a[d] - b[d]) / ell;
    q += diff * diff;
  }
  return hyp.signal_var() * std::exp(-0.5 * q);
}

inline double rbf_kernel(const Tensor& a, const Tensor& b, const GpHyperparams& hyp) {
  if (a.size() != b.size() || a.size() != static_cast<int>(hyp.log_lengthscale.size()))
    throw std::invalid_argument("rbf_kernel: dimension mismatch");
  return rbf_kernel(a.data().data(), b.data().data(), a.size(), hyp);
}

// Union of the n_best highest-target points and n_rand uniform draws from the
// remainder; no duplicates.
inline std::vector<int> select_training_subset(const std::vector<double>& f, int n_best,
                                               int n_rand, math::Rng& rng) {
  const int n = static_cast<int>(f.size());
  if (n_best < 0 || n_rand < 0 || n_best + n_rand > n)
    throw std::invalid_argument("select_training_subset: insufficient data");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return f[static_cast<std::size_t>(a)] > f[static_cast<std::size_t>(b)]; });
  std::vector<int> subset(order.begin(), order.begin() + n_best);
  std::vector<int> rest(order.begin() + n_best, order.end());
  rng.shuffle(rest);
  subset.insert(subset.end(), rest.begin(), rest.begin() + n_rand);
  return subset;
}

struct GpModel {
  GpHyperparams hyp;
  Tensor Z;                     // [n, d] training inputs
  std::vector<double> y_std;    // standardized targets
  Standardizer standardizer;
  math::CholeskyFactor factor;  // of K + noise I
  std::vector<double> alpha;    // (K + noise I)^{-1} (y - c)
  double log_marginal = 0.0;

  int size() const { return Z.rows(); }
  int dim() const { return Z.cols(); }
};

namespace detail {

inline Tensor kernel_matrix(const Tensor& Z, const GpHyperparams& hyp) {
  const int n = Z.rows(), d = Z.cols();
  Tensor k = Tensor::matrix(n, n);
  for (int i = 0; i < n; ++i) {
    k.at(i, i) = hyp.signal_var() + hyp.noise_var();
    for (int j = 0; j < i; ++j) {
      const double v = rbf_kernel(&Z.data()[static_cast<std::size_t>(i) * d],
                                  &Z.data()[static_cast<std::size_t>(j) * d], d, hyp);
      k.at(i, j) = v;
      k.at(j, i) = v;
    }
  }
  return k;
}

struct LmlResult {
  double value;
  std::vector<double> grad;  // [log_l_0..log_l_{d-1}, log_signal, log_noise, mean]
  math::CholeskyFactor factor;
  std::vector<double> alpha;
};

// Log marginal likelihood and its analytic gradient via the trace formula
// d lml / d theta = 0.5 tr((alpha alpha^T - K^{-1}) dK/dtheta).
inline LmlResult log_marginal_likelihood(const Tensor& Z, const std::vector<double>& y,
                                         const GpHyperparams& hyp, bool want_grad) {
  const int n = Z.rows(), d = Z.cols();
  Tensor k = kernel_matrix(Z, hyp);
  math::CholeskyFactor factor = math::cholesky(k);
  Tensor r = Tensor::vector(n);
  for (int i = 0; i < n; ++i) r[i] = y[static_cast<std::size_t>(i)] - hyp.mean_const;
  Tensor alpha_t = math::cholesky_solve_vec(factor, r);
  double fit_term = 0.0;
  for (int i = 0; i < n; ++i) fit_term += r[i] * alpha_t[i];
  LmlResult res;
  res.value = -0.5 * fit_term - 0.5 * math::log_det(factor) -
              0.5 * n * std::log(2.0 * 3.141592653589793238462643);
  res.factor = factor;
  res.alpha.assign(alpha_t.data().begin(), alpha_t.data().end());
  if (!want_grad) return res;

  Tensor kinv = math::cholesky_inverse(factor);
  // M = alpha alpha^T - K^{-1}
  Tensor m = Tensor::matrix(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m.at(i, j) = alpha_t[i] * alpha_t[j] - kinv.at(i, j);

  res.grad.assign(static_cast<std::size_t>(d) + 3, 0.0);
  const double noise = hyp.noise_var();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double ks = (i == j) ? hyp.signal_var() : k.at(i, j);  // noise-free kernel value
      const double mij = m.at(i, j);
      for (int dd = 0; dd < d; ++dd) {
        const double ell = hyp.lengthscale(dd);
        const double diff = (Z.at(i, dd) - Z.at(j, dd)) / ell;
        res.grad[static_cast<std::size_t>(dd)] += 0.5 * mij * ks * diff * diff;
      }
      res.grad[static_cast<std::size_t>(d)] += 0.5 * mij * ks;  // d/d log signal_var
      if (i == j) res.grad[static_cast<std::size_t>(d) + 1] += 0.5 * mij * noise;
    }
  }
  double alpha_sum = 0.0;
  for (int i = 0; i < n; ++i) alpha_sum += alpha_t[i];
  res.grad[static_cast<std::size_t>(d) + 2] = alpha_sum;  // d/d mean_const
  return res;
}

inline std::vector<double> pack(const GpHyperparams& h) {
  std::vector<double> t = h.log_lengthscale;
  t.push_back(h.log_signal_var);
  t.push_back(h.log_noise_var);
  t.push_back(h.mean_const);
  return t;
}

inline GpHyperparams unpack(const std::vector<double>& t, int d, double log_noise_floor) {
  GpHyperparams h;
  h.log_lengthscale.assign(t.begin(), t.begin() + d);
  for (double& v : h.log_lengthscale) v = std::clamp(v, -8.0, 8.0);
  h.log_signal_var = std::clamp(t[static_cast<std::size_t>(d)], -8.0, 8.0);
  h.log_noise_var = std::clamp(t[static_cast<std::size_t>(d) + 1], log_noise_floor, 4.0);
  h.mean_const = t[static_cast<std::size_t>(d) + 2];
  return h;
}

}  // namespace detail

struct FitOptions {
  int restarts = 3;
  int max_iters = 200;
  double grad_tol = 1e-5;  // infinity norm
  double lr = 0.05;
  double noise_floor = 1e-6;
  bool optimize_hyperparams = true;
  GpHyperparams initial;  // used when optimize_hyperparams is false
};

// Fits targets standardized internally; hyperparameters maximize the log
// marginal likelihood by Adam-style gradient ascent with analytic gradients,
// multi-restart, converging when the gradient infinity-norm drops below
// grad_tol or the iteration cap is reached.
inline GpModel fit(const Tensor& Z, const std::vector<double>& y_raw, const FitOptions& opts,
                   math::Rng& rng) {
  if (Z.rank() != 2) throw std::invalid_argument("gp::fit: Z must be [n, d]");
  const int n = Z.rows(), d = Z.cols();
  if (n < 2) throw std::invalid_argument("gp::fit: need at least 2 points");
  if (static_cast<int>(y_raw.size()) != n) throw std::invalid_argument("gp::fit: target count mismatch");

  GpModel model;
  model.Z = Z;
  model.standardizer = Standardizer::fit(y_raw);
  model.y_std.resize(y_raw.size());
  for (std::size_t i = 0; i < y_raw.size(); ++i) model.y_std[i] = model.standardizer.to_std(y_raw[i]);

  const double log_noise_floor = std::log(opts.noise_floor);
  std::vector<double> z_sd(static_cast<std::size_t>(d), 0.0);
  for (int dd = 0; dd < d; ++dd) {
    double mu = 0.0;
    for (int i = 0; i < n; ++i) mu += Z.at(i, dd);
    mu /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) var += (Z.at(i, dd) - mu) * (Z.at(i, dd) - mu);
    z_sd[static_cast<std::size_t>(dd)] = std::sqrt(std::max(var / n, 1e-6));
  }

  auto initial_theta = [&](int restart) {
    GpHyperparams h;
    if (!opts.optimize_hyperparams || (restart == 0 && !opts.initial.log_lengthscale.empty())) {
      h = opts.initial;
      if (static_cast<int>(h.log_lengthscale.size()) != d)
        h.log_lengthscale.assign(static_cast<std::size_t>(d), 0.0);
      return detail::pack(h);
    }
    h.log_lengthscale.resize(static_cast<std::size_t>(d));
    for (int dd = 0; dd < d; ++dd)
      h.log_lengthscale[static_cast<std::size_t>(dd)] =
          std::log(z_sd[static_cast<std::size_t>(dd)] * rng.uniform(0.3, 2.0));
    h.log_signal_var = std::log(rng.uniform(0.3, 2.0));
    h.log_noise_var = rng.uniform(std::log(1e-4), std::log(0.1));
    h.mean_const = 0.0;
    return detail::pack(h);
  };

  double best_lml = -std::numeric_limits<double>::infinity();
  GpHyperparams best_hyp;
  const int restarts = opts.optimize_hyperparams ? opts.restarts : 1;
  for (int restart = 0; restart < restarts; ++restart) {
    std::vector<double> theta = initial_theta(restart);
    GpHyperparams hyp = detail::unpack(theta, d, log_noise_floor);
    if (opts.optimize_hyperparams) {
      std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0);
      for (int iter = 1; iter <= opts.max_iters; ++iter) {
        detail::LmlResult lml;
        try {
          lml = detail::log_marginal_likelihood(model.Z, model.y_std, hyp, true);
        } catch (const std::runtime_error&) {
          break;  // factorization failed at extreme parameters; keep last point
        }
        double gmax = 0.0;
        for (double g : lml.grad) gmax = std::max(gmax, std::abs(g));
        if (gmax < opts.grad_tol) break;
        const double bc1 = 1.0 - std::pow(0.9, iter);
        const double bc2 = 1.0 - std::pow(0.999, iter);
        for (std::size_t t = 0; t < theta.size(); ++t) {
          m[t] = 0.9 * m[t] + 0.1 * lml.grad[t];
          v[t] = 0.999 * v[t] + 0.001 * lml.grad[t] * lml.grad[t];
          theta[t] += opts.lr * (m[t] / bc1) / (std::sqrt(v[t] / bc2) + 1e-8);  // ascent
        }
        hyp = detail::unpack(theta, d, log_noise_floor);
      }
    }
    try {
      detail::LmlResult final_lml = detail::log_marginal_likelihood(model.Z, model.y_std, hyp, false);
      if (final_lml.value > best_lml) {
        best_lml = final_lml.value;
        best_hyp = hyp;
      }
    } catch (const std::runtime_error&) {
      continue;
    }
  }
  if (!std::isfinite(best_lml)) throw std::runtime_error("gp::fit: no restart produced a usable fit");

  model.hyp = best_hyp;
  detail::LmlResult final_state = detail::log_marginal_likelihood(model.Z, model.y_std, model.hyp, false);
  model.factor = final_state.factor;
  model.alpha = final_state.alpha;
  model.log_marginal = final_state.value;
  return model;
}

// Append one observation and re-factorize under the current hyperparameters
// (no hyperparameter re-optimization).
inline void append_point(GpModel& model, const std::vector<double>& z, double y_raw) {
  if (static_cast<int>(z.size()) != model.dim()) throw std::invalid_argument("append_point: dimension mismatch");
  Tensor grown = Tensor::matrix(model.size() + 1, model.dim());
  for (int i = 0; i < model.size(); ++i)
    for (int j = 0; j < model.dim(); ++j) grown.at(i, j) = model.Z.at(i, j);
  for (int j = 0; j < model.dim(); ++j) grown.at(model.size(), j) = z[static_cast<std::size_t>(j)];
  model.Z = grown;
  model.y_std.push_back(model.standardizer.to_std(y_raw));
  detail::LmlResult state = detail::log_marginal_likelihood(model.Z, model.y_std, model.hyp, false);
  model.factor = state.factor;
  model.alpha = state.alpha;
  model.log_marginal = state.value;
}

struct Prediction {
  double mean;  // standardized scale
  double sd;    // latent-function std (noise excluded)
};

inline Prediction predict(const GpModel& model, const double* z) {
  const int n = model.size(), d = model.dim();
  Tensor kstar = Tensor::vector(n);
  for (int i = 0; i < n; ++i)
    kstar[i] = rbf_kernel(z, &model.Z.data()[static_cast<std::size_t>(i) * d], d, model.hyp);
  double mean = model.hyp.mean_const;
  for (int i = 0; i < n; ++i) mean += kstar[i] * model.alpha[static_cast<std::size_t>(i)];
  Tensor w = math::solve_lower(model.factor.lower, kstar);
  double var = model.hyp.signal_var();
  for (int i = 0; i < n; ++i) var -= w[i] * w[i];
  var = std::max(var, 1e-12);
  return {mean, std::sqrt(var)};
}

inline Prediction predict(const GpModel& model, const Tensor& z) {
  if (z.size() != model.dim()) throw std::invalid_argument("predict: dimension mismatch");
  return predict(model, z.data().data());
}

// Mean per-point log N(y | mu, sigma^2 + noise) on held-out data,
// standardized scale.
inline double predictive_log_likelihood(const GpModel& model, const Tensor& z_test,
                                        const std::vector<double>& y_raw_test) {
  if (z_test.rows() != static_cast<int>(y_raw_test.size()))
    throw std::invalid_argument("predictive_log_likelihood: size mismatch");
  const int m = z_test.rows();
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    Prediction p = predict(model, &z_test.data()[static_cast<std::size_t>(i) * model.dim()]);
    const double var = p.sd * p.sd + model.hyp.noise_var();
    const double y = model.standardizer.to_std(y_raw_test[static_cast<std::size_t>(i)]);
    total += -0.5 * std::log(2.0 * 3.141592653589793238462643 * var) -
             0.5 * (y - p.mean) * (y - p.mean) / var;
  }
  return total / m;
}

}  // namespace latentbo::gp
