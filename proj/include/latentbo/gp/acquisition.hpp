#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "latentbo/gp/gp.hpp"

namespace latentbo::gp {

inline double normal_cdf(double s) { return 0.5 * std::erfc(-s / std::sqrt(2.0)); }
inline double normal_pdf(double s) {
  return std::exp(-0.5 * s * s) / std::sqrt(2.0 * 3.141592653589793238462643);
}

// EI(mu, sigma, xi) = sigma * (s Phi(s) + phi(s)) with s = (mu - xi)/sigma;
// max(mu - xi, 0) in the degenerate sigma = 0 limit.
inline double expected_improvement(double mu, double sigma, double xi) {
  if (sigma < 0.0) throw std::invalid_argument("expected_improvement: sigma must be >= 0");
  if (sigma == 0.0) return std::max(mu - xi, 0.0);
  const double s = (mu - xi) / sigma;
  return sigma * (s * normal_cdf(s) + normal_pdf(s));
}

inline double ei_at(const GpModel& model, const std::vector<double>& z, double xi) {
  Prediction p = predict(model, z.data());
  return expected_improvement(p.mean, p.sd, xi);
}

// Box bounds for the acquisition search: latent data extent widened by one
// lengthscale per dimension.
inline std::vector<std::pair<double, double>> acquisition_bounds(const GpModel& model) {
  std::vector<std::pair<double, double>> bounds(static_cast<std::size_t>(model.dim()));
  for (int d = 0; d < model.dim(); ++d) {
    double lo = model.Z.at(0, d), hi = model.Z.at(0, d);
    for (int i = 1; i < model.size(); ++i) {
      lo = std::min(lo, model.Z.at(i, d));
      hi = std::max(hi, model.Z.at(i, d));
    }
    const double ell = model.hyp.lengthscale(d);
    bounds[static_cast<std::size_t>(d)] = {lo - ell, hi + ell};
  }
  return bounds;
}

struct AcqOptions {
  int starts = 32;
  int max_iters = 100;
  double fd_step = 1e-5;
};

struct AcqResult {
  std::vector<double> z;
  double ei = 0.0;
  bool fallback = false;  // all starts flat at EI == 0; z is the max-variance start
};

// Best of `starts` gradient ascents from uniform starts in the box.
// Gradients by central finite differences, backtracking line search, ties
// broken by the first-found maximum. If every start lands at EI == 0 the
// start with the largest predictive variance is returned instead.
inline AcqResult optimize_acquisition(const GpModel& model,
                                      const std::vector<std::pair<double, double>>& bounds,
                                      double xi, math::Rng& rng, const AcqOptions& opts = {}) {
  const int d = model.dim();
  if (static_cast<int>(bounds.size()) != d)
    throw std::invalid_argument("optimize_acquisition: bounds dimension mismatch");

  auto clip = [&](std::vector<double>& z) {
    for (int j = 0; j < d; ++j)
      z[static_cast<std::size_t>(j)] = std::clamp(z[static_cast<std::size_t>(j)],
                                                  bounds[static_cast<std::size_t>(j)].first,
                                                  bounds[static_cast<std::size_t>(j)].second);
  };

  AcqResult best;
  best.ei = -1.0;
  std::vector<double> best_sigma_start;
  double best_sigma = -1.0;

  for (int start = 0; start < opts.starts; ++start) {
    std::vector<double> z(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j)
      z[static_cast<std::size_t>(j)] = rng.uniform(bounds[static_cast<std::size_t>(j)].first,
                                                   bounds[static_cast<std::size_t>(j)].second);
    {
      Prediction p0 = predict(model, z.data());
      if (p0.sd > best_sigma) {
        best_sigma = p0.sd;
        best_sigma_start = z;
      }
    }

    double value = ei_at(model, z, xi);
    for (int iter = 0; iter < opts.max_iters; ++iter) {
      std::vector<double> grad(static_cast<std::size_t>(d));
      double gnorm = 0.0;
      for (int j = 0; j < d; ++j) {
        std::vector<double> zp = z, zm = z;
        zp[static_cast<std::size_t>(j)] += opts.fd_step;
        zm[static_cast<std::size_t>(j)] -= opts.fd_step;
        grad[static_cast<std::size_t>(j)] = (ei_at(model, zp, xi) - ei_at(model, zm, xi)) / (2.0 * opts.fd_step);
        gnorm += grad[static_cast<std::size_t>(j)] * grad[static_cast<std::size_t>(j)];
      }
      gnorm = std::sqrt(gnorm);
      if (gnorm < 1e-12) break;

      double step = 1.0;
      bool moved = false;
      for (int bt = 0; bt < 20; ++bt) {
        std::vector<double> cand = z;
        for (int j = 0; j < d; ++j) cand[static_cast<std::size_t>(j)] += step * grad[static_cast<std::size_t>(j)] / gnorm;
        clip(cand);
        const double cv = ei_at(model, cand, xi);
        if (cv > value + 1e-14) {
          z = std::move(cand);
          value = cv;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }

    if (value > best.ei) {
      best.ei = value;
      best.z = z;
    }
  }

  if (best.ei <= 0.0) {
    best.z = best_sigma_start;
    best.ei = ei_at(model, best.z, xi);
    best.fallback = true;
  }
  return best;
}

}  // namespace latentbo::gp
