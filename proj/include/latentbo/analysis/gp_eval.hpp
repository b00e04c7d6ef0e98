#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "latentbo/bo/loop.hpp"

namespace latentbo::analysis {

struct GpGeneralization {
  double mean = 0.0;
  double sd = 0.0;
  std::vector<double> per_split;
};

// Random 80/20 splits of the encoded labeled set: fit a GP on the training
// latents, report the held-out predictive log-likelihood, mean +- sd across
// splits.
inline GpGeneralization gp_generalization(const vae::VaeParams& params,
                                          const std::vector<tasks::Input>& inputs,
                                          const std::vector<double>& f, int splits,
                                          const gp::FitOptions& fit_opts, math::Rng& rng,
                                          double train_fraction = 0.8) {
  if (splits < 1) throw std::invalid_argument("gp_generalization: splits must be >= 1");
  auto latents_opt = bo::build_latent_dataset(params, inputs);
  if (!latents_opt) throw std::invalid_argument("gp_generalization: empty labeled set");
  const math::Tensor& latents = *latents_opt;
  const int n = latents.rows();
  const int n_train = std::max(2, static_cast<int>(std::floor(train_fraction * n)));
  if (n_train >= n) throw std::invalid_argument("gp_generalization: no held-out points");

  GpGeneralization out;
  for (int s = 0; s < splits; ++s) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    math::Tensor z_train = math::Tensor::matrix(n_train, latents.cols());
    std::vector<double> y_train;
    math::Tensor z_test = math::Tensor::matrix(n - n_train, latents.cols());
    std::vector<double> y_test;
    for (int i = 0; i < n; ++i) {
      const int src = order[static_cast<std::size_t>(i)];
      if (i < n_train) {
        for (int dd = 0; dd < latents.cols(); ++dd) z_train.at(i, dd) = latents.at(src, dd);
        y_train.push_back(f[static_cast<std::size_t>(src)]);
      } else {
        for (int dd = 0; dd < latents.cols(); ++dd) z_test.at(i - n_train, dd) = latents.at(src, dd);
        y_test.push_back(f[static_cast<std::size_t>(src)]);
      }
    }
    gp::GpModel model = gp::fit(z_train, y_train, fit_opts, rng);
    out.per_split.push_back(gp::predictive_log_likelihood(model, z_test, y_test));
  }
  out.mean = std::accumulate(out.per_split.begin(), out.per_split.end(), 0.0) /
             static_cast<double>(out.per_split.size());
  double var = 0.0;
  for (double v : out.per_split) var += (v - out.mean) * (v - out.mean);
  out.sd = out.per_split.size() > 1
               ? std::sqrt(var / static_cast<double>(out.per_split.size() - 1))
               : 0.0;
  return out;
}

}  // namespace latentbo::analysis
