#pragma once

#include <functional>
#include <vector>

#include "latentbo/math/rng.hpp"
#include "latentbo/tasks/tasks.hpp"

namespace latentbo::bo {

struct RegretCurve {
  std::vector<double> terms;       // f(x*) - E_decoder[f(x)] per acquired latent
  std::vector<double> cumulative;  // running sum
};

// Cumulative regret over a sequence of acquired latents: the decoder
// expectation is estimated by n_decode_samples Monte-Carlo decodes per point.
// The decoder is a callback so scripted decoders can stand in for a VAE.
inline RegretCurve cumulative_regret(
    const std::vector<std::vector<double>>& acquired_latents,
    const std::function<tasks::Input(const std::vector<double>&, math::Rng&)>& decode,
    const std::function<double(const tasks::Input&)>& objective, double f_star,
    int n_decode_samples, math::Rng& rng) {
  if (n_decode_samples < 1) throw std::invalid_argument("cumulative_regret: need >= 1 decode sample");
  RegretCurve out;
  double acc = 0.0;
  for (const auto& z : acquired_latents) {
    double mean_f = 0.0;
    for (int s = 0; s < n_decode_samples; ++s) mean_f += objective(decode(z, rng));
    mean_f /= n_decode_samples;
    const double term = f_star - mean_f;
    acc += term;
    out.terms.push_back(term);
    out.cumulative.push_back(acc);
  }
  return out;
}

}  // namespace latentbo::bo
