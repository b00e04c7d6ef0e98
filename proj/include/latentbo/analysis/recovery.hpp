#pragma once

#include <stdexcept>
#include <vector>

#include "latentbo/bo/loop.hpp"

namespace latentbo::analysis {

// Probe of the decoder's ability to regenerate near-optimal inputs: the
// Monte-Carlo probability that a decode of the tracked latent point is more
// than alpha-similar to the known maximizer, tracked across retrainings. The
// accept rule only ever replaces the tracked point with a strictly better
// one, so the trace is non-decreasing by construction.
struct RecoveryTrace {
  std::vector<double> p;                 // p(0..L)
  std::vector<std::vector<double>> z;    // tracked latent per step
  std::vector<bool> capped;              // candidate cap exhausted at this step
  double alpha = 0.8;
  int mc_samples = 100;
  int candidate_cap = 200;
};

class RecoveryProbe {
 public:
  RecoveryProbe(const tasks::Task& task, double alpha = 0.8, int mc_samples = 100,
                int candidate_cap = 200)
      : task_(task) {
    if (mc_samples < 1 || candidate_cap < 1)
      throw std::invalid_argument("RecoveryProbe: samples and cap must be >= 1");
    trace_.alpha = alpha;
    trace_.mc_samples = mc_samples;
    trace_.candidate_cap = candidate_cap;
  }

  // epoch 0: tracked point is the encoder posterior mean of x*; later epochs
  // sample candidates from the encoder posterior around x* and accept the
  // first candidate whose estimate strictly improves on the current value
  // (carry forward and flag the step when the cap runs out).
  void observe(int epoch, const vae::VaeParams& params, math::Rng& rng) {
    math::Tensor star_features = params.codec.to_features(task_.x_star);
    auto posterior = vae::encode(params, star_features);

    if (epoch == 0 || trace_.p.empty()) {
      std::vector<double> z(posterior.mean.data().begin(), posterior.mean.data().end());
      const double p0 = estimate(params, z, rng);
      trace_.p.assign(1, p0);
      trace_.z.assign(1, std::move(z));
      trace_.capped.assign(1, false);
      return;
    }

    const double current = trace_.p.back();
    for (int c = 0; c < trace_.candidate_cap; ++c) {
      std::vector<double> z(static_cast<std::size_t>(params.latent_dim));
      for (int d = 0; d < params.latent_dim; ++d)
        z[static_cast<std::size_t>(d)] = posterior.mean.at(0, d) +
                                         std::exp(0.5 * posterior.logvar.at(0, d)) * rng.normal();
      const double pc = estimate(params, z, rng);
      if (pc > current) {
        trace_.p.push_back(pc);
        trace_.z.push_back(std::move(z));
        trace_.capped.push_back(false);
        return;
      }
    }
    trace_.p.push_back(current);
    trace_.z.push_back(trace_.z.back());
    trace_.capped.push_back(true);
  }

  double estimate(const vae::VaeParams& params, const std::vector<double>& z,
                  math::Rng& rng) const {
    math::Tensor zt = math::Tensor::from(z);
    int hits = 0;
    for (int s = 0; s < trace_.mc_samples; ++s) {
      tasks::Input x = vae::sample_decode(params, zt, rng);
      if (task_.similarity(x, task_.x_star) > trace_.alpha) ++hits;
    }
    return static_cast<double>(hits) / trace_.mc_samples;
  }

  const RecoveryTrace& trace() const { return trace_; }

 private:
  tasks::Task task_;
  RecoveryTrace trace_;
};

// Convenience wrapper: runs the optimization loop with a probe attached at
// every retraining; the probe consumes an independent substream so it does
// not perturb the run itself.
inline RecoveryTrace run_recovery_probe(const tasks::Task& task, const tasks::Dataset& labeled,
                                        const math::Tensor* unlabeled_features,
                                        const vae::VaeParams& pretrained,
                                        const bo::RunConfig& cfg, double alpha = 0.8,
                                        int mc_samples = 100, int candidate_cap = 200) {
  RecoveryProbe probe(task, alpha, mc_samples, candidate_cap);
  math::Rng probe_rng = math::Rng(cfg.seed).split(0x70726f6265ULL);
  bo::run(task, labeled, unlabeled_features, pretrained, cfg,
          [&](int epoch, const vae::VaeParams& params) { probe.observe(epoch, params, probe_rng); });
  return probe.trace();
}

}  // namespace latentbo::analysis
