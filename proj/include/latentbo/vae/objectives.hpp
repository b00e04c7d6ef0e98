#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "latentbo/metric/metric.hpp"
#include "latentbo/vae/model.hpp"

namespace latentbo::vae {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)

// Per-datum reconstruction log-likelihood, one value per batch row.
inline ad::Var recon_loglik_rows(ad::Tape& tape, const VaeVars& v, ad::Var logits,
                                 const Tensor& x_features, const InputCodec& codec) {
  (void)v;
  if (codec.kind == InputKind::binary_grid) {
    // log p(x|l) = -[softplus(-l) x + softplus(l) (1-x)], summed over pixels
    Tensor ones_minus = x_features;
    for (int i = 0; i < ones_minus.size(); ++i) ones_minus[i] = 1.0 - ones_minus[i];
    ad::Var x_c = tape.constant(x_features);
    ad::Var xm_c = tape.constant(ones_minus);
    ad::Var on = ad::mul(ad::softplus(ad::neg(logits)), x_c);
    ad::Var off = ad::mul(ad::softplus(logits), xm_c);
    return ad::neg(ad::sum_rows(ad::add(on, off)));
  }
  // categorical per position: sum_pos (logit[token] - logsumexp(position))
  const int n = x_features.rows();
  const int positions = n * codec.seq_len;
  ad::Var flat = ad::reshape(logits, positions, codec.alphabet);
  ad::Var lse = ad::logsumexp_rows(flat);                       // [n*L]
  ad::Var tok = ad::sum_rows(ad::mul(flat, tape.constant(
                    math::reshape(x_features, positions, codec.alphabet))));  // [n*L]
  ad::Var per_pos = ad::sub(tok, lse);
  return ad::sum_rows(ad::reshape(per_pos, n, codec.seq_len));  // [n]
}

// KL(q(z|x) || N(0, I)) per batch row, closed form for diagonal Gaussians.
inline ad::Var kl_rows(ad::Var mean_v, ad::Var logvar) {
  ad::Var t = ad::add(ad::mul(mean_v, mean_v), ad::exp(logvar));
  return ad::scale(ad::sum_rows(ad::add_scalar(ad::sub(t, logvar), -1.0)), 0.5);
}

struct ElboGraph {
  ad::Var value;    // scalar objective (to maximize)
  ad::Var z;        // [n, d] reparameterized latent sample
  ad::Var per_row;  // [n] per-datum ELBO terms
};

// Mean over the batch of [log g(x|z) - beta_kl * KL], one reparameterized
// sample per datum.
inline ElboGraph unlabeled_elbo(ad::Tape& tape, const VaeVars& v, const Tensor& x_features,
                                const InputCodec& codec, double beta_kl, math::Rng& rng) {
  ad::Var x_c = tape.constant(x_features);
  auto [mean_v, logvar] = encode_graph(v, x_c);
  Tensor eps = Tensor::matrix(x_features.rows(), mean_v.value().cols());
  for (int i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
  ad::Var z = ad::gauss_sample(mean_v, logvar, eps);
  ad::Var logits = decode_logits_graph(v, z);
  ad::Var ll = recon_loglik_rows(tape, v, logits, x_features, codec);
  ad::Var per = ad::sub(ll, ad::scale(kl_rows(mean_v, logvar), beta_kl));
  return {ad::mean(per), z, per};
}

// Weighted sum over the batch of per-datum ELBO terms (weights are the
// caller's rank weights over the labeled set, constants on the tape).
inline ElboGraph labeled_elbo(ad::Tape& tape, const VaeVars& v, const Tensor& x_features,
                              const InputCodec& codec, const std::vector<double>& weights,
                              double beta_kl, math::Rng& rng) {
  ElboGraph base = unlabeled_elbo(tape, v, x_features, codec, beta_kl, rng);
  ad::Var w_c = tape.constant(Tensor::from(weights));
  return {ad::dot(w_c, base.per_row), base.z, base.per_row};
}

// labeled_elbo plus the weighted target-prediction log-likelihood: a unit
// variance Gaussian on standardized targets, sharing the decoder trunk and
// the same latent sample.
inline ElboGraph labeled_elbo_tp(ad::Tape& tape, const VaeVars& v, const Tensor& x_features,
                                 const InputCodec& codec, const std::vector<double>& weights,
                                 const std::vector<double>& std_targets, double beta_kl,
                                 double beta_r, math::Rng& rng) {
  ElboGraph base = labeled_elbo(tape, v, x_features, codec, weights, beta_kl, rng);
  if (beta_r == 0.0) return base;
  ad::Var pred = target_graph(v, base.z);  // [n]
  ad::Var diff = ad::sub(pred, tape.constant(Tensor::from(std_targets)));
  ad::Var ll = ad::add_scalar(ad::scale(ad::mul(diff, diff), -0.5), -kHalfLog2Pi);
  ad::Var w_c = tape.constant(Tensor::from(weights));
  return {ad::add(base.value, ad::scale(ad::dot(w_c, ll), beta_r)), base.z, base.per_row};
}

// Metric regularizer over a sampled tuple batch: encodes each involved datum
// once (one reparameterized sample per latent), evaluates the configured loss
// per tuple and sums them under the tuple weights. Tuple weights are the
// rank-weight products renormalized to sum to one within the batch (the
// minibatch normalizing constant); beta_metric is applied by the caller.
struct MetricBatch {
  std::vector<int> members;                    // dataset indices, unique
  std::vector<std::array<int, 3>> tuples;      // local indices; pair batches use [2] = -1
  std::vector<double> tuple_weights;           // normalized within the batch
};

inline MetricBatch build_metric_batch(const std::vector<double>& f_norm,
                                      const std::vector<double>& datum_weights,
                                      const metric::MetricConfig& cfg, int batch_size,
                                      math::Rng& rng) {
  MetricBatch out;
  std::vector<std::array<int, 3>> raw;
  if (metric::is_pair_loss(cfg.kind)) {
    auto batch = metric::sample_pair_batch(static_cast<int>(f_norm.size()), batch_size, rng);
    for (const auto& pr : batch.pairs) raw.push_back({pr[0], pr[1], -1});
  } else {
    auto batch = metric::sample_triplet_batch(f_norm, cfg, batch_size, rng);
    for (const auto& t : batch.triplets) raw.push_back(t);
  }
  std::vector<int> local(f_norm.size(), -1);
  double wsum = 0.0;
  for (const auto& t : raw) {
    std::array<int, 3> loc{-1, -1, -1};
    double w = 1.0;
    for (int s = 0; s < 3; ++s) {
      if (t[static_cast<std::size_t>(s)] < 0) continue;
      const int gi = t[static_cast<std::size_t>(s)];
      if (local[static_cast<std::size_t>(gi)] < 0) {
        local[static_cast<std::size_t>(gi)] = static_cast<int>(out.members.size());
        out.members.push_back(gi);
      }
      loc[static_cast<std::size_t>(s)] = local[static_cast<std::size_t>(gi)];
      w *= datum_weights[static_cast<std::size_t>(gi)];
    }
    out.tuples.push_back(loc);
    out.tuple_weights.push_back(w);
    wsum += w;
  }
  if (wsum > 0.0)
    for (double& w : out.tuple_weights) w /= wsum;
  return out;
}

struct MetricGraph {
  ad::Var value;  // scalar penalty
  ad::Var z;      // [m, d] latent sample for the batch members
};

inline MetricGraph metric_penalty(ad::Tape& tape, const VaeVars& v, const Tensor& member_features,
                                  const InputCodec& codec, const MetricBatch& batch,
                                  const std::vector<double>& f_norm_members,
                                  const metric::MetricConfig& cfg, math::Rng& rng) {
  if (batch.tuples.empty()) throw std::invalid_argument("metric_penalty: empty batch");
  (void)codec;
  ad::Var x_c = tape.constant(member_features);
  auto [mean_v, logvar] = encode_graph(v, x_c);
  Tensor eps = Tensor::matrix(member_features.rows(), mean_v.value().cols());
  for (int i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
  ad::Var z = ad::gauss_sample(mean_v, logvar, eps);

  ad::Var total = tape.constant(0.0);
  for (std::size_t t = 0; t < batch.tuples.size(); ++t) {
    const auto& tup = batch.tuples[t];
    ad::Var zi = ad::select_row(z, tup[0]);
    ad::Var zj = ad::select_row(z, tup[1]);
    const double fi = f_norm_members[static_cast<std::size_t>(tup[0])];
    const double fj = f_norm_members[static_cast<std::size_t>(tup[1])];
    ad::Var term = tape.constant(0.0);
    switch (cfg.kind) {
      case metric::LossKind::simple:
        term = metric::simple_loss(zi, zj, fi, fj, cfg);
        break;
      case metric::LossKind::soft_contrastive:
        term = metric::soft_contrastive_loss(zi, zj, fi, fj, cfg);
        break;
      case metric::LossKind::log_ratio: {
        ad::Var zk = ad::select_row(z, tup[2]);
        term = metric::log_ratio_loss(zi, zj, zk, fi, fj,
                                      f_norm_members[static_cast<std::size_t>(tup[2])], cfg);
        break;
      }
      case metric::LossKind::soft_triplet: {
        ad::Var zk = ad::select_row(z, tup[2]);
        term = metric::soft_triplet_loss(zi, zj, zk, fi, fj,
                                         f_norm_members[static_cast<std::size_t>(tup[2])], cfg);
        break;
      }
    }
    total = ad::add(total, ad::scale(term, batch.tuple_weights[t]));
  }
  return {total, z};
}

}  // namespace latentbo::vae
