#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "latentbo/ad/tape.hpp"
#include "latentbo/math/rng.hpp"
#include "latentbo/math/tensor.hpp"

namespace latentbo::metric {

using math::Tensor;

enum class LossKind { simple, soft_contrastive, log_ratio, soft_triplet };

inline const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::simple: return "simple";
    case LossKind::soft_contrastive: return "soft_contrastive";
    case LossKind::log_ratio: return "log_ratio";
    case LossKind::soft_triplet: return "soft_triplet";
  }
  return "?";
}

inline bool is_pair_loss(LossKind k) {
  return k == LossKind::simple || k == LossKind::soft_contrastive;
}

// Losses operate on objective values min-max normalized to [0, 1]; eta and
// the soft-triplet negative-weight normalizer are expressed on that scale.
struct MetricConfig {
  double eta = 0.1;          // proximity threshold, normalized objective units
  double rho = 0.0;          // triplet margin, latent-distance units
  double nu = 0.1;           // tanh temperature
  double norm_order = 2.0;   // p of the latent norm
  LossKind kind = LossKind::soft_triplet;
  double beta_metric = 1.0;

  void validate() const {
    if (nu <= 0.0) throw std::invalid_argument("MetricConfig: nu must be > 0");
    if (norm_order < 1.0) throw std::invalid_argument("MetricConfig: norm_order must be >= 1");
    if (beta_metric < 0.0) throw std::invalid_argument("MetricConfig: beta_metric must be >= 0");
    const bool needs_partition = kind == LossKind::soft_contrastive || kind == LossKind::soft_triplet;
    if (needs_partition && eta <= 0.0)
      throw std::invalid_argument("MetricConfig: eta must be > 0 for partition-based losses");
    if (kind == LossKind::soft_triplet && eta >= 1.0)
      throw std::invalid_argument("MetricConfig: eta must be < 1 (normalized range) for soft_triplet");
  }
};

constexpr double kLogRatioEps = 1e-9;

// Min-max normalization of objective values to [0, 1]; a constant input maps
// to all 0.5 (degenerate for partitioning, reported downstream).
inline std::vector<double> minmax_normalize(const std::vector<double>& f) {
  if (f.empty()) throw std::invalid_argument("minmax_normalize: empty values");
  const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
  std::vector<double> out(f.size());
  if (*hi == *lo) {
    std::fill(out.begin(), out.end(), 0.5);
    return out;
  }
  const double range = *hi - *lo;
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = (f[i] - *lo) / range;
  return out;
}

// Positive/negative split around an anchor by objective proximity.
// positives: |f_anchor - f| < eta, negatives: the rest; anchor excluded.
inline std::pair<std::vector<int>, std::vector<int>> partition(int anchor,
                                                               const std::vector<double>& f,
                                                               double eta) {
  if (f.empty()) throw std::invalid_argument("partition: empty dataset");
  if (eta <= 0.0) throw std::invalid_argument("partition: eta must be > 0");
  if (anchor < 0 || anchor >= static_cast<int>(f.size()))
    throw std::invalid_argument("partition: anchor out of range");
  std::vector<int> pos, neg;
  for (int i = 0; i < static_cast<int>(f.size()); ++i) {
    if (i == anchor) continue;
    (std::abs(f[static_cast<std::size_t>(anchor)] - f[static_cast<std::size_t>(i)]) < eta ? pos : neg)
        .push_back(i);
  }
  return {std::move(pos), std::move(neg)};
}

inline bool triplet_valid(double fi, double fj, double fk, double eta) {
  return std::abs(fi - fj) < eta && std::abs(fi - fk) >= eta;
}

// ---- scalar losses ----

namespace detail {
inline void check_finite_inputs(std::initializer_list<double> vals, const char* what) {
  for (double v : vals)
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite input");
}
inline double f_nu(double a, double nu) { return std::tanh(a / (2.0 * nu)); }
}  // namespace detail

inline double soft_triplet_weights(double fi, double fj, double fk, const MetricConfig& cfg) {
  const double wp = detail::f_nu(cfg.eta - std::abs(fi - fj), cfg.nu) / detail::f_nu(cfg.eta, cfg.nu);
  const double wn =
      detail::f_nu(std::abs(fi - fk) - cfg.eta, cfg.nu) / detail::f_nu(1.0 - cfg.eta, cfg.nu);
  return wp * wn;
}

inline double soft_triplet_loss(const Tensor& zi, const Tensor& zj, const Tensor& zk, double fi,
                                double fj, double fk, const MetricConfig& cfg) {
  if (cfg.nu <= 0.0) throw std::invalid_argument("soft_triplet_loss: nu must be > 0");
  detail::check_finite_inputs({fi, fj, fk}, "soft_triplet_loss");
  math::ensure_finite(zi, "soft_triplet_loss");
  math::ensure_finite(zj, "soft_triplet_loss");
  math::ensure_finite(zk, "soft_triplet_loss");
  if (!triplet_valid(fi, fj, fk, cfg.eta)) return 0.0;
  const double dpos = math::pnorm(math::sub(zi, zj), cfg.norm_order);
  const double dneg = math::pnorm(math::sub(zi, zk), cfg.norm_order);
  return math::softplus_scalar(dpos + cfg.rho - dneg) * soft_triplet_weights(fi, fj, fk, cfg);
}

inline double soft_contrastive_loss(const Tensor& zi, const Tensor& zj, double fi, double fj,
                                    const MetricConfig& cfg) {
  if (cfg.eta <= 0.0) throw std::invalid_argument("soft_contrastive_loss: eta must be > 0");
  detail::check_finite_inputs({fi, fj}, "soft_contrastive_loss");
  math::ensure_finite(zi, "soft_contrastive_loss");
  math::ensure_finite(zj, "soft_contrastive_loss");
  const double dz = math::pnorm(math::sub(zi, zj), cfg.norm_order);
  const double df = std::abs(fi - fj);
  if (df < cfg.eta) {
    const double v = (1.0 / cfg.eta) * std::max(cfg.eta, dz) * (std::min(cfg.eta, dz) - df);
    return std::max(0.0, v);
  }
  const double v = (2.0 - (1.0 / cfg.eta) * std::min(cfg.eta, dz)) * (df - std::max(cfg.eta, dz));
  return std::max(0.0, v);
}

inline double log_ratio_loss(const Tensor& zi, const Tensor& zj, const Tensor& zk, double fi,
                             double fj, double fk, const MetricConfig& cfg) {
  detail::check_finite_inputs({fi, fj, fk}, "log_ratio_loss");
  const double dzij = math::pnorm(math::sub(zi, zj), cfg.norm_order);
  const double dzik = math::pnorm(math::sub(zi, zk), cfg.norm_order);
  const double dfij = std::abs(fi - fj);
  const double dfik = std::abs(fi - fk);
  const double lr = std::log((dzij + kLogRatioEps) / (dzik + kLogRatioEps)) -
                    std::log((dfij + kLogRatioEps) / (dfik + kLogRatioEps));
  return lr * lr;
}

inline double simple_loss(const Tensor& zi, const Tensor& zj, double fi, double fj,
                          const MetricConfig& cfg) {
  return std::abs(math::pnorm(math::sub(zi, zj), cfg.norm_order) - std::abs(fi - fj));
}

// ---- tape losses (latent codes are Vars; objective values are constants) ----

namespace detail {
inline ad::Var vmax_c(ad::Var x, double c) { return ad::add_scalar(ad::relu(ad::add_scalar(x, -c)), c); }
inline ad::Var vmin_c(ad::Var x, double c) {
  return ad::add_scalar(ad::neg(ad::relu(ad::neg(ad::add_scalar(x, -c)))), c);
}
}  // namespace detail

inline ad::Var soft_triplet_loss(ad::Var zi, ad::Var zj, ad::Var zk, double fi, double fj,
                                 double fk, const MetricConfig& cfg) {
  if (cfg.nu <= 0.0) throw std::invalid_argument("soft_triplet_loss: nu must be > 0");
  if (!triplet_valid(fi, fj, fk, cfg.eta)) return zi.tape->constant(0.0);
  ad::Var dpos = ad::pnorm(ad::sub(zi, zj), cfg.norm_order);
  ad::Var dneg = ad::pnorm(ad::sub(zi, zk), cfg.norm_order);
  ad::Var sp = ad::softplus(ad::add_scalar(ad::sub(dpos, dneg), cfg.rho));
  return ad::scale(sp, soft_triplet_weights(fi, fj, fk, cfg));
}

inline ad::Var soft_contrastive_loss(ad::Var zi, ad::Var zj, double fi, double fj,
                                     const MetricConfig& cfg) {
  if (cfg.eta <= 0.0) throw std::invalid_argument("soft_contrastive_loss: eta must be > 0");
  ad::Var dz = ad::pnorm(ad::sub(zi, zj), cfg.norm_order);
  const double df = std::abs(fi - fj);
  if (df < cfg.eta) {
    ad::Var factor = ad::scale(detail::vmax_c(dz, cfg.eta), 1.0 / cfg.eta);
    ad::Var gap = ad::add_scalar(detail::vmin_c(dz, cfg.eta), -df);
    return ad::relu(ad::mul(factor, gap));
  }
  ad::Var factor = ad::add_scalar(ad::scale(detail::vmin_c(dz, cfg.eta), -1.0 / cfg.eta), 2.0);
  ad::Var gap = ad::neg(ad::add_scalar(detail::vmax_c(dz, cfg.eta), -df));
  return ad::relu(ad::mul(factor, gap));
}

inline ad::Var log_ratio_loss(ad::Var zi, ad::Var zj, ad::Var zk, double fi, double fj, double fk,
                              const MetricConfig& cfg) {
  ad::Var dzij = ad::add_scalar(ad::pnorm(ad::sub(zi, zj), cfg.norm_order), kLogRatioEps);
  ad::Var dzik = ad::add_scalar(ad::pnorm(ad::sub(zi, zk), cfg.norm_order), kLogRatioEps);
  const double fratio = std::log((std::abs(fi - fj) + kLogRatioEps) / (std::abs(fi - fk) + kLogRatioEps));
  ad::Var lr = ad::add_scalar(ad::sub(ad::log(dzij), ad::log(dzik)), -fratio);
  return ad::mul(lr, lr);
}

inline ad::Var simple_loss(ad::Var zi, ad::Var zj, double fi, double fj, const MetricConfig& cfg) {
  ad::Var dz = ad::pnorm(ad::sub(zi, zj), cfg.norm_order);
  return ad::abs(ad::add_scalar(dz, -std::abs(fi - fj)));
}

// ---- weights ----

enum class WeightScheme { rank, proportional_to_f };

// Rank weights: w_i proportional to 1/(k*N + rank_i), rank 0 = best (highest
// f), ties share the mean of their tied ranks; normalized to sum to 1.
inline std::vector<double> rank_weights(const std::vector<double>& values, double k) {
  if (values.empty()) throw std::invalid_argument("rank_weights: empty values");
  if (k <= 0.0) throw std::invalid_argument("rank_weights: k must be > 0");
  const int n = static_cast<int>(values.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return values[static_cast<std::size_t>(a)] > values[static_cast<std::size_t>(b)];
  });
  std::vector<double> rank(static_cast<std::size_t>(n));
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && values[static_cast<std::size_t>(order[static_cast<std::size_t>(j + 1)])] ==
                            values[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])])
      ++j;
    const double mean_rank = 0.5 * (i + j);
    for (int t = i; t <= j; ++t) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(t)])] = mean_rank;
    i = j + 1;
  }
  std::vector<double> w(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int t = 0; t < n; ++t) {
    w[static_cast<std::size_t>(t)] = 1.0 / (k * n + rank[static_cast<std::size_t>(t)]);
    total += w[static_cast<std::size_t>(t)];
  }
  for (double& x : w) x /= total;
  return w;
}

// w_i proportional to f_i, shifted to be non-negative; uniform when the
// values have zero range.
inline std::vector<double> proportional_weights(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("proportional_weights: empty values");
  const double lo = *std::min_element(values.begin(), values.end());
  std::vector<double> w(values.size());
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    w[i] = values[i] - lo;
    total += w[i];
  }
  if (total <= 0.0) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(values.size()));
    return w;
  }
  for (double& x : w) x /= total;
  return w;
}

inline std::vector<double> datum_weights(const std::vector<double>& values, double k,
                                         WeightScheme scheme) {
  return scheme == WeightScheme::rank ? rank_weights(values, k) : proportional_weights(values);
}

template <std::size_t N>
double composite_weight(const std::vector<double>& w, const std::array<int, N>& tuple) {
  double p = 1.0;
  for (int idx : tuple) p *= w[static_cast<std::size_t>(idx)];
  return p;
}

// ---- mini-batches ----

struct PairBatch {
  std::vector<std::array<int, 2>> pairs;
};
struct TripletBatch {
  std::vector<std::array<int, 3>> triplets;  // anchor, positive, negative
};

// Distinct unordered pairs, uniform without replacement within the batch.
inline PairBatch sample_pair_batch(int n, int batch_size, math::Rng& rng) {
  if (n < 2) throw std::invalid_argument("sample_pair_batch: need at least 2 points");
  const long long total = static_cast<long long>(n) * (n - 1) / 2;
  if (batch_size > total) throw std::invalid_argument("sample_pair_batch: batch exceeds pair count");
  PairBatch batch;
  std::set<std::pair<int, int>> seen;
  while (static_cast<int>(batch.pairs.size()) < batch_size) {
    int i = rng.uniform_int(n);
    int j = rng.uniform_int(n - 1);
    if (j >= i) ++j;
    const auto key = std::minmax(i, j);
    if (seen.insert(key).second) batch.pairs.push_back({key.first, key.second});
  }
  return batch;
}

// Anchors first (without replacement per pass), then one positive and one
// negative per anchor. For soft_triplet, validity follows the eta partition;
// for log_ratio any distinct companions are valid.
inline TripletBatch sample_triplet_batch(const std::vector<double>& f, const MetricConfig& cfg,
                                         int batch_size, math::Rng& rng) {
  const int n = static_cast<int>(f.size());
  if (n < 3) throw std::invalid_argument("sample_triplet_batch: need at least 3 points");
  const bool partitioned = cfg.kind == LossKind::soft_triplet;

  std::vector<int> anchors;
  std::vector<std::pair<std::vector<int>, std::vector<int>>> splits(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (partitioned) {
      splits[static_cast<std::size_t>(i)] = partition(i, f, cfg.eta);
      if (!splits[static_cast<std::size_t>(i)].first.empty() &&
          !splits[static_cast<std::size_t>(i)].second.empty())
        anchors.push_back(i);
    } else {
      anchors.push_back(i);
    }
  }
  if (anchors.empty())
    throw std::runtime_error("sample_triplet_batch: no valid triplet exists for any anchor at eta=" +
                             std::to_string(cfg.eta));

  TripletBatch batch;
  std::set<std::array<int, 3>> seen;
  std::vector<int> pool;
  int guard = 0;
  while (static_cast<int>(batch.triplets.size()) < batch_size) {
    if (pool.empty()) {
      pool = anchors;
      rng.shuffle(pool);
    }
    const int a = pool.back();
    pool.pop_back();
    std::array<int, 3> t{};
    t[0] = a;
    if (partitioned) {
      const auto& [pos, neg] = splits[static_cast<std::size_t>(a)];
      t[1] = pos[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(pos.size())))];
      t[2] = neg[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(neg.size())))];
    } else {
      int j = rng.uniform_int(n - 1);
      if (j >= a) ++j;
      int k = rng.uniform_int(n - 2);
      for (int skip : {std::min(a, j), std::max(a, j)})
        if (k >= skip) ++k;
      t[1] = j;
      t[2] = k;
    }
    if (seen.insert(t).second) {
      batch.triplets.push_back(t);
      guard = 0;
    } else if (++guard > 64 * batch_size + 1024) {
      throw std::invalid_argument("sample_triplet_batch: batch exceeds number of distinct valid tuples");
    }
  }
  return batch;
}

}  // namespace latentbo::metric
