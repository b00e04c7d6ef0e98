#pragma once

#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "latentbo/vae/objectives.hpp"

namespace latentbo::vae {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(double lr, AdamConfig cfg = {}) : lr_(lr), cfg_(cfg) {}

  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    if (m_.empty()) {
      for (const Tensor* p : params) {
        Tensor z = *p;
        for (double& v : z.data()) v = 0.0;
        m_.push_back(z);
        v_.push_back(z);
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& p = *params[i];
      const Tensor& g = grads[i];
      for (int j = 0; j < p.size(); ++j) {
        m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g[j];
        v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g[j] * g[j];
        p[j] -= lr_ * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + cfg_.eps);
      }
    }
  }

 private:
  double lr_;
  AdamConfig cfg_;
  int t_ = 0;
  std::vector<Tensor> m_, v_;
};

struct TrainConfig {
  int epochs = 1;
  double lr = 1e-3;
  int batch_size = 256;
  double beta_kl_init = 1e-6;   // pretraining anneal start
  double beta_kl_final = 1e-4;  // pretraining anneal end; fixed value for finetuning
  double beta_r = 10.0;         // target-prediction multiplier
  int metric_batch = 16;
  int unlabeled_batch = 256;
  AdamConfig adam;

  void validate() const {
    if (lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be > 0");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (beta_kl_init < 0.0 || beta_kl_final < 0.0)
      throw std::invalid_argument("TrainConfig: beta_kl must be >= 0");
    if (beta_r < 0.0) throw std::invalid_argument("TrainConfig: beta_r must be >= 0");
  }
};

// Which ELBO components the finetuning objective assembles.
struct ObjectiveSpec {
  bool target_prediction = false;
  std::optional<metric::LossKind> metric_kind;
  bool include_unlabeled = false;
};

struct TrainTrace {
  std::vector<double> epoch_loss;  // mean per-batch loss (negative objective)
};

struct TrainDivergence : std::runtime_error {
  explicit TrainDivergence(int epoch, const std::string& detail = "non-finite loss")
      : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": " + detail),
        epoch_index(epoch) {}
  int epoch_index;
};

namespace detail {

inline Tensor take_rows(const Tensor& m, const std::vector<int>& idx) {
  Tensor out = Tensor::matrix(static_cast<int>(idx.size()), m.cols());
  for (int i = 0; i < static_cast<int>(idx.size()); ++i)
    for (int j = 0; j < m.cols(); ++j) out.at(i, j) = m.at(idx[static_cast<std::size_t>(i)], j);
  return out;
}

template <class T>
std::vector<T> take(const std::vector<T>& v, const std::vector<int>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(v[static_cast<std::size_t>(i)]);
  return out;
}

inline std::vector<std::vector<int>> make_batches(int n, int batch_size, math::Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n; start += batch_size) {
    const int end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

inline double anneal(double init, double final_v, int epoch, int total_epochs) {
  if (total_epochs <= 1) return final_v;
  const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
  return init + (final_v - init) * t;
}

}  // namespace detail

// Unsupervised pretraining on unlabeled features; KL weight annealed linearly
// from beta_kl_init to beta_kl_final across epochs.
inline TrainTrace pretrain(VaeParams& params, const Tensor& unlabeled_features,
                           const TrainConfig& cfg, math::Rng& rng) {
  cfg.validate();
  TrainTrace trace;
  if (cfg.epochs == 0) return trace;
  Adam opt(cfg.lr, cfg.adam);
  auto tensors = param_tensors(params);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double beta = detail::anneal(cfg.beta_kl_init, cfg.beta_kl_final, epoch, cfg.epochs);
    auto batches = detail::make_batches(unlabeled_features.rows(), cfg.batch_size, rng);
    double loss_sum = 0.0;
    for (const auto& idx : batches) {
      try {
        ad::Tape tape;
        VaeVars vars = lift(tape, params);
        Tensor xb = detail::take_rows(unlabeled_features, idx);
        ElboGraph elbo = unlabeled_elbo(tape, vars, xb, params.codec, beta, rng);
        ad::Var loss = ad::neg(elbo.value);
        const double lv = loss.value().scalar_value();
        if (!std::isfinite(lv)) throw TrainDivergence(epoch);
        tape.backward(loss);
        std::vector<Tensor> grads;
        grads.reserve(vars.leaves.size());
        for (ad::Var leaf : vars.leaves) grads.push_back(tape.grad(leaf));
        opt.step(tensors, grads);
        loss_sum += lv;
      } catch (const TrainDivergence&) {
        throw;
      } catch (const std::runtime_error& e) {
        throw TrainDivergence(epoch, e.what());
      }
    }
    trace.epoch_loss.push_back(loss_sum / static_cast<double>(batches.size()));
  }
  return trace;
}

struct FinetuneData {
  const Tensor* labeled_features = nullptr;   // [N, feat]
  const std::vector<double>* f_raw = nullptr; // raw objective values, size N
  const std::vector<double>* weights = nullptr;  // datum weights over the labeled set, sum 1
  const Tensor* unlabeled_features = nullptr; // optional, used when spec.include_unlabeled
};

// Supervised finetuning: maximizes the weighted labeled ELBO (optionally with
// target prediction), minus beta_metric times the metric penalty, optionally
// plus the unlabeled ELBO. The labeled component is scaled by N/batch so a
// uniform-weight, metric-free run reproduces unlabeled-ELBO training exactly.
inline TrainTrace finetune(VaeParams& params, const FinetuneData& data, const ObjectiveSpec& spec,
                           const metric::MetricConfig& metric_cfg, const TrainConfig& cfg,
                           math::Rng& rng) {
  cfg.validate();
  if (!data.labeled_features || !data.f_raw || !data.weights)
    throw std::invalid_argument("finetune: labeled data and weights required");
  if (spec.target_prediction && !params.has_target_head)
    throw std::invalid_argument("finetune: target prediction requested but head absent");
  if (spec.include_unlabeled && !data.unlabeled_features)
    throw std::invalid_argument("finetune: include_unlabeled set but no unlabeled features");
  const int n = data.labeled_features->rows();
  if (static_cast<int>(data.f_raw->size()) != n || static_cast<int>(data.weights->size()) != n)
    throw std::invalid_argument("finetune: value/weight count mismatch");

  const bool use_metric =
      spec.metric_kind.has_value() && metric_cfg.beta_metric > 0.0;
  metric::MetricConfig mcfg = metric_cfg;
  if (use_metric) {
    mcfg.kind = *spec.metric_kind;
    mcfg.validate();
  }
  std::vector<double> f_norm = use_metric ? metric::minmax_normalize(*data.f_raw)
                                          : std::vector<double>();

  // standardized targets for the prediction head
  std::vector<double> f_std;
  if (spec.target_prediction) {
    double mu = 0.0;
    for (double v : *data.f_raw) mu += v;
    mu /= n;
    double var = 0.0;
    for (double v : *data.f_raw) var += (v - mu) * (v - mu);
    const double sd = std::sqrt(std::max(var / n, 1e-12));
    f_std.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) f_std[static_cast<std::size_t>(i)] = ((*data.f_raw)[static_cast<std::size_t>(i)] - mu) / sd;
  }

  TrainTrace trace;
  if (cfg.epochs == 0) return trace;
  Adam opt(cfg.lr, cfg.adam);
  auto tensors = param_tensors(params);
  std::vector<std::vector<int>> unlabeled_batches;
  std::size_t unlabeled_cursor = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double beta = cfg.beta_kl_final;
    auto batches = detail::make_batches(n, cfg.batch_size, rng);
    double loss_sum = 0.0;
    auto batch_step = [&](const std::vector<int>& idx) {
      ad::Tape tape;
      VaeVars vars = lift(tape, params);
      Tensor xb = detail::take_rows(*data.labeled_features, idx);
      std::vector<double> wb = detail::take(*data.weights, idx);

      ElboGraph label = spec.target_prediction
                            ? labeled_elbo_tp(tape, vars, xb, params.codec, wb,
                                              detail::take(f_std, idx), beta, cfg.beta_r, rng)
                            : labeled_elbo(tape, vars, xb, params.codec, wb, beta, rng);
      // batch-average estimator of the full weighted sum
      ad::Var objective =
          ad::scale(label.value, static_cast<double>(n) / static_cast<double>(idx.size()));

      if (use_metric) {
        MetricBatch mb = build_metric_batch(f_norm, *data.weights, mcfg, cfg.metric_batch, rng);
        Tensor xm = detail::take_rows(*data.labeled_features, mb.members);
        MetricGraph penalty = metric_penalty(tape, vars, xm, params.codec, mb,
                                             detail::take(f_norm, mb.members), mcfg, rng);
        objective = ad::sub(objective, ad::scale(penalty.value, mcfg.beta_metric));
      }

      if (spec.include_unlabeled) {
        if (unlabeled_cursor >= unlabeled_batches.size()) {
          unlabeled_batches =
              detail::make_batches(data.unlabeled_features->rows(), cfg.unlabeled_batch, rng);
          unlabeled_cursor = 0;
        }
        Tensor xu =
            detail::take_rows(*data.unlabeled_features, unlabeled_batches[unlabeled_cursor++]);
        ElboGraph un = unlabeled_elbo(tape, vars, xu, params.codec, beta, rng);
        objective = ad::add(objective, un.value);
      }

      ad::Var loss = ad::neg(objective);
      const double lv = loss.value().scalar_value();
      if (!std::isfinite(lv)) throw TrainDivergence(epoch);
      tape.backward(loss);
      std::vector<Tensor> grads;
      grads.reserve(vars.leaves.size());
      for (ad::Var leaf : vars.leaves) grads.push_back(tape.grad(leaf));
      opt.step(tensors, grads);
      return lv;
    };

    for (const auto& idx : batches) {
      try {
        loss_sum += batch_step(idx);
      } catch (const TrainDivergence&) {
        throw;
      } catch (const std::runtime_error& e) {
        throw TrainDivergence(epoch, e.what());
      }
    }
    trace.epoch_loss.push_back(loss_sum / static_cast<double>(batches.size()));
  }
  return trace;
}

}  // namespace latentbo::vae
