#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "latentbo/gp/acquisition.hpp"
#include "latentbo/gp/gp.hpp"
#include "latentbo/io/csv.hpp"
#include "latentbo/tasks/tasks.hpp"
#include "latentbo/vae/train.hpp"

namespace latentbo::bo {

using math::Tensor;

// Baseline = which ELBO components retraining uses; the S-prefixed 1%-label
// variants are the same combinations under label_fraction = 0.01.
enum class Baseline { lbo, tp_lbo, s_lbo, c_lbo, lr_lbo, t_lbo };

inline const char* baseline_name(Baseline b) {
  switch (b) {
    case Baseline::lbo: return "LBO";
    case Baseline::tp_lbo: return "TP-LBO";
    case Baseline::s_lbo: return "S-LBO";
    case Baseline::c_lbo: return "C-LBO";
    case Baseline::lr_lbo: return "LR-LBO";
    case Baseline::t_lbo: return "T-LBO";
  }
  return "?";
}

inline std::optional<metric::LossKind> metric_kind_of(Baseline b) {
  switch (b) {
    case Baseline::s_lbo: return metric::LossKind::simple;
    case Baseline::c_lbo: return metric::LossKind::soft_contrastive;
    case Baseline::lr_lbo: return metric::LossKind::log_ratio;
    case Baseline::t_lbo: return metric::LossKind::soft_triplet;
    default: return std::nullopt;
  }
}

inline vae::ObjectiveSpec objective_spec(Baseline b, bool include_unlabeled) {
  vae::ObjectiveSpec spec;
  spec.target_prediction = b == Baseline::tp_lbo;
  spec.metric_kind = metric_kind_of(b);
  spec.include_unlabeled = include_unlabeled;
  return spec;
}

struct BoConfig {
  int budget = 200;             // B, total black-box evaluations
  int retrain_every = 50;       // q, acquisitions per retraining
  double stop_threshold = 1e-4; // tau, on standardized EI
  double rank_k = 1e-3;
  metric::WeightScheme weight_scheme = metric::WeightScheme::rank;
  double label_fraction = 1.0;  // 1.0 or 0.01
  Baseline baseline = Baseline::t_lbo;
  int n_best = 256;             // GP training-subset composition
  int n_rand = 64;
  int regret_mc_samples = 32;   // decoder draws per acquired point for the regret term
  bool b23_schedule = false;    // q = ceil(B^{2/3}) for the regret experiment

  int effective_q() const {
    if (b23_schedule) return static_cast<int>(std::ceil(std::pow(static_cast<double>(budget), 2.0 / 3.0)));
    return retrain_every;
  }

  void validate() const {
    if (budget < 1) throw std::invalid_argument("BoConfig: budget must be >= 1");
    const int q = effective_q();
    if (q < 1 || q > budget) throw std::invalid_argument("BoConfig: need budget >= q >= 1");
    if (stop_threshold <= 0.0) throw std::invalid_argument("BoConfig: stop_threshold must be > 0");
    if (rank_k <= 0.0) throw std::invalid_argument("BoConfig: rank_k must be > 0");
    if (label_fraction <= 0.0 || label_fraction > 1.0)
      throw std::invalid_argument("BoConfig: label_fraction must be in (0, 1]");
    if (regret_mc_samples < 1) throw std::invalid_argument("BoConfig: regret_mc_samples must be >= 1");
  }
};

struct TraceRecord {
  int step = 0;   // global evaluation index, 1-based
  int epoch = 0;  // outer retraining round, 1-based
  int inner = 0;  // acquisition index within the epoch, 1-based
  double acquired_f = 0.0;
  double incumbent_f = 0.0;
  double ei_value = 0.0;
  double regret_term = 0.0;
  double cum_regret = 0.0;
  std::vector<double> z_hat;  // acquired latent point (not serialized to CSV)
};

inline const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> cols = {"step",        "epoch",    "inner",
                                                "acquired_f",  "incumbent_f", "ei_value",
                                                "regret_term", "cum_regret"};
  return cols;
}

inline void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace,
                            const nlohmann::json& resolved_config) {
  io::CsvWriter w;
  w.comment("config: " + resolved_config.dump());
  w.header(trace_columns());
  for (const auto& r : trace)
    w.row({static_cast<double>(r.step), static_cast<double>(r.epoch), static_cast<double>(r.inner),
           r.acquired_f, r.incumbent_f, r.ei_value, r.regret_term, r.cum_regret});
  w.save(path);
}

// Latent dataset: one row per labeled point at the encoder posterior mean
// (no sampling); empty input yields the empty dataset.
inline std::optional<Tensor> build_latent_dataset(const vae::VaeParams& params,
                                                  const std::vector<tasks::Input>& inputs) {
  if (inputs.empty()) return std::nullopt;
  Tensor features = params.codec.to_features(std::span<const tasks::Input>(inputs));
  return vae::encode(params, features).mean;
}

struct RunConfig {
  BoConfig bo;
  metric::MetricConfig metric;
  vae::TrainConfig retrain;  // epochs here = epochs per retraining round
  gp::FitOptions gp_fit;
  gp::AcqOptions acq;
  bool include_unlabeled = false;
  std::uint64_t seed = 0;
};

struct RunResult {
  std::vector<TraceRecord> trace;
  tasks::Dataset labeled;   // final D_L (initial subset plus acquisitions)
  vae::VaeParams params;    // final VAE parameters
  int evaluations = 0;      // actual black-box calls consumed
  double incumbent_f = 0.0;
  tasks::Input incumbent_x;
  int initial_labels = 0;
};

// Called with (0, pretrained params) before the first retraining, then
// (l, params) after each retraining l = 1..L.
using EpochHook = std::function<void(int, const vae::VaeParams&)>;

inline double expected_objective(const tasks::Task& task, const vae::VaeParams& params,
                                 const std::vector<double>& z, int n_samples, math::Rng& rng) {
  Tensor zt = Tensor::from(z);
  double acc = 0.0;
  for (int s = 0; s < n_samples; ++s) acc += task.objective(vae::sample_decode(params, zt, rng));
  return acc / n_samples;
}

// Algorithm: outer loop retrains the VAE on the weighted labeled set with the
// baseline's ELBO, rebuilds the latent dataset and fits the GP from scratch;
// the inner loop runs up to q EI acquisitions (append + re-factorize only),
// enforcing novelty by perturb-and-retry, and stops early when EI drops below
// the threshold. Every actual objective call counts against the budget.
inline RunResult run(const tasks::Task& task, const tasks::Dataset& labeled_full,
                     const Tensor* unlabeled_features, const vae::VaeParams& pretrained,
                     const RunConfig& cfg, const EpochHook& hook = {}) {
  cfg.bo.validate();
  cfg.retrain.validate();
  math::Rng rng(cfg.seed);
  math::Rng regret_rng = rng.split(0x9e37);

  RunResult result;
  result.params = pretrained;

  // initial labels: everything, or the ceil(fraction * N) random subset
  if (cfg.bo.label_fraction < 1.0) {
    const int n_full = labeled_full.size();
    const int keep = static_cast<int>(std::ceil(cfg.bo.label_fraction * n_full));
    math::Rng pick = rng.split(0x5eed);
    auto idx = pick.sample_without_replacement(n_full, keep);
    for (int i : idx) {
      result.labeled.inputs.push_back(labeled_full.inputs[static_cast<std::size_t>(i)]);
      result.labeled.labels.push_back(labeled_full.labels[static_cast<std::size_t>(i)]);
    }
  } else {
    result.labeled = labeled_full;
  }
  result.initial_labels = result.labeled.size();
  if (result.initial_labels < 4) throw std::invalid_argument("bo::run: need at least 4 initial labels");

  std::set<tasks::Input> seen(result.labeled.inputs.begin(), result.labeled.inputs.end());
  result.incumbent_f = result.labeled.labels[0];
  result.incumbent_x = result.labeled.inputs[0];
  for (int i = 1; i < result.labeled.size(); ++i)
    if (result.labeled.labels[static_cast<std::size_t>(i)] > result.incumbent_f) {
      result.incumbent_f = result.labeled.labels[static_cast<std::size_t>(i)];
      result.incumbent_x = result.labeled.inputs[static_cast<std::size_t>(i)];
    }

  vae::ObjectiveSpec spec = objective_spec(cfg.bo.baseline, cfg.include_unlabeled);
  if (spec.include_unlabeled && unlabeled_features == nullptr)
    throw std::invalid_argument("bo::run: unlabeled features required for this configuration");

  if (hook) hook(0, result.params);

  const int q = cfg.bo.effective_q();
  const int epochs_total = static_cast<int>(std::ceil(static_cast<double>(cfg.bo.budget) / q));
  double cum_regret = 0.0;
  int consecutive_duplicates = 0;

  for (int epoch = 1; epoch <= epochs_total && result.evaluations < cfg.bo.budget; ++epoch) {
    // retrain with recomputed weights
    auto weights = metric::datum_weights(result.labeled.labels, cfg.bo.rank_k, cfg.bo.weight_scheme);
    vae::FinetuneData data;
    Tensor features = result.params.codec.to_features(
        std::span<const tasks::Input>(result.labeled.inputs));
    data.labeled_features = &features;
    data.f_raw = &result.labeled.labels;
    data.weights = &weights;
    data.unlabeled_features = unlabeled_features;
    vae::finetune(result.params, data, spec, cfg.metric, cfg.retrain, rng);
    if (hook) hook(epoch, result.params);

    // rebuild the latent dataset and fit the GP from scratch on the subset
    Tensor latents = *build_latent_dataset(result.params, result.labeled.inputs);
    const int n = result.labeled.size();
    const int n_best = std::min(cfg.bo.n_best, n);
    const int n_rand = std::min(cfg.bo.n_rand, n - n_best);
    auto subset = gp::select_training_subset(result.labeled.labels, n_best, n_rand, rng);
    Tensor z_train = Tensor::matrix(static_cast<int>(subset.size()), result.params.latent_dim);
    std::vector<double> y_train;
    y_train.reserve(subset.size());
    for (std::size_t i = 0; i < subset.size(); ++i) {
      for (int dcol = 0; dcol < result.params.latent_dim; ++dcol)
        z_train.at(static_cast<int>(i), dcol) = latents.at(subset[i], dcol);
      y_train.push_back(result.labeled.labels[static_cast<std::size_t>(subset[i])]);
    }
    gp::GpModel model = gp::fit(z_train, y_train, cfg.gp_fit, rng);

    for (int inner = 1; inner <= q && result.evaluations < cfg.bo.budget; ++inner) {
      const double xi = *std::max_element(model.y_std.begin(), model.y_std.end());
      auto bounds = gp::acquisition_bounds(model);
      gp::AcqResult acq = gp::optimize_acquisition(model, bounds, xi, rng, cfg.acq);
      if (acq.ei < cfg.bo.stop_threshold) break;  // EI(z) < tau ends the inner loop

      // decode with novelty enforcement: perturb up to 10 times, then restart
      // the acquisition from a fresh multi-start
      double mean_ell = 0.0;
      for (int dcol = 0; dcol < model.dim(); ++dcol) mean_ell += model.hyp.lengthscale(dcol);
      mean_ell /= model.dim();

      std::vector<double> z_try = acq.z;
      tasks::Input candidate;
      bool accepted = false;
      while (!accepted) {
        for (int attempt = 0; attempt <= 10; ++attempt) {
          candidate = vae::sample_decode(result.params, Tensor::from(z_try), rng);
          if (!seen.count(candidate)) {
            accepted = true;
            break;
          }
          if (++consecutive_duplicates >= 100)
            throw std::runtime_error("bo::run: 100 consecutive duplicate acquisitions at step " +
                                     std::to_string(result.evaluations + 1));
          z_try = acq.z;
          for (double& v : z_try) v += 0.1 * mean_ell * rng.normal();
        }
        if (!accepted) {
          acq = gp::optimize_acquisition(model, bounds, xi, rng, cfg.acq);
          z_try = acq.z;
        }
      }
      consecutive_duplicates = 0;

      const double f_val = task.objective(candidate);  // the one budgeted call
      ++result.evaluations;
      seen.insert(candidate);
      result.labeled.inputs.push_back(candidate);
      result.labeled.labels.push_back(f_val);
      gp::append_point(model, z_try, f_val);
      if (f_val > result.incumbent_f) {
        result.incumbent_f = f_val;
        result.incumbent_x = candidate;
      }

      TraceRecord rec;
      rec.step = result.evaluations;
      rec.epoch = epoch;
      rec.inner = inner;
      rec.acquired_f = f_val;
      rec.incumbent_f = result.incumbent_f;
      rec.ei_value = acq.ei;
      rec.regret_term = task.f_star - expected_objective(task, result.params, z_try,
                                                         cfg.bo.regret_mc_samples, regret_rng);
      cum_regret += rec.regret_term;
      rec.cum_regret = cum_regret;
      rec.z_hat = z_try;
      result.trace.push_back(std::move(rec));
    }
  }
  return result;
}

}  // namespace latentbo::bo
