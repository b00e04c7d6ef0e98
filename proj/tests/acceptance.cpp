// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failures. Run a subset by listing criterion numbers as arguments.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "latentbo/analysis/analysis.hpp"
#include "latentbo/bo/loop.hpp"
#include "latentbo/bo/regret.hpp"
#include "latentbo/vae/checkpoint.hpp"
#include "latentbo/vae/train.hpp"

using namespace latentbo;
using math::Tensor;

namespace {

struct Failure {
  std::string detail;
};

struct Check {
  bool ok = true;
  std::ostringstream log;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      log << "  FAILED: " << what << "\n";
    }
  }
  void note(const std::string& what) { log << "  " << what << "\n"; }
};

// ---- shared experimental setup (shape task, desk scale) ----

struct Setup {
  tasks::Task task = tasks::make_task(tasks::TaskKind::shape, 1);
  int n_unlabeled = 2048;

  vae::TrainConfig pretrain_cfg() const {
    vae::TrainConfig c;
    c.epochs = 20;
    c.lr = 1e-3;
    c.batch_size = 256;
    c.beta_kl_init = 1e-6;
    c.beta_kl_final = 0.1;
    return c;
  }

  vae::TrainConfig finetune_cfg(int epochs) const {
    vae::TrainConfig c = pretrain_cfg();
    c.epochs = epochs;
    c.metric_batch = 32;
    c.beta_r = 10.0;
    return c;
  }

  // desk-scale smoothing: a wide positive band and a strong multiplier are
  // what let the metric term restructure a 2-D latent space in tens of epochs
  metric::MetricConfig metric_cfg() const {
    metric::MetricConfig m;
    m.eta = 0.4;
    m.rho = 0.0;
    m.nu = 0.1;
    m.beta_metric = 64.0;
    m.kind = metric::LossKind::soft_triplet;
    return m;
  }

  bo::RunConfig run_cfg(bo::Baseline baseline, std::uint64_t seed) const {
    bo::RunConfig rc;
    rc.bo.budget = 200;
    rc.bo.retrain_every = 50;
    rc.bo.stop_threshold = 1e-12;
    rc.bo.rank_k = 1e-3;
    rc.bo.n_best = 160;
    rc.bo.n_rand = 32;
    rc.bo.regret_mc_samples = 32;
    rc.bo.baseline = baseline;
    rc.metric = metric_cfg();
    rc.retrain = finetune_cfg(1);
    rc.gp_fit.restarts = 3;
    rc.gp_fit.max_iters = 200;
    rc.acq.starts = 32;
    rc.acq.max_iters = 100;
    rc.seed = seed;
    return rc;
  }

  tasks::Dataset labeled(int n, std::uint64_t dataset_seed = 1) const {
    math::Rng rng = math::Rng(dataset_seed).split(1);
    return tasks::generate_dataset(task, n, rng);
  }

  Tensor unlabeled_features(std::uint64_t dataset_seed = 1) const {
    math::Rng rng = math::Rng(dataset_seed).split(2);
    auto data = tasks::generate_dataset(task, n_unlabeled, rng);
    return task.codec().to_features(std::span<const tasks::Input>(data.inputs));
  }
};

const Setup& setup() {
  static Setup s;
  return s;
}

// pretrained VAEs are shared across criteria (same unlabeled set and seeds)
std::mutex pretrain_mutex;
vae::VaeParams shared_pretrained(std::uint64_t seed, bool target_head) {
  static std::map<std::pair<std::uint64_t, bool>, vae::VaeParams> cache;
  static Tensor unlab = setup().unlabeled_features();
  {
    std::lock_guard<std::mutex> lock(pretrain_mutex);
    auto it = cache.find({seed, target_head});
    if (it != cache.end()) return it->second;
  }
  math::Rng init_rng = math::Rng(seed).split(101);
  vae::VaeParams params = vae::make_vae(setup().task.codec(), 2, {128, 64}, target_head, init_rng);
  math::Rng train_rng = math::Rng(seed).split(102);
  vae::pretrain(params, unlab, setup().pretrain_cfg(), train_rng);
  std::lock_guard<std::mutex> lock(pretrain_mutex);
  return cache.emplace(std::make_pair(seed, target_head), std::move(params)).first->second;
}

void parallel_seeds(int n_seeds, const std::function<void(int)>& work) {
  std::atomic<int> next{0};
  auto runner = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n_seeds) return;
      work(i);
    }
  };
  std::thread a(runner), b(runner);
  a.join();
  b.join();
}

void assert_logvar_clamp_slack(Check& c, const vae::VaeParams& params, const Tensor& features,
                               const std::string& who) {
  auto g = vae::encode(params, features);
  double worst = 0.0;
  for (int i = 0; i < g.logvar.size(); ++i) worst = std::max(worst, std::abs(g.logvar[i]));
  c.require(worst < vae::kLogVarClamp - 1e-6, who + ": log-variance clamp is binding");
}

// T-LBO-style metric finetuning used by criteria 4 and 5
// The modelling experiments flatten the rank weights (k = 1) so low-scoring
// anchors keep enough weight for both halves of the split to organize; the
// optimization runs keep the focused k = 1e-3 weighting.
vae::VaeParams metric_finetuned(std::uint64_t seed, const tasks::Dataset& data, int epochs,
                                metric::LossKind kind) {
  vae::VaeParams params = shared_pretrained(seed, false);
  auto weights = metric::rank_weights(data.labels, 1.0);
  Tensor features = params.codec.to_features(std::span<const tasks::Input>(data.inputs));
  vae::FinetuneData fd;
  fd.labeled_features = &features;
  fd.f_raw = &data.labels;
  fd.weights = &weights;
  vae::ObjectiveSpec spec;
  spec.metric_kind = kind;
  metric::MetricConfig mcfg = setup().metric_cfg();
  mcfg.kind = kind;
  math::Rng rng = math::Rng(seed).split(103);
  vae::finetune(params, fd, spec, mcfg, setup().finetune_cfg(epochs), rng);
  return params;
}

// ---- independent loss oracles (same definitions, separate code path) ----
namespace oracle {

double norm2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double soft_triplet(const std::vector<double>& zi, const std::vector<double>& zj,
                    const std::vector<double>& zk, double fi, double fj, double fk, double eta,
                    double nu) {
  if (!(std::abs(fi - fj) < eta && std::abs(fi - fk) >= eta)) return 0.0;
  const double wp = std::tanh((eta - std::abs(fi - fj)) / (2 * nu)) / std::tanh(eta / (2 * nu));
  const double wn =
      std::tanh((std::abs(fi - fk) - eta) / (2 * nu)) / std::tanh((1 - eta) / (2 * nu));
  return std::log(1 + std::exp(norm2(zi, zj) - norm2(zi, zk))) * wp * wn;
}

double soft_contrastive(const std::vector<double>& zi, const std::vector<double>& zj, double fi,
                        double fj, double eta) {
  const double dz = norm2(zi, zj);
  const double df = std::abs(fi - fj);
  if (df < eta) return std::max(0.0, (1 / eta) * std::max(eta, dz) * (std::min(eta, dz) - df));
  return std::max(0.0, (2 - (1 / eta) * std::min(eta, dz)) * (df - std::max(eta, dz)));
}

double log_ratio(const std::vector<double>& zi, const std::vector<double>& zj,
                 const std::vector<double>& zk, double fi, double fj, double fk) {
  const double e = 1e-9;
  const double r = std::log((norm2(zi, zj) + e) / (norm2(zi, zk) + e)) -
                   std::log((std::abs(fi - fj) + e) / (std::abs(fi - fk) + e));
  return r * r;
}

double simple(const std::vector<double>& zi, const std::vector<double>& zj, double fi, double fj) {
  return std::abs(norm2(zi, zj) - std::abs(fi - fj));
}

}  // namespace oracle

// ---- criteria ----

Check criterion_1_loss_oracles() {
  Check c;
  metric::MetricConfig cfg;
  cfg.eta = 0.25;
  cfg.nu = 0.08;
  math::Rng rng(1001);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int d = 1 + rng.uniform_int(4);
    auto rv = [&](int n) {
      std::vector<double> v(static_cast<std::size_t>(n));
      for (auto& x : v) x = rng.normal();
      return v;
    };
    auto zi = rv(d), zj = rv(d), zk = rv(d);
    const double fi = rng.uniform(), fj = rng.uniform(), fk = rng.uniform();
    auto T = [](const std::vector<double>& v) { return Tensor::from(v); };

    worst = std::max(worst, std::abs(metric::soft_triplet_loss(T(zi), T(zj), T(zk), fi, fj, fk, cfg) -
                                     oracle::soft_triplet(zi, zj, zk, fi, fj, fk, cfg.eta, cfg.nu)));
    worst = std::max(worst, std::abs(metric::soft_contrastive_loss(T(zi), T(zj), fi, fj, cfg) -
                                     oracle::soft_contrastive(zi, zj, fi, fj, cfg.eta)));
    worst = std::max(worst, std::abs(metric::log_ratio_loss(T(zi), T(zj), T(zk), fi, fj, fk, cfg) -
                                     oracle::log_ratio(zi, zj, zk, fi, fj, fk)));
    worst = std::max(worst, std::abs(metric::simple_loss(T(zi), T(zj), fi, fj, cfg) -
                                     oracle::simple(zi, zj, fi, fj)));
  }
  c.note("worst |loss - oracle| over 1e4 inputs x 4 losses: " + io::format_double(worst));
  c.require(worst < 1e-10, "loss oracle agreement < 1e-10");

  double worst_gap = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> zi = {rng.normal(), rng.normal()}, zj = {rng.normal(), rng.normal()};
    const double eps = 1e-6;
    const double below =
        metric::soft_contrastive_loss(Tensor::from(zi), Tensor::from(zj), 0.0, cfg.eta - eps, cfg);
    const double above =
        metric::soft_contrastive_loss(Tensor::from(zi), Tensor::from(zj), 0.0, cfg.eta + eps, cfg);
    worst_gap = std::max(worst_gap, std::abs(below - above));
  }
  c.note("worst soft-contrastive gap across df = eta: " + io::format_double(worst_gap));
  c.require(worst_gap < 1e-4, "soft-contrastive continuity gap < 1e-4");
  return c;
}

Check criterion_2_gradients() {
  Check c;
  math::Rng rng(2002);
  metric::MetricConfig cfg;
  cfg.eta = 0.35;
  cfg.nu = 0.12;

  // standalone losses vs central differences, rel err < 1e-4
  double worst_loss = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    auto rv = [&] {
      std::vector<double> v(3);
      for (auto& x : v) x = rng.normal();
      return v;
    };
    auto zi = rv(), zj = rv(), zk = rv();
    const double fi = rng.uniform(), fj = fi + rng.uniform(-0.3, 0.3),
                 fk = fi + (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.4, 0.6);
    for (int kind_i = 0; kind_i < 4; ++kind_i) {
      const auto kind = static_cast<metric::LossKind>(kind_i);
      auto eval = [&](const std::vector<double>& z) {
        auto T = Tensor::from(z);
        switch (kind) {
          case metric::LossKind::simple: return metric::simple_loss(T, Tensor::from(zj), fi, fj, cfg);
          case metric::LossKind::soft_contrastive:
            return metric::soft_contrastive_loss(T, Tensor::from(zj), fi, fj, cfg);
          case metric::LossKind::log_ratio:
            return metric::log_ratio_loss(T, Tensor::from(zj), Tensor::from(zk), fi, fj, fk, cfg);
          case metric::LossKind::soft_triplet:
            return metric::soft_triplet_loss(T, Tensor::from(zj), Tensor::from(zk), fi, fj, fk, cfg);
        }
        return 0.0;
      };
      ad::Tape tape;
      ad::Var vi = tape.input(Tensor::from(zi), true);
      ad::Var vj = tape.input(Tensor::from(zj), false);
      ad::Var vk = tape.input(Tensor::from(zk), false);
      ad::Var loss = [&] {
        switch (kind) {
          case metric::LossKind::simple: return metric::simple_loss(vi, vj, fi, fj, cfg);
          case metric::LossKind::soft_contrastive:
            return metric::soft_contrastive_loss(vi, vj, fi, fj, cfg);
          case metric::LossKind::log_ratio: return metric::log_ratio_loss(vi, vj, vk, fi, fj, fk, cfg);
          case metric::LossKind::soft_triplet:
            return metric::soft_triplet_loss(vi, vj, vk, fi, fj, fk, cfg);
        }
        return tape.constant(0.0);
      }();
      tape.backward(loss);
      Tensor g = tape.grad(vi);
      for (int i = 0; i < 3; ++i) {
        auto zp = zi, zm = zi;
        zp[static_cast<std::size_t>(i)] += 1e-6;
        zm[static_cast<std::size_t>(i)] -= 1e-6;
        const double fd = (eval(zp) - eval(zm)) / 2e-6;
        const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-6});
        worst_loss = std::max(worst_loss, std::abs(g[i] - fd) / denom);
      }
    }
  }
  c.note("worst standalone-loss gradient rel err: " + io::format_double(worst_loss));
  c.require(worst_loss < 1e-4, "standalone loss gradients < 1e-4");

  // full finetuning objective on a 2-4-2 toy VAE, rel err < 1e-3
  vae::VaeParams p = [&] {
    vae::InputCodec codec;
    codec.grid_pixels = 2;
    math::Rng r(7);
    return vae::make_vae(codec, 2, {4}, true, r);
  }();
  const int n = 6;
  Tensor x = Tensor::matrix(n, 2);
  for (int i = 0; i < x.size(); ++i) x[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
  std::vector<double> f(n);
  for (auto& v : f) v = rng.uniform();
  auto f_norm = metric::minmax_normalize(f);
  auto weights = metric::rank_weights(f, 1e-3);
  std::vector<double> f_std(n);
  for (int i = 0; i < n; ++i) f_std[static_cast<std::size_t>(i)] = f[static_cast<std::size_t>(i)] - 0.5;

  auto build = [&](ad::Tape& tape, vae::VaeVars& vars) {
    math::Rng noise(123);
    auto lab = vae::labeled_elbo_tp(tape, vars, x, p.codec, weights, f_std, 0.05, 1.0, noise);
    math::Rng batch_rng(31);
    metric::MetricConfig mc = cfg;
    mc.kind = metric::LossKind::soft_triplet;
    auto mb = vae::build_metric_batch(f_norm, weights, mc, 4, batch_rng);
    Tensor xm = vae::detail::take_rows(x, mb.members);
    std::vector<double> fm;
    for (int m : mb.members) fm.push_back(f_norm[static_cast<std::size_t>(m)]);
    auto pen = vae::metric_penalty(tape, vars, xm, p.codec, mb, fm, mc, noise);
    return ad::sub(lab.value, ad::scale(pen.value, 2.0));
  };

  ad::Tape tape;
  auto vars = vae::lift(tape, p);
  ad::Var obj = build(tape, vars);
  tape.backward(obj);
  auto tensors = vae::param_tensors(p);
  std::vector<Tensor> grads;
  for (ad::Var leaf : vars.leaves) grads.push_back(tape.grad(leaf));
  auto eval = [&] {
    ad::Tape t;
    auto v = vae::lift(t, p);
    return build(t, v).value().scalar_value();
  };
  double worst_elbo = 0.0;
  for (std::size_t ti = 0; ti < tensors.size(); ++ti)
    for (int i = 0; i < tensors[ti]->size(); ++i) {
      const double saved = (*tensors[ti])[i];
      (*tensors[ti])[i] = saved + 1e-5;
      const double fp = eval();
      (*tensors[ti])[i] = saved - 1e-5;
      const double fm = eval();
      (*tensors[ti])[i] = saved;
      const double fd = (fp - fm) / 2e-5;
      const double denom = std::max({std::abs(fd), std::abs(grads[ti][i]), 1e-5});
      worst_elbo = std::max(worst_elbo, std::abs(grads[ti][i] - fd) / denom);
    }
  c.note("worst full-objective gradient rel err on the 2-4-2 net: " + io::format_double(worst_elbo));
  c.require(worst_elbo < 1e-3, "full objective gradient < 1e-3");
  return c;
}

Check criterion_3_gp_suite() {
  Check c;
  math::Rng rng(3003);

  // dense oracle: LU-based marginal likelihood and posterior
  auto dense_kernel = [](const Tensor& z, const gp::GpHyperparams& h) {
    const int n = z.rows(), d = z.cols();
    std::vector<std::vector<double>> k(static_cast<std::size_t>(n),
                                       std::vector<double>(static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double q = 0.0;
        for (int dd = 0; dd < d; ++dd) {
          const double diff =
              (z.at(i, dd) - z.at(j, dd)) / std::exp(h.log_lengthscale[static_cast<std::size_t>(dd)]);
          q += diff * diff;
        }
        k[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
            std::exp(h.log_signal_var) * std::exp(-0.5 * q) +
            (i == j ? std::exp(h.log_noise_var) : 0.0);
      }
    return k;
  };
  struct Lu {
    std::vector<std::vector<double>> a;
    std::vector<int> piv;
  };
  auto lu_factor = [](std::vector<std::vector<double>> a) {
    const int n = static_cast<int>(a.size());
    Lu f{std::move(a), std::vector<int>(static_cast<std::size_t>(n))};
    for (int i = 0; i < n; ++i) f.piv[static_cast<std::size_t>(i)] = i;
    for (int col = 0; col < n; ++col) {
      int best = col;
      for (int r = col + 1; r < n; ++r)
        if (std::abs(f.a[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)]) >
            std::abs(f.a[static_cast<std::size_t>(best)][static_cast<std::size_t>(col)]))
          best = r;
      std::swap(f.a[static_cast<std::size_t>(col)], f.a[static_cast<std::size_t>(best)]);
      std::swap(f.piv[static_cast<std::size_t>(col)], f.piv[static_cast<std::size_t>(best)]);
      for (int r = col + 1; r < n; ++r) {
        auto& fr = f.a[static_cast<std::size_t>(r)];
        const auto& fc = f.a[static_cast<std::size_t>(col)];
        fr[static_cast<std::size_t>(col)] /= fc[static_cast<std::size_t>(col)];
        for (int k = col + 1; k < n; ++k)
          fr[static_cast<std::size_t>(k)] -= fr[static_cast<std::size_t>(col)] * fc[static_cast<std::size_t>(k)];
      }
    }
    return f;
  };
  auto lu_solve = [](const Lu& f, std::vector<double> b) {
    const int n = static_cast<int>(b.size());
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(f.piv[static_cast<std::size_t>(i)])];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j)
        x[static_cast<std::size_t>(i)] -= f.a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
    for (int i = n - 1; i >= 0; --i) {
      for (int j = i + 1; j < n; ++j)
        x[static_cast<std::size_t>(i)] -= f.a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
      x[static_cast<std::size_t>(i)] /= f.a[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
    }
    return x;
  };

  double worst_lml = 0.0, worst_grad = 0.0, worst_pred = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 10, d = 2;
    Tensor z = Tensor::matrix(n, d);
    for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
    std::vector<double> y(n);
    for (auto& v : y) v = rng.normal();
    gp::GpHyperparams h;
    h.log_lengthscale = {rng.uniform(-1.0, 0.5), rng.uniform(-1.0, 0.5)};
    h.log_signal_var = rng.uniform(-0.7, 0.7);
    h.log_noise_var = rng.uniform(-5.0, -2.0);
    h.mean_const = rng.uniform(-0.5, 0.5);

    auto oracle_lml = [&](const gp::GpHyperparams& hh) {
      auto k = dense_kernel(z, hh);
      auto f = lu_factor(k);
      std::vector<double> r(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) r[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)] - hh.mean_const;
      auto a = lu_solve(f, r);
      double fit = 0.0, logdet = 0.0;
      for (int i = 0; i < n; ++i) {
        fit += r[static_cast<std::size_t>(i)] * a[static_cast<std::size_t>(i)];
        logdet += std::log(std::abs(f.a[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)]));
      }
      return -0.5 * fit - logdet * 0.5 - 0.5 * n * std::log(2.0 * M_PI);
    };

    auto mine = gp::detail::log_marginal_likelihood(z, y, h, true);
    const double ref = oracle_lml(h);
    worst_lml = std::max(worst_lml, std::abs(mine.value - ref) / std::max(1.0, std::abs(ref)));

    auto theta = gp::detail::pack(h);
    for (std::size_t t = 0; t < theta.size(); ++t) {
      gp::GpHyperparams hp = h, hm = h;
      auto bump = [&](gp::GpHyperparams& hh, double delta) {
        if (t < 2)
          hh.log_lengthscale[t] += delta;
        else if (t == 2)
          hh.log_signal_var += delta;
        else if (t == 3)
          hh.log_noise_var += delta;
        else
          hh.mean_const += delta;
      };
      bump(hp, 1e-6);
      bump(hm, -1e-6);
      const double fd = (oracle_lml(hp) - oracle_lml(hm)) / 2e-6;
      const double denom = std::max({std::abs(fd), std::abs(mine.grad[t]), 1e-8});
      worst_grad = std::max(worst_grad, std::abs(mine.grad[t] - fd) / denom);
    }

    // posterior mean/variance against the dense solve
    gp::GpModel m;
    m.Z = z;
    m.y_std = y;
    m.standardizer = gp::Standardizer{0.0, 1.0};
    m.hyp = h;
    auto state = gp::detail::log_marginal_likelihood(z, y, h, false);
    m.factor = state.factor;
    m.alpha = state.alpha;
    auto k = dense_kernel(z, h);
    auto f = lu_factor(k);
    for (int probe = 0; probe < 10; ++probe) {
      std::vector<double> q = {rng.normal(), rng.normal()};
      auto mine_p = gp::predict(m, q.data());
      std::vector<double> ks(static_cast<std::size_t>(n)), r(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        double qq = 0.0;
        for (int dd = 0; dd < d; ++dd) {
          const double diff = (z.at(i, dd) - q[static_cast<std::size_t>(dd)]) /
                              std::exp(h.log_lengthscale[static_cast<std::size_t>(dd)]);
          qq += diff * diff;
        }
        ks[static_cast<std::size_t>(i)] = std::exp(h.log_signal_var) * std::exp(-0.5 * qq);
        r[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)] - h.mean_const;
      }
      auto a = lu_solve(f, r);
      auto w = lu_solve(f, ks);
      double mu = h.mean_const, var = std::exp(h.log_signal_var);
      for (int i = 0; i < n; ++i) {
        mu += ks[static_cast<std::size_t>(i)] * a[static_cast<std::size_t>(i)];
        var -= ks[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
      }
      worst_pred = std::max(worst_pred, std::abs(mine_p.mean - mu));
      worst_pred = std::max(worst_pred, std::abs(mine_p.sd * mine_p.sd - std::max(var, 1e-12)));
    }
  }
  c.note("worst LML rel err " + io::format_double(worst_lml) + ", grad rel err " +
         io::format_double(worst_grad) + ", posterior abs err " + io::format_double(worst_pred));
  c.require(worst_lml < 1e-6, "LML value rel err < 1e-6");
  c.require(worst_grad < 1e-4, "LML gradient rel err < 1e-4");
  c.require(worst_pred < 1e-8, "posterior mean/var err < 1e-8");

  // EI vs 1e6-draw Monte-Carlo over 100 random settings
  double worst_ei_sigmas = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double mu = rng.uniform(-2.0, 2.0), sigma = rng.uniform(0.05, 2.0),
                 xi = rng.uniform(-2.0, 2.0);
    const int nmc = 1000000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < nmc; ++i) {
      const double draw = std::max(mu + sigma * rng.normal() - xi, 0.0);
      s += draw;
      s2 += draw * draw;
    }
    const double mc = s / nmc;
    const double se = std::sqrt(std::max(s2 / nmc - mc * mc, 0.0) / nmc);
    const double gap = std::abs(gp::expected_improvement(mu, sigma, xi) - mc);
    // deep-tail settings see zero improving draws, collapsing the empirical
    // SE while the true EI is below the 1e6-draw resolution; floor the
    // comparison at that resolution (1e-7 on O(1)-scale draws)
    worst_ei_sigmas = std::max(worst_ei_sigmas, gap / std::max(se, 1e-7 / 3.0));
  }
  c.note("worst EI deviation: " + io::format_double(worst_ei_sigmas) + " standard errors");
  c.require(worst_ei_sigmas < 3.0, "EI within 3 SE of the 1e6-draw MC estimate");

  // 1-D acquisition maximizer vs a 1e4-point grid on a single-bump landscape
  double worst_argmax = 0.0;
  {
    const int n = 14;
    Tensor z = Tensor::matrix(n, 1);
    std::vector<double> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      z.at(i, 0) = -2.0 + 3.0 * i / (n - 1);
      y[static_cast<std::size_t>(i)] = std::tanh(1.5 * z.at(i, 0));  // one EI bump past the data
    }
    gp::FitOptions opts;
    opts.restarts = 3;
    opts.max_iters = 120;
    math::Rng fit_rng(37);
    gp::GpModel m = gp::fit(z, y, opts, fit_rng);
    auto bounds = gp::acquisition_bounds(m);
    const double xi = *std::max_element(m.y_std.begin(), m.y_std.end());
    double best = -1.0, at = 0.0;
    for (int g = 0; g < 10000; ++g) {
      std::vector<double> q = {bounds[0].first + (bounds[0].second - bounds[0].first) * g / 9999.0};
      const double e = gp::ei_at(m, q, xi);
      if (e > best) {
        best = e;
        at = q[0];
      }
    }
    for (int trial = 0; trial < 3; ++trial) {
      math::Rng acq_rng(500 + static_cast<std::uint64_t>(trial));
      auto res = gp::optimize_acquisition(m, bounds, xi, acq_rng);
      worst_argmax = std::max(worst_argmax, std::abs(res.z[0] - at));
    }
  }
  c.note("worst acquisition argmax gap vs the grid: " + io::format_double(worst_argmax));
  c.require(worst_argmax < 1e-2, "acquisition maximizer within 1e-2 of the grid argmax");
  return c;
}

Check criterion_4_separation() {
  Check c;
  const auto data = setup().labeled(512);
  int pass_structure = 0, pass_ratio = 0;
  std::ostringstream rows;
  std::mutex m;
  parallel_seeds(5, [&](int seed) {
    vae::VaeParams vanilla = shared_pretrained(static_cast<std::uint64_t>(seed), false);
    vae::VaeParams tuned = metric_finetuned(static_cast<std::uint64_t>(seed), data, 60,
                                            metric::LossKind::soft_triplet);
    auto rep_v = analysis::separation_report(vanilla, data.inputs, data.labels);
    auto rep_t = analysis::separation_report(tuned, data.inputs, data.labels);
    const bool structure = rep_t.mean_hl > std::max(rep_t.mean_hh, rep_t.mean_ll);
    const bool ratio = rep_t.inter_intra_ratio() > rep_v.inter_intra_ratio();
    std::lock_guard<std::mutex> lock(m);
    pass_structure += structure;
    pass_ratio += ratio;
    rows << "  seed " << seed << ": tuned hh/ll/hl = " << io::format_double(rep_t.mean_hh) << "/"
         << io::format_double(rep_t.mean_ll) << "/" << io::format_double(rep_t.mean_hl)
         << ", ratio " << io::format_double(rep_t.inter_intra_ratio()) << " vs vanilla "
         << io::format_double(rep_v.inter_intra_ratio()) << "\n";
  });
  c.log << rows.str();
  c.note("structure holds in " + std::to_string(pass_structure) + "/5 seeds, ratio improves in " +
         std::to_string(pass_ratio) + "/5");
  c.require(pass_structure >= 4, "mean(high-low) > max(mean intra) in >= 4/5 seeds");
  c.require(pass_ratio >= 4, "inter/intra ratio exceeds the vanilla VAE in >= 4/5 seeds");

  Tensor features = setup().task.codec().to_features(std::span<const tasks::Input>(data.inputs));
  vae::VaeParams probe = metric_finetuned(0, data, 60, metric::LossKind::soft_triplet);
  assert_logvar_clamp_slack(c, probe, features, "criterion 4");
  return c;
}

Check criterion_5_gp_generalization() {
  Check c;
  const auto data = setup().labeled(256);
  gp::FitOptions fit;
  fit.restarts = 3;
  fit.max_iters = 200;
  std::vector<double> margins(5, 0.0);
  parallel_seeds(5, [&](int seed) {
    vae::VaeParams vanilla = shared_pretrained(static_cast<std::uint64_t>(seed), false);
    vae::VaeParams tuned = metric_finetuned(static_cast<std::uint64_t>(seed), data, 60,
                                            metric::LossKind::soft_triplet);
    math::Rng rv = math::Rng(static_cast<std::uint64_t>(seed)).split(301);
    math::Rng rt = math::Rng(static_cast<std::uint64_t>(seed)).split(301);
    auto gv = analysis::gp_generalization(vanilla, data.inputs, data.labels, 5, fit, rv);
    auto gt = analysis::gp_generalization(tuned, data.inputs, data.labels, 5, fit, rt);
    margins[static_cast<std::size_t>(seed)] = gt.mean - gv.mean;
  });
  double mean_margin = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    c.note("seed " + std::to_string(i) + ": PLL margin (triplet - vanilla) = " +
           io::format_double(margins[i]));
    mean_margin += margins[i];
  }
  mean_margin /= 5.0;
  c.note("mean margin over 5 seeds x 5 splits: " + io::format_double(mean_margin));
  c.require(mean_margin > 0.0, "held-out PLL margin over vanilla > 0");
  return c;
}

struct BoOutcome {
  double mean_final = 0.0;
  std::vector<bo::RunResult> runs;
};

BoOutcome run_baseline(bo::Baseline baseline, int budget, int n_labeled, double label_fraction,
                       bool include_unlabeled, const Tensor* unlab) {
  BoOutcome out;
  out.runs.resize(5);
  const auto data = setup().labeled(n_labeled);
  parallel_seeds(5, [&](int seed) {
    bo::RunConfig rc = setup().run_cfg(baseline, static_cast<std::uint64_t>(seed));
    rc.bo.budget = budget;
    rc.bo.label_fraction = label_fraction;
    rc.include_unlabeled = include_unlabeled;
    vae::VaeParams pre =
        shared_pretrained(static_cast<std::uint64_t>(seed), baseline == bo::Baseline::tp_lbo);
    out.runs[static_cast<std::size_t>(seed)] = bo::run(setup().task, data, unlab, pre, rc);
  });
  for (const auto& r : out.runs) out.mean_final += r.incumbent_f;
  out.mean_final /= 5.0;
  return out;
}

void check_run_invariants(Check& c, const BoOutcome& out, int budget, const std::string& who) {
  for (std::size_t s = 0; s < out.runs.size(); ++s) {
    const auto& r = out.runs[s];
    c.require(r.evaluations == budget, who + " seed " + std::to_string(s) +
                                           ": evaluation count == budget (got " +
                                           std::to_string(r.evaluations) + ")");
    double inc = -1e300;
    for (const auto& rec : r.trace) {
      c.require(rec.incumbent_f >= inc, who + ": incumbent trace monotone");
      inc = rec.incumbent_f;
    }
    // acquisitions must be novel; the procedurally generated initial set may
    // itself contain coincidental repeats, which novelty is defined against
    std::set<tasks::Input> seen_inputs(r.labeled.inputs.begin(),
                                       r.labeled.inputs.begin() + r.initial_labels);
    bool novel = true;
    for (std::size_t i = static_cast<std::size_t>(r.initial_labels); i < r.labeled.inputs.size(); ++i)
      novel &= seen_inputs.insert(r.labeled.inputs[i]).second;
    c.require(novel, who + ": no duplicate acquisitions");
  }
}

Check criterion_6_bo_direction() {
  Check c;
  auto tlbo = run_baseline(bo::Baseline::t_lbo, 200, 512, 1.0, false, nullptr);
  auto lbo = run_baseline(bo::Baseline::lbo, 200, 512, 1.0, false, nullptr);
  c.note("mean final incumbent: T-LBO " + io::format_double(tlbo.mean_final) + " vs LBO " +
         io::format_double(lbo.mean_final) +
         (tlbo.mean_final > lbo.mean_final ? " (strict improvement)" : ""));
  check_run_invariants(c, tlbo, 200, "T-LBO");
  check_run_invariants(c, lbo, 200, "LBO");
  c.require(tlbo.mean_final >= lbo.mean_final, "T-LBO mean final incumbent >= LBO (non-inferiority)");
  return c;
}

Check criterion_7_semi_supervised() {
  Check c;
  static Tensor unlab = setup().unlabeled_features();
  auto full = run_baseline(bo::Baseline::t_lbo, 300, 1024, 1.0, false, &unlab);
  auto semi = run_baseline(bo::Baseline::t_lbo, 300, 1024, 0.01, true, &unlab);
  for (const auto& r : semi.runs)
    c.require(r.initial_labels == 11, "semi-supervised run touches ceil(0.01 * 1024) = 11 labels");
  c.note("mean final incumbent: 1% labels " + io::format_double(semi.mean_final) +
         " vs full labels " + io::format_double(full.mean_final) + " (ratio " +
         io::format_double(semi.mean_final / full.mean_final) + ")");
  c.require(semi.mean_final >= 0.95 * full.mean_final,
            "1%-label T-LBO reaches >= 95% of the full-label incumbent");
  return c;
}

Check criterion_8_domain_recovery() {
  Check c;
  const auto data = setup().labeled(512);
  std::vector<double> final_t(5, 0.0), final_l(5, 0.0);
  std::atomic<bool> monotone{true};
  for (bo::Baseline baseline : {bo::Baseline::t_lbo, bo::Baseline::lbo}) {
    parallel_seeds(5, [&](int seed) {
      bo::RunConfig rc = setup().run_cfg(baseline, static_cast<std::uint64_t>(seed));
      rc.bo.budget = 100;
      rc.bo.retrain_every = 10;  // 10 retraining steps
      vae::VaeParams pre = shared_pretrained(static_cast<std::uint64_t>(seed), false);
      auto trace = analysis::run_recovery_probe(setup().task, data, nullptr, pre, rc, 0.8, 100, 200);
      for (std::size_t i = 1; i < trace.p.size(); ++i)
        if (trace.p[i] < trace.p[i - 1]) monotone = false;
      (baseline == bo::Baseline::t_lbo ? final_t : final_l)[static_cast<std::size_t>(seed)] =
          trace.p.back();
    });
  }
  c.require(monotone.load(), "probe traces are non-decreasing");
  int wins = 0;
  for (int s = 0; s < 5; ++s) {
    c.note("seed " + std::to_string(s) + ": final p~ T-LBO " +
           io::format_double(final_t[static_cast<std::size_t>(s)]) + " vs LBO " +
           io::format_double(final_l[static_cast<std::size_t>(s)]));
    if (final_t[static_cast<std::size_t>(s)] >= final_l[static_cast<std::size_t>(s)]) ++wins;
  }
  c.note("T-LBO final p~ >= LBO in " + std::to_string(wins) + "/5 seeds");
  c.require(wins >= 4, "T-LBO final probe value >= LBO in >= 4/5 seeds");
  return c;
}

Check criterion_9_regret() {
  Check c;
  // scripted decoder against the hand-computed expectation
  tasks::Task task = setup().task;
  tasks::Input bad(task.x_star.size(), 0);
  bad[0] = 1;
  const double f_bad = task.objective(bad);
  const double p = 0.35;
  auto scripted = [&](const std::vector<double>&, math::Rng& r) {
    return r.uniform() < p ? task.x_star : bad;
  };
  math::Rng rng(4004);
  const int nmc = 10000;
  auto curve = bo::cumulative_regret({{0.0, 0.0}, {1.0, 1.0}}, scripted,
                                     [&](const tasks::Input& x) { return task.objective(x); },
                                     task.f_star, nmc, rng);
  const double expected = task.f_star - (p * task.f_star + (1.0 - p) * f_bad);
  const double se = std::abs(task.f_star - f_bad) * std::sqrt(p * (1.0 - p) / nmc);
  for (double t : curve.terms)
    c.require(std::abs(t - expected) < 3.0 * se, "scripted-decoder regret term within 3 SE");
  c.require(std::abs(curve.cumulative.back() - (curve.terms[0] + curve.terms[1])) < 1e-12,
            "cumulative regret is the running sum");

  // average regret under the B^{2/3} schedule is non-increasing in B
  const auto data = setup().labeled(256);
  std::vector<int> budgets = {64, 216, 512};
  std::vector<double> avg_regret;
  for (int budget : budgets) {
    std::vector<double> per_seed(3, 0.0);
    parallel_seeds(3, [&](int seed) {
      bo::RunConfig rc = setup().run_cfg(bo::Baseline::t_lbo, static_cast<std::uint64_t>(seed));
      rc.bo.budget = budget;
      rc.bo.b23_schedule = true;
      vae::VaeParams pre = shared_pretrained(static_cast<std::uint64_t>(seed), false);
      auto res = bo::run(setup().task, data, nullptr, pre, rc);
      per_seed[static_cast<std::size_t>(seed)] =
          res.trace.empty() ? 0.0 : res.trace.back().cum_regret / budget;
    });
    double mean = (per_seed[0] + per_seed[1] + per_seed[2]) / 3.0;
    avg_regret.push_back(mean);
    c.note("B = " + std::to_string(budget) + ": mean Reg/B = " + io::format_double(mean));
  }
  c.require(avg_regret[0] >= avg_regret[1] - 1e-9 && avg_regret[1] >= avg_regret[2] - 1e-9,
            "average regret non-increasing across B in {64, 216, 512}");
  return c;
}

Check criterion_10_determinism() {
  Check c;
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "latentbo_acceptance_det";
  fs::create_directories(dir);
  const fs::path cfg = dir / "cfg.json";
  std::ofstream(cfg) << R"({
    "task": {"kind": "shape", "seed": 1, "n_unlabeled": 96, "n_labeled": 48, "dataset_seed": 7},
    "baseline": "T-LBO",
    "bo": {"budget": 4, "retrain_every": 2, "stop_threshold": 1e-9, "n_best": 24, "n_rand": 8,
           "regret_mc_samples": 4},
    "vae": {"latent_dim": 2, "hidden": [24, 12]},
    "train": {"pretrain_epochs": 2, "finetune_epochs": 1, "batch_size": 48, "metric_batch": 6},
    "gp": {"restarts": 2, "max_iters": 30},
    "acq": {"starts": 6, "max_iters": 20},
    "seeds": [7],
    "out": ")" << (dir / "out").string() << R"("
  })";
  auto run_once = [&] {
    const std::string cmd = std::string(LATENTBO_CLI_PATH) + " bo-run --config " + cfg.string() +
                            " > /dev/null 2> /dev/null";
    return std::system(cmd.c_str());
  };
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  c.require(run_once() == 0, "first bo-run exits cleanly");
  const std::string first = slurp(dir / "out/trace_T-LBO_seed7.csv");
  c.require(run_once() == 0, "second bo-run exits cleanly");
  const std::string second = slurp(dir / "out/trace_T-LBO_seed7.csv");
  c.require(!first.empty(), "trace CSV produced");
  c.require(first == second, "re-run with identical config + seed is byte-identical");
  fs::remove_all(dir);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    Check (*fn)();
  };
  const Criterion criteria[] = {
      {1, "loss-oracle suite", criterion_1_loss_oracles},
      {2, "gradient suite", criterion_2_gradients},
      {3, "GP suite", criterion_3_gp_suite},
      {4, "latent separation direction", criterion_4_separation},
      {5, "GP generalization direction", criterion_5_gp_generalization},
      {6, "BO direction", criterion_6_bo_direction},
      {7, "semi-supervised mode", criterion_7_semi_supervised},
      {8, "domain-recovery probe", criterion_8_domain_recovery},
      {9, "regret accounting", criterion_9_regret},
      {10, "determinism", criterion_10_determinism},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& cr : criteria) {
    if (!selected.empty() && !selected.count(cr.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Check result;
    try {
      result = cr.fn();
    } catch (const std::exception& e) {
      result.ok = false;
      result.log << "  exception: " << e.what() << "\n";
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (result.ok ? "[PASS]" : "[FAIL]") << " criterion " << cr.id << ": " << cr.name
              << " (" << std::fixed << std::setprecision(1) << secs << "s)\n"
              << result.log.str();
    std::cout.flush();
    failures += result.ok ? 0 : 1;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << "\n";
  return failures;
}
