// latentbo: experiment runner for metric-regularized latent-space Bayesian
// optimization. Subcommands: pretrain | finetune | bo-run | analyze | probe |
// regret. Configs are JSON; every output file embeds the resolved config and
// seed. Exit codes: 0 ok, 1 runtime failure, 2 invalid config.
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "latentbo/analysis/analysis.hpp"
#include "latentbo/bo/loop.hpp"
#include "latentbo/bo/regret.hpp"
#include "latentbo/io/csv.hpp"
#include "latentbo/tasks/tasks.hpp"
#include "latentbo/vae/checkpoint.hpp"
#include "latentbo/vae/train.hpp"

using namespace latentbo;
using nlohmann::json;

namespace {

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("LATENT_BO_LOG");
    if (!env) return 0;
    const std::string v = env;
    if (v == "debug") return 2;
    if (v == "info") return 1;
    return 0;
  }();
  return level;
}

std::mutex log_mutex;

void log_info(const std::string& msg) {
  if (log_level() >= 1) {
    std::lock_guard<std::mutex> lock(log_mutex);
    std::cerr << "[latentbo] " << msg << "\n";
  }
}

struct ConfigError : std::runtime_error {
  ConfigError(const std::string& field, const std::string& msg)
      : std::runtime_error("config error at '" + field + "': " + msg), field_name(field) {}
  std::string field_name;
};

template <class T>
T get_field(const json& j, const std::string& field, T fallback) {
  if (!j.contains(field)) return fallback;
  try {
    return j.at(field).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(field, e.what());
  }
}

struct ResolvedConfig {
  tasks::Task task;
  int n_unlabeled = 4096;
  int n_labeled = 1024;
  std::uint64_t dataset_seed = 1;
  std::string dataset_path;
  std::string save_dataset_path;

  bo::Baseline baseline = bo::Baseline::t_lbo;
  std::string baseline_token = "T-LBO";
  bo::RunConfig run;

  int latent_dim = 2;
  std::vector<int> hidden = {128, 64};

  int pretrain_epochs = 30;
  vae::TrainConfig pretrain_cfg;

  std::vector<std::uint64_t> seeds = {0};
  std::string out_dir = "out";
  std::string pretrain_checkpoint;
  std::vector<std::pair<std::string, std::string>> checkpoints;  // analyze: name -> path

  int analysis_splits = 5;
  double probe_alpha = 0.8;
  int probe_mc = 100;
  int probe_cap = 200;

  json resolved;  // full audit copy embedded in outputs
};

bo::Baseline parse_baseline(std::string token, bool& semi, const std::string& field) {
  semi = false;
  std::string t = token;
  if (t == "SLBO") {
    semi = true;
    t = "LBO";
  } else if (t == "ST-LBO" || t == "SC-LBO" || t == "SLR-LBO" || t == "SS-LBO" || t == "STP-LBO") {
    semi = true;
    t = t.substr(1);
  }
  if (t == "LBO") return bo::Baseline::lbo;
  if (t == "TP-LBO") return bo::Baseline::tp_lbo;
  if (t == "S-LBO") return bo::Baseline::s_lbo;
  if (t == "C-LBO") return bo::Baseline::c_lbo;
  if (t == "LR-LBO") return bo::Baseline::lr_lbo;
  if (t == "T-LBO") return bo::Baseline::t_lbo;
  throw ConfigError(field, "unknown baseline '" + token +
                               "' (expected LBO, TP-LBO, S-LBO, C-LBO, LR-LBO, T-LBO or an "
                               "S-prefixed 1%-label variant)");
}

ResolvedConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override,
                           const std::string& out_override, const std::string& baseline_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  json j;
  try {
    j = json::parse(in, nullptr, true, true);  // comments allowed
  } catch (const json::exception& e) {
    throw ConfigError("config", std::string("not valid JSON: ") + e.what());
  }

  ResolvedConfig cfg;

  const json jtask = j.value("task", json::object());
  const std::string kind = get_field<std::string>(jtask, "kind", "shape");
  if (kind != "shape" && kind != "sequence")
    throw ConfigError("task.kind", "must be 'shape' or 'sequence'");
  cfg.task = tasks::make_task(kind == "shape" ? tasks::TaskKind::shape : tasks::TaskKind::sequence,
                              get_field<std::uint64_t>(jtask, "seed", 1));
  cfg.n_unlabeled = get_field<int>(jtask, "n_unlabeled", 4096);
  cfg.n_labeled = get_field<int>(jtask, "n_labeled", 1024);
  cfg.dataset_seed = get_field<std::uint64_t>(jtask, "dataset_seed", 1);
  cfg.dataset_path = get_field<std::string>(jtask, "dataset_path", "");
  cfg.save_dataset_path = get_field<std::string>(jtask, "save_dataset_path", "");
  if (cfg.n_unlabeled < 1 || cfg.n_labeled < 4)
    throw ConfigError("task.n_labeled", "need n_unlabeled >= 1 and n_labeled >= 4");

  cfg.baseline_token = baseline_override.empty() ? get_field<std::string>(j, "baseline", "T-LBO")
                                                 : baseline_override;
  bool semi = false;
  cfg.baseline = parse_baseline(cfg.baseline_token, semi, "baseline");

  const json jbo = j.value("bo", json::object());
  cfg.run.bo.budget = get_field<int>(jbo, "budget", 200);
  cfg.run.bo.retrain_every = get_field<int>(jbo, "retrain_every", 50);
  cfg.run.bo.stop_threshold = get_field<double>(jbo, "stop_threshold", 1e-4);
  cfg.run.bo.rank_k = get_field<double>(jbo, "rank_k", 1e-3);
  cfg.run.bo.label_fraction = get_field<double>(jbo, "label_fraction", semi ? 0.01 : 1.0);
  cfg.run.bo.n_best = get_field<int>(jbo, "n_best", 256);
  cfg.run.bo.n_rand = get_field<int>(jbo, "n_rand", 64);
  cfg.run.bo.regret_mc_samples = get_field<int>(jbo, "regret_mc_samples", 32);
  cfg.run.bo.b23_schedule = get_field<bool>(jbo, "b23_schedule", false);
  cfg.run.bo.baseline = cfg.baseline;
  const std::string scheme = get_field<std::string>(jbo, "weight_scheme", "rank");
  if (scheme == "rank")
    cfg.run.bo.weight_scheme = metric::WeightScheme::rank;
  else if (scheme == "proportional")
    cfg.run.bo.weight_scheme = metric::WeightScheme::proportional_to_f;
  else
    throw ConfigError("bo.weight_scheme", "must be 'rank' or 'proportional'");
  try {
    cfg.run.bo.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("bo", e.what());
  }

  const json jm = j.value("metric", json::object());
  cfg.run.metric.eta = get_field<double>(jm, "eta", 0.1);
  cfg.run.metric.rho = get_field<double>(jm, "rho", 0.0);
  cfg.run.metric.nu = get_field<double>(jm, "nu", 0.1);
  cfg.run.metric.norm_order = get_field<double>(jm, "norm_order", 2.0);
  cfg.run.metric.beta_metric = get_field<double>(jm, "beta_metric", 1.0);
  if (auto mk = bo::metric_kind_of(cfg.baseline)) {
    cfg.run.metric.kind = *mk;
    try {
      cfg.run.metric.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("metric", e.what());
    }
  }

  const json jv = j.value("vae", json::object());
  cfg.latent_dim = get_field<int>(jv, "latent_dim", 2);
  cfg.hidden = get_field<std::vector<int>>(jv, "hidden", {128, 64});
  if (cfg.latent_dim < 1) throw ConfigError("vae.latent_dim", "must be >= 1");
  if (cfg.hidden.empty()) throw ConfigError("vae.hidden", "need at least one hidden layer");

  const json jt = j.value("train", json::object());
  cfg.pretrain_epochs = get_field<int>(jt, "pretrain_epochs", 30);
  cfg.pretrain_cfg.epochs = cfg.pretrain_epochs;
  cfg.pretrain_cfg.lr = get_field<double>(jt, "lr", 1e-3);
  cfg.pretrain_cfg.batch_size = get_field<int>(jt, "batch_size", 256);
  cfg.pretrain_cfg.beta_kl_init = get_field<double>(jt, "beta_kl_init", 1e-6);
  cfg.pretrain_cfg.beta_kl_final = get_field<double>(jt, "beta_kl_final", 1e-4);
  cfg.run.retrain = cfg.pretrain_cfg;
  cfg.run.retrain.epochs = get_field<int>(jt, "finetune_epochs", 1);
  cfg.run.retrain.beta_r = get_field<double>(jt, "beta_r", 10.0);
  cfg.run.retrain.metric_batch = get_field<int>(jt, "metric_batch", 16);
  cfg.run.retrain.unlabeled_batch = get_field<int>(jt, "unlabeled_batch", 256);
  cfg.run.include_unlabeled =
      get_field<bool>(jt, "include_unlabeled", semi || cfg.run.bo.label_fraction < 1.0);
  try {
    cfg.pretrain_cfg.validate();
    cfg.run.retrain.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("train", e.what());
  }

  const json jg = j.value("gp", json::object());
  cfg.run.gp_fit.restarts = get_field<int>(jg, "restarts", 3);
  cfg.run.gp_fit.max_iters = get_field<int>(jg, "max_iters", 200);
  cfg.run.gp_fit.lr = get_field<double>(jg, "lr", 0.05);
  cfg.run.gp_fit.grad_tol = get_field<double>(jg, "grad_tol", 1e-5);

  const json ja = j.value("acq", json::object());
  cfg.run.acq.starts = get_field<int>(ja, "starts", 32);
  cfg.run.acq.max_iters = get_field<int>(ja, "max_iters", 100);
  cfg.run.acq.fd_step = get_field<double>(ja, "fd_step", 1e-5);

  const json jan = j.value("analysis", json::object());
  cfg.analysis_splits = get_field<int>(jan, "splits", 5);
  cfg.probe_alpha = get_field<double>(jan, "alpha", 0.8);
  cfg.probe_mc = get_field<int>(jan, "probe_mc", 100);
  cfg.probe_cap = get_field<int>(jan, "probe_cap", 200);

  cfg.seeds = get_field<std::vector<std::uint64_t>>(j, "seeds", {0});
  if (seed_override) cfg.seeds = {*seed_override};
  if (cfg.seeds.empty()) throw ConfigError("seeds", "must not be empty");
  cfg.out_dir = out_override.empty() ? get_field<std::string>(j, "out", "out") : out_override;
  cfg.pretrain_checkpoint = get_field<std::string>(j, "pretrain_checkpoint", "");
  if (j.contains("checkpoints")) {
    for (const auto& item : j.at("checkpoints")) {
      cfg.checkpoints.emplace_back(get_field<std::string>(item, "name", "checkpoint"),
                                   get_field<std::string>(item, "path", ""));
      if (cfg.checkpoints.back().second.empty())
        throw ConfigError("checkpoints", "every entry needs a 'path'");
    }
  }

  cfg.resolved = {
      {"task",
       {{"kind", kind},
        {"seed", cfg.task.task_seed},
        {"n_unlabeled", cfg.n_unlabeled},
        {"n_labeled", cfg.n_labeled},
        {"dataset_seed", cfg.dataset_seed},
        {"dataset_path", cfg.dataset_path}}},
      {"baseline", cfg.baseline_token},
      {"bo",
       {{"budget", cfg.run.bo.budget},
        {"retrain_every", cfg.run.bo.retrain_every},
        {"stop_threshold", cfg.run.bo.stop_threshold},
        {"rank_k", cfg.run.bo.rank_k},
        {"label_fraction", cfg.run.bo.label_fraction},
        {"n_best", cfg.run.bo.n_best},
        {"n_rand", cfg.run.bo.n_rand},
        {"regret_mc_samples", cfg.run.bo.regret_mc_samples},
        {"b23_schedule", cfg.run.bo.b23_schedule},
        {"weight_scheme", scheme}}},
      {"metric",
       {{"eta", cfg.run.metric.eta},
        {"rho", cfg.run.metric.rho},
        {"nu", cfg.run.metric.nu},
        {"norm_order", cfg.run.metric.norm_order},
        {"beta_metric", cfg.run.metric.beta_metric}}},
      {"vae", {{"latent_dim", cfg.latent_dim}, {"hidden", cfg.hidden}}},
      {"train",
       {{"pretrain_epochs", cfg.pretrain_epochs},
        {"finetune_epochs", cfg.run.retrain.epochs},
        {"lr", cfg.pretrain_cfg.lr},
        {"batch_size", cfg.pretrain_cfg.batch_size},
        {"beta_kl_init", cfg.pretrain_cfg.beta_kl_init},
        {"beta_kl_final", cfg.pretrain_cfg.beta_kl_final},
        {"beta_r", cfg.run.retrain.beta_r},
        {"metric_batch", cfg.run.retrain.metric_batch},
        {"include_unlabeled", cfg.run.include_unlabeled}}},
      {"gp",
       {{"restarts", cfg.run.gp_fit.restarts},
        {"max_iters", cfg.run.gp_fit.max_iters},
        {"lr", cfg.run.gp_fit.lr},
        {"grad_tol", cfg.run.gp_fit.grad_tol}}},
      {"acq",
       {{"starts", cfg.run.acq.starts},
        {"max_iters", cfg.run.acq.max_iters},
        {"fd_step", cfg.run.acq.fd_step}}},
      {"analysis",
       {{"splits", cfg.analysis_splits},
        {"alpha", cfg.probe_alpha},
        {"probe_mc", cfg.probe_mc},
        {"probe_cap", cfg.probe_cap}}},
      {"seeds", cfg.seeds},
      {"out", cfg.out_dir},
  };
  return cfg;
}

struct Workspace {
  tasks::Dataset labeled;
  tasks::Dataset unlabeled;
  math::Tensor unlabeled_features;
};

Workspace build_workspace(const ResolvedConfig& cfg) {
  Workspace ws;
  if (!cfg.dataset_path.empty()) {
    auto loaded = tasks::load_dataset(cfg.dataset_path);
    ws.labeled = loaded.data;
  } else {
    math::Rng lab_rng = math::Rng(cfg.dataset_seed).split(1);
    ws.labeled = tasks::generate_dataset(cfg.task, cfg.n_labeled, lab_rng);
  }
  math::Rng unlab_rng = math::Rng(cfg.dataset_seed).split(2);
  ws.unlabeled = tasks::generate_dataset(cfg.task, cfg.n_unlabeled, unlab_rng);
  ws.unlabeled_features =
      cfg.task.codec().to_features(std::span<const tasks::Input>(ws.unlabeled.inputs));
  if (!cfg.save_dataset_path.empty())
    tasks::save_dataset(cfg.save_dataset_path, cfg.task, ws.labeled,
                        {{"dataset_seed", cfg.dataset_seed}});
  return ws;
}

std::string seed_tag(const ResolvedConfig& cfg, std::uint64_t seed) {
  return cfg.baseline_token + "_seed" + std::to_string(seed);
}

// Pretrained parameters for one seed: loaded from the configured checkpoint
// or trained inline on the unlabeled set.
vae::VaeParams pretrained_for_seed(const ResolvedConfig& cfg, const Workspace& ws,
                                   std::uint64_t seed) {
  if (!cfg.pretrain_checkpoint.empty()) {
    log_info("loading pretrain checkpoint " + cfg.pretrain_checkpoint);
    return vae::load_checkpoint(cfg.pretrain_checkpoint).params;
  }
  const bool needs_head = cfg.baseline == bo::Baseline::tp_lbo;
  math::Rng init_rng = math::Rng(seed).split(101);
  vae::VaeParams params =
      vae::make_vae(cfg.task.codec(), cfg.latent_dim, cfg.hidden, needs_head, init_rng);
  math::Rng train_rng = math::Rng(seed).split(102);
  log_info("pretraining inline for seed " + std::to_string(seed));
  vae::pretrain(params, ws.unlabeled_features, cfg.pretrain_cfg, train_rng);
  return params;
}

void for_each_seed(const ResolvedConfig& cfg, int parallel,
                   const std::function<void(std::uint64_t)>& work) {
  if (parallel <= 1 || cfg.seeds.size() <= 1) {
    for (std::uint64_t s : cfg.seeds) work(s);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto runner = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfg.seeds.size()) return;
      work(cfg.seeds[i]);
    }
  };
  std::vector<std::thread> pool;
  const int nthreads = std::min<int>(parallel, static_cast<int>(cfg.seeds.size()));
  pool.reserve(static_cast<std::size_t>(nthreads));
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(runner);
  for (auto& t : pool) t.join();
}

// ---- subcommands ----

int cmd_pretrain(const ResolvedConfig& cfg) {
  Workspace ws = build_workspace(cfg);
  std::string last_path;
  for (std::uint64_t seed : cfg.seeds) {
    const bool needs_head = cfg.baseline == bo::Baseline::tp_lbo;
    math::Rng init_rng = math::Rng(seed).split(101);
    vae::VaeParams params =
        vae::make_vae(cfg.task.codec(), cfg.latent_dim, cfg.hidden, needs_head, init_rng);
    math::Rng train_rng = math::Rng(seed).split(102);
    auto trace = vae::pretrain(params, ws.unlabeled_features, cfg.pretrain_cfg, train_rng);
    last_path = cfg.out_dir + "/pretrain_" + tasks::task_kind_name(cfg.task.kind) + "_seed" +
                std::to_string(seed) + ".vae";
    json meta = {{"config", cfg.resolved},
                 {"seed", seed},
                 {"phase", "pretrain"},
                 {"epoch_loss", trace.epoch_loss}};
    vae::save_checkpoint(last_path, params, meta);
    log_info("saved " + last_path);
  }
  std::cout << "pretrain ok seeds=" << cfg.seeds.size() << " last_checkpoint=" << last_path
            << "\n";
  return 0;
}

int cmd_finetune(const ResolvedConfig& cfg) {
  Workspace ws = build_workspace(cfg);
  std::string last_path;
  for (std::uint64_t seed : cfg.seeds) {
    vae::VaeParams params = pretrained_for_seed(cfg, ws, seed);
    auto weights =
        metric::datum_weights(ws.labeled.labels, cfg.run.bo.rank_k, cfg.run.bo.weight_scheme);
    math::Tensor features =
        params.codec.to_features(std::span<const tasks::Input>(ws.labeled.inputs));
    vae::FinetuneData data;
    data.labeled_features = &features;
    data.f_raw = &ws.labeled.labels;
    data.weights = &weights;
    data.unlabeled_features = cfg.run.include_unlabeled ? &ws.unlabeled_features : nullptr;
    vae::ObjectiveSpec spec = bo::objective_spec(cfg.baseline, cfg.run.include_unlabeled);
    math::Rng rng = math::Rng(seed).split(103);
    auto trace = vae::finetune(params, data, spec, cfg.run.metric, cfg.run.retrain, rng);

    last_path = cfg.out_dir + "/finetune_" + seed_tag(cfg, seed) + ".vae";
    vae::save_checkpoint(last_path, params,
                         {{"config", cfg.resolved}, {"seed", seed}, {"phase", "finetune"}});
    io::CsvWriter w;
    w.comment("config: " + cfg.resolved.dump());
    w.comment("seed: " + std::to_string(seed));
    w.header({"epoch", "loss"});
    for (std::size_t e = 0; e < trace.epoch_loss.size(); ++e)
      w.row({static_cast<double>(e), trace.epoch_loss[e]});
    w.save(cfg.out_dir + "/finetune_loss_" + seed_tag(cfg, seed) + ".csv");
    log_info("saved " + last_path);
  }
  std::cout << "finetune ok baseline=" << cfg.baseline_token << " seeds=" << cfg.seeds.size()
            << " last_checkpoint=" << last_path << "\n";
  return 0;
}

int cmd_bo_run(const ResolvedConfig& cfg, int parallel, bool regret_mode) {
  Workspace ws = build_workspace(cfg);
  std::vector<std::vector<bo::TraceRecord>> traces(cfg.seeds.size());
  std::vector<double> finals(cfg.seeds.size(), 0.0);
  std::mutex collect_mutex;

  for_each_seed(cfg, parallel, [&](std::uint64_t seed) {
    vae::VaeParams pre = pretrained_for_seed(cfg, ws, seed);
    bo::RunConfig rc = cfg.run;
    rc.seed = seed;
    auto result = bo::run(cfg.task, ws.labeled, &ws.unlabeled_features, pre, rc);

    json meta = cfg.resolved;
    meta["seed"] = seed;
    const std::string prefix = regret_mode ? "regret_" : "trace_";
    bo::write_trace_csv(cfg.out_dir + "/" + prefix + seed_tag(cfg, seed) + ".csv", result.trace,
                        meta);
    json summary = {{"config", cfg.resolved},
                    {"seed", seed},
                    {"baseline", cfg.baseline_token},
                    {"evaluations", result.evaluations},
                    {"initial_labels", result.initial_labels},
                    {"final_incumbent", result.incumbent_f},
                    {"cum_regret", result.trace.empty() ? 0.0 : result.trace.back().cum_regret}};
    io::write_file_atomic(cfg.out_dir + "/bo_summary_" + seed_tag(cfg, seed) + ".json",
                          summary.dump(2) + "\n");
    {
      std::lock_guard<std::mutex> lock(collect_mutex);
      for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
        if (cfg.seeds[i] == seed) {
          traces[i] = result.trace;
          finals[i] = result.incumbent_f;
        }
    }
    log_info("finished seed " + std::to_string(seed));
  });

  auto summary = analysis::summarize(traces);
  analysis::write_summary_csv(cfg.out_dir + "/" +
                                  std::string(regret_mode ? "regret_summary_" : "summary_") +
                                  cfg.baseline_token + ".csv",
                              summary, cfg.resolved);
  double mean_final = 0.0;
  for (double f : finals) mean_final += f;
  mean_final /= static_cast<double>(finals.size());
  std::cout << (regret_mode ? "regret" : "bo-run") << " ok baseline=" << cfg.baseline_token
            << " seeds=" << cfg.seeds.size() << " mean_final_incumbent=" << mean_final << "\n";
  return 0;
}

int cmd_analyze(const ResolvedConfig& cfg) {
  Workspace ws = build_workspace(cfg);
  auto targets = cfg.checkpoints;
  if (targets.empty() && !cfg.pretrain_checkpoint.empty())
    targets.emplace_back("pretrain", cfg.pretrain_checkpoint);
  if (targets.empty()) throw ConfigError("checkpoints", "analyze needs checkpoint paths");

  for (const auto& [name, path] : targets) {
    auto ck = vae::load_checkpoint(path);
    auto rep = analysis::separation_report(ck.params, ws.labeled.inputs, ws.labeled.labels);
    json meta = cfg.resolved;
    meta["checkpoint"] = path;
    analysis::write_separation_csv(cfg.out_dir + "/separation_" + name + ".csv", rep, meta);

    math::Rng rng = math::Rng(cfg.seeds[0]).split(104);
    auto gen = analysis::gp_generalization(ck.params, ws.labeled.inputs, ws.labeled.labels,
                                           cfg.analysis_splits, cfg.run.gp_fit, rng);
    json report = {{"config", cfg.resolved},
                   {"checkpoint", path},
                   {"seed", cfg.seeds[0]},
                   {"separation",
                    {{"mean_high_high", rep.mean_hh},
                     {"mean_low_low", rep.mean_ll},
                     {"mean_high_low", rep.mean_hl},
                     {"inter_intra_ratio", rep.inter_intra_ratio()},
                     {"degenerate_split", rep.degenerate_split}}},
                   {"gp_generalization",
                    {{"mean_pll", gen.mean}, {"sd_pll", gen.sd}, {"per_split", gen.per_split}}}};
    io::write_file_atomic(cfg.out_dir + "/analysis_" + name + ".json", report.dump(2) + "\n");
    log_info("analyzed " + name);
  }
  std::cout << "analyze ok checkpoints=" << targets.size() << " out=" << cfg.out_dir << "\n";
  return 0;
}

int cmd_probe(const ResolvedConfig& cfg, int parallel) {
  Workspace ws = build_workspace(cfg);
  std::atomic<int> done{0};
  for_each_seed(cfg, parallel, [&](std::uint64_t seed) {
    vae::VaeParams pre = pretrained_for_seed(cfg, ws, seed);
    bo::RunConfig rc = cfg.run;
    rc.seed = seed;
    auto trace = analysis::run_recovery_probe(cfg.task, ws.labeled, &ws.unlabeled_features, pre,
                                              rc, cfg.probe_alpha, cfg.probe_mc, cfg.probe_cap);
    json meta = cfg.resolved;
    meta["seed"] = seed;
    analysis::write_recovery_csv(cfg.out_dir + "/recovery_" + seed_tag(cfg, seed) + ".csv", trace,
                                 meta);
    ++done;
  });
  std::cout << "probe ok baseline=" << cfg.baseline_token << " seeds=" << done.load() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metric-regularized latent-space Bayesian optimization"};
  app.require_subcommand(1);

  std::string config_path, out_dir, baseline;
  std::optional<std::uint64_t> seed;
  int parallel = 1;

  for (const char* name : {"pretrain", "finetune", "bo-run", "analyze", "probe", "regret"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed, "override the config seed list with one seed");
    sub->add_option("--out", out_dir, "output directory (overrides config)");
    sub->add_option("--parallel", parallel, "worker threads for independent runs");
    sub->add_option("--baseline", baseline, "baseline name (overrides config)");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string sub = app.get_subcommands().front()->get_name();

  try {
    ResolvedConfig cfg = load_config(config_path, seed, out_dir, baseline);
    std::filesystem::create_directories(cfg.out_dir);
    if (sub == "pretrain") return cmd_pretrain(cfg);
    if (sub == "finetune") return cmd_finetune(cfg);
    if (sub == "bo-run") return cmd_bo_run(cfg, parallel, false);
    if (sub == "regret") return cmd_bo_run(cfg, parallel, true);
    if (sub == "analyze") return cmd_analyze(cfg);
    if (sub == "probe") return cmd_probe(cfg, parallel);
    std::cerr << "unknown subcommand " << sub << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error in " << sub << ": " << e.what() << "\n";
    return 1;
  }
}
