#include "pfn/cli.hpp"

#include <CLI11.hpp>

#include <cctype>
#include <chrono>
#include <climits>
#include <cinttypes>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "pfn/checkpoint.hpp"
#include "pfn/config.hpp"
#include "pfn/error.hpp"
#include "pfn/evaluation.hpp"
#include "pfn/gp.hpp"
#include "pfn/manifest.hpp"
#include "pfn/powerflow.hpp"
#include "pfn/priors.hpp"
#include "pfn/training.hpp"

namespace pfn {

namespace fs = std::filesystem;

std::string utc_timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

std::string make_run_dir(const std::string& parent,
                         const std::string& subcommand, uint64_t seed) {
  fs::create_directories(parent);
  std::string base = subcommand + "-" + std::to_string(seed) + "-" +
                     utc_timestamp();
  fs::path dir = fs::path(parent) / base;
  for (int suffix = 2; fs::exists(dir); ++suffix)
    dir = fs::path(parent) / (base + "-" + std::to_string(suffix));
  fs::create_directory(dir);
  return dir.string();
}

namespace {

struct CommonArgs {
  std::vector<std::string> config_files;
  std::vector<std::string> sets;
  std::string from_manifest;
  std::string out_parent = "runs";
  uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config_files,
                  "config file with key = value lines, repeatable")
      ->type_size(1)
      ->expected(1, INT_MAX);
  cmd->add_option("--set", a.sets, "override a config key, key=value, last wins")
      ->type_size(1)
      ->expected(1, INT_MAX);
  cmd->add_option("--seed", a.seed, "root seed for every random stream");
  cmd->add_option("--out", a.out_parent,
                  "parent directory for the run directory");
  cmd->add_option("--from-manifest", a.from_manifest,
                  "restore config and seed from a previous run's manifest");
}

// Precedence: manifest < config files < --set overrides; an explicit --seed
// beats the manifest seed.
KvConfig collect_config(const CLI::App* cmd, const CommonArgs& a,
                        uint64_t* seed) {
  KvConfig cfg;
  *seed = a.seed;
  if (!a.from_manifest.empty()) {
    RunManifest m = read_manifest(a.from_manifest);
    if (m.subcommand != cmd->get_name())
      throw ConfigError("manifest was written by '" + m.subcommand +
                        "', not '" + cmd->get_name() + "'");
    cfg = m.config;
    if (cmd->count("--seed") == 0) *seed = m.seed;
  }
  for (const auto& path : a.config_files) {
    KvConfig file = load_config_file(path);
    for (const auto& [k, v] : file.values) cfg.set(k, v);
  }
  for (const auto& s : a.sets) apply_override(cfg, s);
  return cfg;
}

// One output directory: manifest first, artifacts hashed into it at the end.
// Wall-clock CSVs are written to the directory but never registered.
struct RunContext {
  fs::path dir;
  RunManifest manifest;

  std::string file(const std::string& name) const {
    return (dir / name).string();
  }
  void add_artifact(const std::string& name) {
    manifest.artifacts.emplace_back(name, "");
  }
  void finish() {
    for (auto& [name, hash] : manifest.artifacts)
      hash = sha256_file(file(name));
    write_manifest(file("manifest.json"), manifest);
  }
};

RunContext open_run(const std::string& subcommand, const CommonArgs& a,
                    uint64_t seed, const KvConfig& resolved) {
  RunContext rc;
  rc.dir = make_run_dir(a.out_parent, subcommand, seed);
  rc.manifest.subcommand = subcommand;
  rc.manifest.seed = seed;
  rc.manifest.config = resolved;
  write_manifest(rc.file("manifest.json"), rc.manifest);
  std::printf("run_dir: %s\n", rc.dir.c_str());
  return rc;
}

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  out.push_back(cur);
  for (const auto& item : out)
    if (item.empty()) throw ConfigError("empty entry in list: '" + s + "'");
  return out;
}

std::string fmt_i64(int64_t v) { return std::to_string(v); }

int64_t parse_i64_strict(const std::string& s) {
  size_t used = 0;
  int64_t v = std::stoll(s, &used);
  if (used != s.size()) throw ConfigError("not an integer: '" + s + "'");
  return v;
}

std::string fmt_f64(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------- gen-prior

void run_gen_prior(const CLI::App* cmd, const CommonArgs& a) {
  uint64_t seed = 0;
  KvConfig cfg = collect_config(cmd, a, &seed);
  check_config_keys(cfg);
  PriorConfig prior = prior_from_config(cfg);
  int64_t count = cfg.get_i64("gen.datasets", 1);
  if (count < 1) throw ConfigError("gen.datasets must be >= 1");

  KvConfig resolved = resolved_prior_config(prior);
  resolved.set("gen.datasets", fmt_i64(count));
  RunContext rc = open_run("gen-prior", a, seed, resolved);

  SeededRng root(seed);
  for (int64_t k = 0; k < count; ++k) {
    SyntheticDataset ds =
        sample_dataset(prior, root.fork(static_cast<uint64_t>(k)).seed);
    char name[32];
    std::snprintf(name, sizeof(name), "dataset-%03" PRId64 ".csv", k);
    write_dataset_csv(rc.file(name), ds);
    rc.add_artifact(name);
  }
  rc.finish();
  std::printf("wrote %" PRId64 " dataset(s), %" PRId64 " points each\n", count,
              prior.points_per_dataset);
}

// ------------------------------------------------------------ gen-powerflow

RadialNetwork load_named_network(const std::string& name) {
  if (name == "ieee33")
    return load_network_file(std::string(PFN_DATA_DIR) + "/ieee33.net");
  if (name == "feeder12")
    return load_network_file(std::string(PFN_DATA_DIR) + "/feeder12.net");
  return load_network_file(name);
}

void run_gen_powerflow(const CLI::App* cmd, const CommonArgs& a) {
  uint64_t seed = 0;
  KvConfig cfg = collect_config(cmd, a, &seed);
  check_config_keys(cfg);
  std::string network = cfg.get_str("pf.network", "ieee33");
  if (network != "ieee33" && network != "feeder12")
    network = fs::absolute(network).string();
  int64_t buses = cfg.get_i64("pf.buses", 0);
  double delta_pct = cfg.get_f64("pf.delta_pct", 50.0);
  int64_t samples = cfg.get_i64("pf.samples", 256);
  int64_t target_bus = cfg.get_i64("pf.target_bus", -1);

  RadialNetwork net = load_named_network(network);
  if (buses > 0) net = truncate_network(net, static_cast<int>(buses));
  if (target_bus < 0) target_bus = net.bus_count - 1;

  KvConfig resolved;
  resolved.set("pf.network", network);
  resolved.set("pf.buses", fmt_i64(buses));
  resolved.set("pf.delta_pct", fmt_f64(delta_pct));
  resolved.set("pf.samples", fmt_i64(samples));
  resolved.set("pf.target_bus", fmt_i64(target_bus));
  RunContext rc = open_run("gen-powerflow", a, seed, resolved);

  SyntheticDataset ds = generate_pf_dataset(
      net, delta_pct, samples, static_cast<int>(target_bus), seed);
  write_dataset_csv(rc.file("dataset.csv"), ds);
  rc.add_artifact("dataset.csv");
  write_network_file(rc.file("network.net"), net);
  rc.add_artifact("network.net");
  rc.finish();
  std::printf("wrote %" PRId64 " samples, %" PRId64
              " inputs, target bus %" PRId64 "\n",
              samples, ds.dim(), target_bus);
}

// -------------------------------------------------------------------- train

void run_train(const CLI::App* cmd, const CommonArgs& a) {
  uint64_t seed = 0;
  KvConfig cfg = collect_config(cmd, a, &seed);
  check_config_keys(cfg);
  TrainConfig tc = train_from_config(cfg);
  tc.seed = seed;

  RunContext rc = open_run("train", a, seed, resolved_train_config(tc));
  TrainResult res = train(tc, [&](const TrainRow& row) {
    std::printf("epoch step=%" PRId64 " train_nll=%.6f val_nll=%.6f\n",
                row.step, row.train_nll, row.val_nll);
    std::fflush(stdout);
  });
  save_checkpoint(rc.file("checkpoint.bin"), res.model);
  write_trainlog_csv(rc.file("trainlog.csv"), res.log);
  write_trainlog_timing_csv(rc.file("trainlog_timing.csv"), res.log);
  rc.add_artifact("checkpoint.bin");
  rc.add_artifact("trainlog.csv");
  rc.finish();
  std::printf("best val_nll %.6f at epoch %" PRId64 "\n", res.best_val_nll,
              res.best_epoch);
}

// ------------------------------------------------------- evaluation helpers

std::vector<SyntheticDataset> sample_eval_suite(const PriorConfig& prior,
                                                int64_t count, uint64_t seed) {
  if (count < 1) throw ConfigError("eval.suite_datasets must be >= 1");
  SeededRng stream = SeededRng(seed).fork(5);
  std::vector<SyntheticDataset> suite;
  suite.reserve(static_cast<size_t>(count));
  for (int64_t k = 0; k < count; ++k)
    suite.push_back(
        sample_dataset(prior, stream.fork(static_cast<uint64_t>(k)).seed));
  return suite;
}

struct EvalOptions {
  int64_t context = -1;  // <= 0 means half of each dataset
  int64_t suite_datasets = 64;
  std::string filter = "none";
  int64_t k = 1;
  double gamma = 1.0;
};

EvalOptions eval_options(const KvConfig& cfg, const PriorConfig& prior) {
  EvalOptions o;
  o.context = cfg.get_i64("eval.context", o.context);
  o.suite_datasets = cfg.get_i64("eval.suite_datasets", o.suite_datasets);
  o.filter = cfg.get_str("eval.filter", o.filter);
  o.k = cfg.get_i64("eval.k", o.k);
  o.gamma = cfg.get_f64("eval.gamma", o.gamma);
  if (o.context <= 0) o.context = prior.points_per_dataset / 2;
  if (o.filter != "none" && o.filter != "knn" && o.filter != "exponential")
    throw ConfigError("eval.filter must be none, knn, or exponential");
  return o;
}

void record_eval_options(KvConfig& resolved, const EvalOptions& o) {
  resolved.set("eval.context", fmt_i64(o.context));
  resolved.set("eval.suite_datasets", fmt_i64(o.suite_datasets));
  resolved.set("eval.filter", o.filter);
  resolved.set("eval.k", fmt_i64(o.k));
  resolved.set("eval.gamma", fmt_f64(o.gamma));
}

// Shared metrics + coverage path once the predictor exists.
void run_suite_eval(RunContext& rc, Predictor& pred,
                    const std::vector<SyntheticDataset>& suite,
                    const EvalOptions& o) {
  Metrics m;
  std::string name = pred.name();
  if (o.filter == "none") {
    m = evaluate(pred, suite, o.context);
  } else if (o.filter == "knn") {
    m = evaluate_filtered(pred, suite, o.context,
                          PostHocFilter{FilterKind::Knn, o.k, 0.0});
    name += "+knn" + fmt_i64(o.k);
  } else {
    m = evaluate_filtered(pred, suite, o.context,
                          PostHocFilter{FilterKind::Exponential, 0, o.gamma});
    name += "+exp" + fmt_f64(o.gamma);
  }
  write_metrics_csv(rc.file("metrics.csv"), {{name, o.context, m}});
  rc.add_artifact("metrics.csv");
  // wall-clock twin stays out of the manifest
  write_metrics_timing_csv(rc.file("metrics_timing.csv"),
                           {{name, o.context, m}});
  CoverageReport cov = coverage(pred, suite, o.context);
  write_coverage_csv(rc.file("coverage.csv"), {{name, cov}});
  rc.add_artifact("coverage.csv");
  std::printf("%s context=%" PRId64 " mse=%.6g mae=%.6g cover1sd=%.3f\n",
              name.c_str(), o.context, m.mse, m.mae, cov.within_one_sd);
}

// ----------------------------------------------------------------- evaluate

void run_evaluate(const CLI::App* cmd, const CommonArgs& a,
                  const std::string& checkpoint_flag, int64_t context_flag) {
  uint64_t seed = 0;
  KvConfig cfg = collect_config(cmd, a, &seed);
  if (cmd->count("--checkpoint"))
    cfg.set("eval.checkpoint", fs::absolute(checkpoint_flag).string());
  if (cmd->count("--context")) cfg.set("eval.context", fmt_i64(context_flag));
  check_config_keys(cfg);
  std::string ckpt = cfg.get_str("eval.checkpoint", "");
  if (ckpt.empty())
    throw ConfigError("evaluate needs --checkpoint or eval.checkpoint");

  PriorConfig prior = prior_from_config(cfg);
  EvalOptions o = eval_options(cfg, prior);
  PFNModel model = load_checkpoint(ckpt);

  KvConfig resolved = resolved_prior_config(prior);
  record_eval_options(resolved, o);
  resolved.set("eval.checkpoint", ckpt);
  RunContext rc = open_run("evaluate", a, seed, resolved);

  std::vector<SyntheticDataset> suite =
      sample_eval_suite(prior, o.suite_datasets, seed);
  PfnPredictor pred(model);
  run_suite_eval(rc, pred, suite, o);
  rc.finish();
}

// -------------------------------------------------------------- gp-baseline

void run_gp_baseline(const CLI::App* cmd, const CommonArgs& a) {
  uint64_t seed = 0;
  KvConfig cfg = collect_config(cmd, a, &seed);
  check_config_keys(cfg);
  PriorConfig prior = prior_from_config(cfg);
  EvalOptions o = eval_options(cfg, prior);
  bool ard = cfg.get_bool("eval.ard", false);

  KvConfig resolved = resolved_prior_config(prior);
  record_eval_options(resolved, o);
  resolved.set("eval.ard", ard ? "true" : "false");
  RunContext rc = open_run("gp-baseline", a, seed, resolved);

  std::vector<SyntheticDataset> suite =
      sample_eval_suite(prior, o.suite_datasets, seed);
  GpPredictor pred;
  pred.ard = ard;
  run_suite_eval(rc, pred, suite, o);
  rc.finish();
}

// -------------------------------------------------------- diagnose-locality

void run_diagnose_locality(const CLI::App* cmd, const CommonArgs& a,
                           const std::string& checkpoint_flag,
                           int64_t layer_flag, int64_t context_flag) {
  uint64_t seed = 0;
  KvConfig cfg = collect_config(cmd, a, &seed);
  if (cmd->count("--checkpoint"))
    cfg.set("eval.checkpoint", fs::absolute(checkpoint_flag).string());
  if (cmd->count("--layer")) cfg.set("eval.layer", fmt_i64(layer_flag));
  if (cmd->count("--context")) cfg.set("eval.context", fmt_i64(context_flag));
  check_config_keys(cfg);
  std::string ckpt = cfg.get_str("eval.checkpoint", "");
  if (ckpt.empty())
    throw ConfigError("diagnose-locality needs --checkpoint or eval.checkpoint");

  PriorConfig prior = prior_from_config(cfg);
  EvalOptions o = eval_options(cfg, prior);
  int64_t layer = cfg.get_i64("eval.layer", 0);
  double epsilon = cfg.get_f64("eval.epsilon", 0.3);
  PFNModel model = load_checkpoint(ckpt);
  if (layer < 0 || layer >= model.spec.layers)
    throw ConfigError("eval.layer out of range for this checkpoint");

  KvConfig resolved = resolved_prior_config(prior);
  record_eval_options(resolved, o);
  resolved.set("eval.checkpoint", ckpt);
  resolved.set("eval.layer", fmt_i64(layer));
  resolved.set("eval.epsilon", fmt_f64(epsilon));
  RunContext rc = open_run("diagnose-locality", a, seed, resolved);

  std::vector<SyntheticDataset> suite =
      sample_eval_suite(prior, o.suite_datasets, seed);
  LocalityProfile pooled;
  for (const auto& ds : suite) {
    LocalityProfile p = locality_profile(model, ds, static_cast<int>(layer),
                                         o.context);
    pooled.entries.insert(pooled.entries.end(), p.entries.begin(),
                          p.entries.end());
  }
  write_locality_csv(rc.file("locality.csv"), pooled);
  rc.add_artifact("locality.csv");

  // Per-head rank correlation and tail mass over the pooled pairs. Every
  // weight row sums to one, so sum(weight) counts query rows exactly and
  // sum(weight | distance > eps) / sum(weight) is the far-field mass.
  FILE* f = std::fopen(rc.file("locality_summary.csv").c_str(), "wb");
  if (!f) throw std::runtime_error("cannot write locality_summary.csv");
  std::fprintf(f, "layer,head,spearman,far_mass\n");
  double avg_spearman = 0.0;
  for (int64_t head = -1; head < model.spec.attention.heads; ++head) {
    std::vector<double> dist, weight;
    double total = 0.0, far = 0.0;
    for (const auto& e : pooled.entries) {
      if (e.head != head) continue;
      dist.push_back(e.distance);
      weight.push_back(e.weight);
      total += e.weight;
      if (e.distance > epsilon) far += e.weight;
    }
    double rho = spearman(dist, weight);
    if (head == -1) avg_spearman = rho;
    std::fprintf(f, "%" PRId64 ",%" PRId64 ",%.17g,%.17g\n", layer, head, rho,
                 total > 0.0 ? far / total : 0.0);
  }
  std::fclose(f);
  rc.add_artifact("locality_summary.csv");
  rc.finish();
  std::printf("layer %" PRId64 " head-averaged spearman %.4f\n", layer,
              avg_spearman);
}

// ------------------------------------------------------------------- ablate

std::string resolve_sweep_key(const std::string& name) {
  if (name == "bucket_size" || name == "buckets") return "model.buckets";
  if (name == "attention") return "model.attention";
  if (name == "phi_x") return "model.phi_x";
  if (name == "phi_y") return "model.phi_y";
  if (name == "tie_qk") return "model.tie_qk";
  if (name == "heads") return "model.heads";
  if (name == "width") return "model.width";
  if (name == "layers") return "model.layers";
  if (name == "lr") return "train.lr";
  if (name.find('.') != std::string::npos) return name;
  throw ConfigError("unknown sweep name '" + name + "'");
}

void run_ablate(const CLI::App* cmd, const CommonArgs& a,
                const std::string& sweep_flag, const std::string& values_flag) {
  uint64_t seed = 0;
  KvConfig cfg = collect_config(cmd, a, &seed);
  if (cmd->count("--sweep")) cfg.set("ablate.sweep", sweep_flag);
  if (cmd->count("--values")) cfg.set("ablate.values", values_flag);
  check_config_keys(cfg);
  std::string sweep = cfg.get_str("ablate.sweep", "");
  std::string values = cfg.get_str("ablate.values", "");
  if (sweep.empty() || values.empty())
    throw ConfigError("ablate needs --sweep <key> and --values <v1,v2,...>");
  std::string key = resolve_sweep_key(sweep);
  std::vector<std::string> value_list = split_csv_list(values);

  KvConfig base = cfg;
  base.values.erase("ablate.sweep");
  base.values.erase("ablate.values");
  TrainConfig probe = train_from_config(base);
  KvConfig resolved = resolved_train_config(probe);
  resolved.set("ablate.sweep", key);
  resolved.set("ablate.values", values);
  RunContext rc = open_run("ablate", a, seed, resolved);

  FILE* f = std::fopen(rc.file("ablate.csv").c_str(), "wb");
  if (!f) throw std::runtime_error("cannot write ablate.csv");
  std::fprintf(f, "value,best_val_nll,final_val_nll\n");
  for (const auto& value : value_list) {
    KvConfig c = base;
    c.set(key, value);
    TrainConfig tc = train_from_config(c);
    tc.seed = seed;
    TrainResult res = train(tc);
    double final_val = res.log.rows.back().val_nll;
    std::fprintf(f, "%s,%.17g,%.17g\n", value.c_str(), res.best_val_nll,
                 final_val);
    std::fflush(f);
    std::printf("%s=%s best_val_nll=%.6f final_val_nll=%.6f\n", key.c_str(),
                value.c_str(), res.best_val_nll, final_val);
    std::fflush(stdout);
  }
  std::fclose(f);
  rc.add_artifact("ablate.csv");
  rc.finish();
}

// ------------------------------------------------------------------- timing

void run_timing(const CLI::App* cmd, const CommonArgs& a) {
  uint64_t seed = 0;
  KvConfig cfg = collect_config(cmd, a, &seed);
  check_config_keys(cfg);
  ModelSpec ms = model_from_config(cfg);
  TimingShapes shapes;
  shapes.input_dim = ms.input_dim;
  shapes.width = ms.width;
  shapes.layers = ms.layers;
  shapes.heads = ms.attention.heads;
  shapes.ffn_dim = ms.ffn_dim;
  shapes.n_context = cfg.get_i64("timing.context", shapes.n_context);
  shapes.n_query = cfg.get_i64("timing.queries", shapes.n_query);
  shapes.warmup = static_cast<int>(cfg.get_i64("timing.warmup", shapes.warmup));
  shapes.steps = static_cast<int>(cfg.get_i64("timing.steps", shapes.steps));
  std::string attentions =
      cfg.get_str("timing.attentions", "va,dva,kernel_rbf,linear_va,linear_dva");
  std::string sizes_str = cfg.get_str("timing.sizes", "");

  KvConfig resolved = resolved_model_config(ms);
  resolved.set("timing.context", fmt_i64(shapes.n_context));
  resolved.set("timing.queries", fmt_i64(shapes.n_query));
  resolved.set("timing.warmup", fmt_i64(shapes.warmup));
  resolved.set("timing.steps", fmt_i64(shapes.steps));
  resolved.set("timing.attentions", attentions);
  resolved.set("timing.sizes", sizes_str);
  RunContext rc = open_run("timing", a, seed, resolved);

  std::vector<AttentionSpec> specs;
  for (const auto& name : split_csv_list(attentions)) {
    AttentionSpec s = ms.attention;
    s.kind = parse_attention(name);
    specs.push_back(s);
  }
  // Wall-clock outputs are inherently run-dependent, so none of these files
  // are registered as reproducible artifacts.
  std::vector<TimingRow> rows = throughput_compare(specs, shapes, seed);
  write_timing_csv(rc.file("timing.csv"), rows);
  for (const auto& r : rows)
    std::printf("%s %.6f s/step\n", r.name.c_str(), r.seconds_per_step);

  if (!sizes_str.empty()) {
    std::vector<int64_t> sizes;
    for (const auto& s : split_csv_list(sizes_str))
      sizes.push_back(parse_i64_strict(s));
    FILE* f = std::fopen(rc.file("timing_context.csv").c_str(), "wb");
    if (!f) throw std::runtime_error("cannot write timing_context.csv");
    std::fprintf(f, "attention,n_context,seconds_per_step\n");
    for (const auto& spec : specs) {
      std::vector<double> per_size = context_cost_sweep(spec, shapes, sizes,
                                                        seed);
      for (size_t i = 0; i < sizes.size(); ++i)
        std::fprintf(f, "%s,%" PRId64 ",%.17g\n",
                     attention_name(spec.kind).c_str(), sizes[i], per_size[i]);
    }
    std::fclose(f);
  }
  rc.finish();
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv) {
  CLI::App app{"prior-fitted network trainer and evaluation toolkit"};
  app.require_subcommand(1);

  CommonArgs gen_prior_args;
  CLI::App* gen_prior = app.add_subcommand(
      "gen-prior", "sample synthetic datasets from a function prior");
  add_common(gen_prior, gen_prior_args);

  CommonArgs gen_pf_args;
  CLI::App* gen_pf = app.add_subcommand(
      "gen-powerflow", "solve load scenarios on a radial feeder into a dataset");
  add_common(gen_pf, gen_pf_args);

  CommonArgs train_args;
  CLI::App* train_cmd =
      app.add_subcommand("train", "train a model on prior-sampled tasks");
  add_common(train_cmd, train_args);

  CommonArgs eval_args;
  std::string eval_checkpoint;
  int64_t eval_context = -1;
  CLI::App* eval_cmd = app.add_subcommand(
      "evaluate", "score a checkpoint on fresh datasets from a prior");
  add_common(eval_cmd, eval_args);
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file");
  eval_cmd->add_option("--context", eval_context, "context points per dataset");

  CommonArgs gp_args;
  CLI::App* gp_cmd = app.add_subcommand(
      "gp-baseline", "score an exact GP with grid-fit hyperparameters");
  add_common(gp_cmd, gp_args);

  CommonArgs loc_args;
  std::string loc_checkpoint;
  int64_t loc_layer = 0, loc_context = -1;
  CLI::App* loc_cmd = app.add_subcommand(
      "diagnose-locality", "attention weight vs distance profile of a checkpoint");
  add_common(loc_cmd, loc_args);
  loc_cmd->add_option("--checkpoint", loc_checkpoint, "checkpoint file");
  loc_cmd->add_option("--layer", loc_layer, "attention layer to profile");
  loc_cmd->add_option("--context", loc_context, "context points per dataset");

  CommonArgs ablate_args;
  std::string ablate_sweep, ablate_values;
  CLI::App* ablate_cmd = app.add_subcommand(
      "ablate", "retrain while sweeping one config key");
  add_common(ablate_cmd, ablate_args);
  ablate_cmd->add_option("--sweep", ablate_sweep,
                         "config key or alias (bucket_size, attention, ...)");
  ablate_cmd->add_option("--values", ablate_values, "comma-separated values");

  CommonArgs timing_args;
  CLI::App* timing_cmd = app.add_subcommand(
      "timing", "median step time per attention rule at fixed shapes");
  add_common(timing_cmd, timing_args);

  gen_prior->callback([&] { run_gen_prior(gen_prior, gen_prior_args); });
  gen_pf->callback([&] { run_gen_powerflow(gen_pf, gen_pf_args); });
  train_cmd->callback([&] { run_train(train_cmd, train_args); });
  eval_cmd->callback(
      [&] { run_evaluate(eval_cmd, eval_args, eval_checkpoint, eval_context); });
  gp_cmd->callback([&] { run_gp_baseline(gp_cmd, gp_args); });
  loc_cmd->callback([&] {
    run_diagnose_locality(loc_cmd, loc_args, loc_checkpoint, loc_layer,
                          loc_context);
  });
  ablate_cmd->callback(
      [&] { run_ablate(ablate_cmd, ablate_args, ablate_sweep, ablate_values); });
  timing_cmd->callback([&] { run_timing(timing_cmd, timing_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace pfn
