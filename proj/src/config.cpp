#include "pfn/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pfn/error.hpp"

namespace pfn {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt_f64(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

KernelKind parse_kernel_kind(const std::string& s) {
  if (s == "rbf") return KernelKind::RbfFixed;
  if (s == "rbf_sampled") return KernelKind::RbfSampled;
  if (s == "sum_of_two_rbf") return KernelKind::SumOfTwoRbf;
  if (s == "linear_periodic") return KernelKind::LinearPeriodic;
  throw ConfigError("config: unknown kernel kind '" + s + "'");
}

std::string kernel_kind_name(KernelKind k) {
  switch (k) {
    case KernelKind::RbfFixed: return "rbf";
    case KernelKind::RbfSampled: return "rbf_sampled";
    case KernelKind::SumOfTwoRbf: return "sum_of_two_rbf";
    case KernelKind::LinearPeriodic: return "linear_periodic";
  }
  throw ConfigError("config: bad kernel kind");
}

InputNorm parse_input_norm(const std::string& s) {
  if (s == "uniform01") return InputNorm::Uniform01;
  if (s == "zscore") return InputNorm::Zscore;
  throw ConfigError("config: unknown input norm '" + s + "'");
}

std::string input_norm_name(InputNorm n) {
  return n == InputNorm::Uniform01 ? "uniform01" : "zscore";
}

}  // namespace

bool KvConfig::has(const std::string& key) const {
  return values.count(key) > 0;
}

void KvConfig::set(const std::string& key, const std::string& value) {
  values[key] = value;
}

std::string KvConfig::get_str(const std::string& key,
                              const std::string& fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

double KvConfig::get_f64(const std::string& key, double fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size())
      throw ConfigError("config: trailing garbage in " + key);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + it->second + "' is not a number for " +
                      key);
  }
}

int64_t KvConfig::get_i64(const std::string& key, int64_t fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    size_t used = 0;
    int64_t v = std::stoll(it->second, &used);
    if (used != it->second.size())
      throw ConfigError("config: trailing garbage in " + key);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + it->second + "' is not an integer for " +
                      key);
  }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: '" + v + "' is not a boolean for " + key);
}

KvConfig parse_config_text(const std::string& text) {
  KvConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config: missing '=' at line " +
                       std::to_string(line_no));
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ParseError("config: empty key at line " + std::to_string(line_no));
    cfg.set(key, value);
  }
  return cfg;
}

KvConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw ParseError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_override(KvConfig& cfg, const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("config: override must look like key=value, got '" +
                      assignment + "'");
  cfg.set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string serialize_config(const KvConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : cfg.values) out += k + " = " + v + "\n";
  return out;
}

PriorConfig prior_from_config(const KvConfig& cfg) {
  PriorConfig p;
  p.input_dim = cfg.get_i64("prior.input_dim", p.input_dim);
  p.points_per_dataset = cfg.get_i64("prior.points", p.points_per_dataset);
  p.kernel.kind = parse_kernel_kind(
      cfg.get_str("prior.kernel", kernel_kind_name(p.kernel.kind)));
  p.kernel.signal_variance =
      cfg.get_f64("prior.signal_variance", p.kernel.signal_variance);
  p.kernel.lengthscale = cfg.get_f64("prior.lengthscale", p.kernel.lengthscale);
  p.kernel.lengthscale_lo =
      cfg.get_f64("prior.lengthscale_lo", p.kernel.lengthscale_lo);
  p.kernel.lengthscale_hi =
      cfg.get_f64("prior.lengthscale_hi", p.kernel.lengthscale_hi);
  p.kernel.lengthscale2 =
      cfg.get_f64("prior.lengthscale2", p.kernel.lengthscale2);
  p.kernel.lengthscale2_lo =
      cfg.get_f64("prior.lengthscale2_lo", p.kernel.lengthscale2_lo);
  p.kernel.lengthscale2_hi =
      cfg.get_f64("prior.lengthscale2_hi", p.kernel.lengthscale2_hi);
  p.kernel.period = cfg.get_f64("prior.period", p.kernel.period);
  p.kernel.slope = cfg.get_f64("prior.slope", p.kernel.slope);
  p.kernel.offset = cfg.get_f64("prior.offset", p.kernel.offset);
  p.kernel.periodic_lengthscale =
      cfg.get_f64("prior.periodic_lengthscale", p.kernel.periodic_lengthscale);
  p.noise_variance = cfg.get_f64("prior.noise_variance", p.noise_variance);
  p.shift = cfg.get_f64("prior.shift", p.shift);
  p.shift_lo = cfg.get_f64("prior.shift_lo", p.shift_lo);
  p.shift_hi = cfg.get_f64("prior.shift_hi", p.shift_hi);
  p.input_norm =
      parse_input_norm(cfg.get_str("prior.input_norm", input_norm_name(p.input_norm)));
  return p;
}

ModelSpec model_from_config(const KvConfig& cfg) {
  ModelSpec m;
  m.backbone = parse_backbone(
      cfg.get_str("model.backbone", backbone_name(m.backbone)));
  m.input_dim = cfg.get_i64("model.input_dim", m.input_dim);
  m.width = cfg.get_i64("model.width", m.width);
  m.layers = cfg.get_i64("model.layers", m.layers);
  m.ffn_dim = cfg.get_i64("model.ffn_dim", m.ffn_dim);
  m.kernel_size = cfg.get_i64("model.kernel_size", m.kernel_size);
  m.attention.kind = parse_attention(
      cfg.get_str("model.attention", attention_name(m.attention.kind)));
  m.attention.heads = cfg.get_i64("model.heads", m.attention.heads);
  m.attention.tie_qk = cfg.get_bool("model.tie_qk", m.attention.tie_qk);
  m.attention.gamma_init =
      cfg.get_f64("model.gamma_init", m.attention.gamma_init);
  m.phi_x = parse_encoder(cfg.get_str("model.phi_x", encoder_name(m.phi_x)));
  m.phi_y = parse_encoder(cfg.get_str("model.phi_y", encoder_name(m.phi_y)));
  m.head = parse_head(cfg.get_str("model.head", head_name(m.head)));
  m.bucket_count = cfg.get_i64("model.buckets", m.bucket_count);
  return m;
}

TrainConfig train_from_config(const KvConfig& cfg) {
  TrainConfig t;
  t.epochs = cfg.get_i64("train.epochs", t.epochs);
  t.steps_per_epoch = cfg.get_i64("train.steps_per_epoch", t.steps_per_epoch);
  t.batch_size = cfg.get_i64("train.batch_size", t.batch_size);
  t.lr = cfg.get_f64("train.lr", t.lr);
  t.warmup_epochs = cfg.get_i64("train.warmup_epochs", t.warmup_epochs);
  t.weight_decay = cfg.get_f64("train.weight_decay", t.weight_decay);
  t.clip_norm = cfg.get_f64("train.clip_norm", t.clip_norm);
  t.val_datasets = cfg.get_i64("train.val_datasets", t.val_datasets);
  t.prior = prior_from_config(cfg);
  t.model = model_from_config(cfg);
  return t;
}

KvConfig resolved_prior_config(const PriorConfig& p) {
  KvConfig cfg;
  cfg.set("prior.input_dim", std::to_string(p.input_dim));
  cfg.set("prior.points", std::to_string(p.points_per_dataset));
  cfg.set("prior.kernel", kernel_kind_name(p.kernel.kind));
  cfg.set("prior.signal_variance", fmt_f64(p.kernel.signal_variance));
  cfg.set("prior.lengthscale", fmt_f64(p.kernel.lengthscale));
  cfg.set("prior.lengthscale_lo", fmt_f64(p.kernel.lengthscale_lo));
  cfg.set("prior.lengthscale_hi", fmt_f64(p.kernel.lengthscale_hi));
  cfg.set("prior.lengthscale2", fmt_f64(p.kernel.lengthscale2));
  cfg.set("prior.lengthscale2_lo", fmt_f64(p.kernel.lengthscale2_lo));
  cfg.set("prior.lengthscale2_hi", fmt_f64(p.kernel.lengthscale2_hi));
  cfg.set("prior.period", fmt_f64(p.kernel.period));
  cfg.set("prior.slope", fmt_f64(p.kernel.slope));
  cfg.set("prior.offset", fmt_f64(p.kernel.offset));
  cfg.set("prior.periodic_lengthscale", fmt_f64(p.kernel.periodic_lengthscale));
  cfg.set("prior.noise_variance", fmt_f64(p.noise_variance));
  cfg.set("prior.shift", fmt_f64(p.shift));
  cfg.set("prior.shift_lo", fmt_f64(p.shift_lo));
  cfg.set("prior.shift_hi", fmt_f64(p.shift_hi));
  cfg.set("prior.input_norm", input_norm_name(p.input_norm));
  return cfg;
}

KvConfig resolved_model_config(const ModelSpec& m) {
  KvConfig cfg;
  cfg.set("model.backbone", backbone_name(m.backbone));
  cfg.set("model.input_dim", std::to_string(m.input_dim));
  cfg.set("model.width", std::to_string(m.width));
  cfg.set("model.layers", std::to_string(m.layers));
  cfg.set("model.ffn_dim", std::to_string(m.ffn_dim));
  cfg.set("model.kernel_size", std::to_string(m.kernel_size));
  cfg.set("model.attention", attention_name(m.attention.kind));
  cfg.set("model.heads", std::to_string(m.attention.heads));
  cfg.set("model.tie_qk", m.attention.tie_qk ? "true" : "false");
  cfg.set("model.gamma_init", fmt_f64(m.attention.gamma_init));
  cfg.set("model.phi_x", encoder_name(m.phi_x));
  cfg.set("model.phi_y", encoder_name(m.phi_y));
  cfg.set("model.head", head_name(m.head));
  cfg.set("model.buckets", std::to_string(m.bucket_count));
  return cfg;
}

KvConfig resolved_train_config(const TrainConfig& t) {
  KvConfig cfg = resolved_prior_config(t.prior);
  for (const auto& [k, v] : resolved_model_config(t.model).values)
    cfg.set(k, v);
  cfg.set("train.epochs", std::to_string(t.epochs));
  cfg.set("train.steps_per_epoch", std::to_string(t.steps_per_epoch));
  cfg.set("train.batch_size", std::to_string(t.batch_size));
  cfg.set("train.lr", fmt_f64(t.lr));
  cfg.set("train.warmup_epochs", std::to_string(t.warmup_epochs));
  cfg.set("train.weight_decay", fmt_f64(t.weight_decay));
  cfg.set("train.clip_norm", fmt_f64(t.clip_norm));
  cfg.set("train.val_datasets", std::to_string(t.val_datasets));
  return cfg;
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = [] {
    TrainConfig t;
    std::vector<std::string> k;
    for (const auto& [key, value] : resolved_train_config(t).values)
      k.push_back(key);
    for (const char* extra :
         {"pf.network", "pf.buses", "pf.delta_pct", "pf.samples",
          "pf.target_bus", "eval.context", "eval.suite_datasets",
          "eval.filter", "eval.k", "eval.gamma", "eval.layer",
          "eval.epsilon", "eval.checkpoint", "eval.ard", "gen.datasets",
          "ablate.sweep", "ablate.values", "timing.attentions",
          "timing.context", "timing.queries", "timing.warmup",
          "timing.steps", "timing.sizes"})
      k.push_back(extra);
    std::sort(k.begin(), k.end());
    return k;
  }();
  return keys;
}

void check_config_keys(const KvConfig& cfg) {
  const auto& known = known_config_keys();
  for (const auto& [key, value] : cfg.values)
    if (!std::binary_search(known.begin(), known.end(), key))
      throw ConfigError("config: unknown key '" + key + "'");
}

}  // namespace pfn
