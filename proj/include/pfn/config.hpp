#pragma once
#include <map>
#include <string>
#include <vector>

#include "pfn/training.hpp"

namespace pfn {

// Flat key=value store with dotted section prefixes ("prior.lengthscale").
// Later assignments win, matching the CLI's --set override order.
struct KvConfig {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);
  std::string get_str(const std::string& key, const std::string& fallback) const;
  double get_f64(const std::string& key, double fallback) const;
  int64_t get_i64(const std::string& key, int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
};

// `key = value` lines, # comments, duplicates last-wins.
KvConfig parse_config_text(const std::string& text);
KvConfig load_config_file(const std::string& path);

// "key=value" as given on the command line.
void apply_override(KvConfig& cfg, const std::string& assignment);

// Canonical form: sorted keys, one `key = value` per line, so equal configs
// serialize to equal bytes.
std::string serialize_config(const KvConfig& cfg);

// prior.* / model.* / train.* readers; unknown keys are the caller's concern
// (see known_config_keys).
PriorConfig prior_from_config(const KvConfig& cfg);
ModelSpec model_from_config(const KvConfig& cfg);
TrainConfig train_from_config(const KvConfig& cfg);

// Fully resolved snapshots: every field written back under its canonical key,
// so train_from_config(resolved_train_config(t)) reproduces t.
KvConfig resolved_prior_config(const PriorConfig& prior);
KvConfig resolved_model_config(const ModelSpec& model);
KvConfig resolved_train_config(const TrainConfig& train);

// Every key the readers above understand.
const std::vector<std::string>& known_config_keys();

// ConfigError on any key absent from known_config_keys. One config file can
// serve several subcommands; each reads only its own sections, so foreign
// sections are tolerated and typos are still caught.
void check_config_keys(const KvConfig& cfg);

}  // namespace pfn
