#pragma once
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pfn/backbones.hpp"
#include "pfn/priors.hpp"
#include "pfn/rng.hpp"

namespace pfn {

struct TrainConfig {
  int64_t epochs = 100;
  int64_t steps_per_epoch = 500;
  int64_t batch_size = 16;
  double lr = 1e-3;
  int64_t warmup_epochs = 25;
  double weight_decay = 0.0;
  double clip_norm = 1.0;  // global gradient norm; <= 0 disables
  uint64_t seed = 0;
  int64_t val_datasets = 64;
  PriorConfig prior;
  ModelSpec model;
};

// Prefix cutoff drawn uniformly from {1, ..., N-1}; the points are i.i.d. so
// a prefix split is an unbiased context/query partition.
struct ContextQuery {
  SyntheticDataset context, query;
};
ContextQuery split_context_query(const SyntheticDataset& ds, SeededRng& rng);

// Decoupled-decay adaptive-moment update: weights are first scaled by
// (1 - lr*decay), then moved by the bias-corrected moment ratio.
struct AdamWState {
  std::map<std::string, Tensor> m, v;
  int64_t t = 0;
};
void adamw_update(std::map<std::string, Tensor>& params,
                  const std::map<std::string, Tensor>& grads, AdamWState& st,
                  double lr, double weight_decay, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);

// Scales grads in place to max_norm when the global norm exceeds it.
// Returns the pre-clip norm.
double clip_global_norm(std::map<std::string, Tensor>& grads, double max_norm);

// Linear ramp 0 -> lr over the warmup steps, then cosine decay to 0.
double lr_schedule(int64_t step, const TrainConfig& cfg);

struct StepResult {
  double loss;
  bool clipped;
  double grad_norm;
};
// One batched update: pooled mean NLL over every query point in the batch,
// backward, clip, optimizer step. Throws NumericError naming batch_seed when
// the loss is not finite.
StepResult train_step(PFNModel& model, AdamWState& st,
                      const std::vector<ContextQuery>& batch, double lr,
                      const TrainConfig& cfg, uint64_t batch_seed);

// Mean NLL over all query points of the suite at a fixed cutoff n/2.
double validate(const PFNModel& model, const std::vector<SyntheticDataset>& suite);

struct TrainRow {
  int64_t step = 0;              // global step count at epoch end
  int64_t cumulative_points = 0; // step * batch * points_per_dataset
  double train_nll = 0.0;        // epoch mean
  double val_nll = 0.0;
  int64_t clipped_steps = 0;     // steps in the epoch that hit the clip
  double wall_seconds = 0.0;     // cumulative, excluded from determinism
  double throughput = 0.0;       // points/sec this epoch, excluded as well
};
struct TrainLog {
  std::vector<TrainRow> rows;
};

// Deterministic columns; bytes are a pure function of (cfg, seed).
void write_trainlog_csv(const std::string& path, const TrainLog& log);
// Volatile wall-clock columns, kept out of manifest hashing.
void write_trainlog_timing_csv(const std::string& path, const TrainLog& log);

struct TrainResult {
  PFNModel model;  // best validation checkpoint
  TrainLog log;
  int64_t best_epoch = 0;
  double best_val_nll = 0.0;
};
TrainResult train(const TrainConfig& cfg,
                  const std::function<void(const TrainRow&)>& on_epoch = {});

// Fixed validation suite for a config (reserved seed stream, cutoff n/2).
std::vector<SyntheticDataset> make_validation_suite(const TrainConfig& cfg);

// Bucket edges from fresh prior draws (reserved seed stream).
BucketSpec make_bucket_spec(const TrainConfig& cfg);

// Mean NLL the suite would score under a flat probability vector, the
// baseline an untrained or unlearnable head hovers near.
double uniform_nll_reference(const BucketSpec& buckets,
                             const std::vector<SyntheticDataset>& suite);

}  // namespace pfn
