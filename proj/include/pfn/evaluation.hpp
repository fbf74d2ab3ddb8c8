#pragma once
#include <optional>
#include <string>
#include <vector>

#include "pfn/attention.hpp"
#include "pfn/backbones.hpp"
#include "pfn/gp.hpp"
#include "pfn/priors.hpp"

namespace pfn {

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
  double max_err = 0.0;
  int64_t n_test = 0;
  double wall_seconds = 0.0;  // prediction time only
};

struct Prediction {
  std::vector<double> mean;
  std::vector<double> sd;
};

// Uniform face over bar-distribution models and GP baselines so metrics,
// sweeps, coverage and filters run one code path for both.
struct Predictor {
  virtual ~Predictor() = default;
  virtual std::string name() const = 0;
  virtual Prediction predict(const Tensor& ctx_x,
                             const std::vector<double>& ctx_y,
                             const Tensor& query_x) = 0;
};

struct PfnPredictor final : Predictor {
  const PFNModel* model;
  explicit PfnPredictor(const PFNModel& m) : model(&m) {}
  std::string name() const override;
  Prediction predict(const Tensor& ctx_x, const std::vector<double>& ctx_y,
                     const Tensor& query_x) override;
};

// Refits hyperparameters on every context unless `fixed` is set; `ard` turns
// on per-dimension lengthscale sweeps during the refit.
struct GpPredictor final : Predictor {
  std::optional<GPHyper> fixed;
  bool ard = false;
  std::string name() const override;
  Prediction predict(const Tensor& ctx_x, const std::vector<double>& ctx_y,
                     const Tensor& query_x) override;
};

// Context = first n_context rows of each dataset, test = the rest; metrics
// pool every test point across the suite.
Metrics evaluate(Predictor& p, const std::vector<SyntheticDataset>& suite,
                 int64_t n_context);

// One Metrics per size on the same suite; sizes must ascend.
std::vector<Metrics> sweep_context(Predictor& p,
                                   const std::vector<SyntheticDataset>& suite,
                                   const std::vector<int64_t>& sizes);

struct CoverageReport {
  double within_tenth_sd = 0.0;
  double within_one_sd = 0.0;
  double within_two_sd = 0.0;
};

// Fraction of test targets inside mean +- {0.1, 1, 2} predictive sd.
// n_context < 0 splits each dataset at the midpoint.
CoverageReport coverage(Predictor& p,
                        const std::vector<SyntheticDataset>& suite,
                        int64_t n_context = -1);

enum class FilterKind { Knn, Exponential };

struct PostHocFilter {
  FilterKind kind = FilterKind::Knn;
  int64_t k = 1;       // knn
  double gamma = 1.0;  // exponential decay rate
};

// Shrinks the context per query point before prediction. knn keeps the k
// nearest by euclidean distance (ties to the lower index); exponential keeps
// points whose decay factor exp(-gamma*dist) exceeds the median factor, and
// falls back to the single nearest point when that leaves nothing. Survivors
// keep their original order, so k = n_context is the bitwise identity.
SyntheticDataset apply_posthoc_filter(const SyntheticDataset& context,
                                      const Tensor& x_star,
                                      const PostHocFilter& filter);

// evaluate() with the filter applied per query point.
Metrics evaluate_filtered(Predictor& p,
                          const std::vector<SyntheticDataset>& suite,
                          int64_t n_context, const PostHocFilter& filter);

// sum_i 100*(x[i+1] - x[i]^2)^2 + (1 - x[i])^2
double rosenbrock(const std::vector<double>& x);

// n samples of the 5-d Rosenbrock: raw draws uniform in [-1,1]^5, stored
// inputs mapped to the unit cube, targets z-scored over the dataset.
SyntheticDataset generate_rosenbrock_dataset(int64_t n, uint64_t seed);

struct TimingShapes {
  int64_t input_dim = 5;
  int64_t width = 64;
  int64_t layers = 1;
  int64_t heads = 4;
  int64_t ffn_dim = 256;
  int64_t n_context = 128;
  int64_t n_query = 32;
  int warmup = 5;
  int steps = 21;
};

struct TimingRow {
  std::string name;
  double seconds_per_step;
};

// Median wall time of a forward+backward step at fixed shapes, one row per
// attention rule.
std::vector<TimingRow> throughput_compare(
    const std::vector<AttentionSpec>& specs, const TimingShapes& shapes,
    uint64_t seed);

// Median step time per context size, for cost-scaling fits.
std::vector<double> context_cost_sweep(const AttentionSpec& spec,
                                       const TimingShapes& shapes,
                                       const std::vector<int64_t>& sizes,
                                       uint64_t seed);

struct MetricsRow {
  std::string model;
  int64_t n_context = 0;
  Metrics metrics;
};

// CSV exports with fixed column orders and %.17g doubles. Metrics split
// into a deterministic file and a wall-clock twin so reruns of the same
// config reproduce the deterministic file bitwise.
void write_metrics_csv(const std::string& path,
                       const std::vector<MetricsRow>& rows);
void write_metrics_timing_csv(const std::string& path,
                              const std::vector<MetricsRow>& rows);
void write_coverage_csv(
    const std::string& path,
    const std::vector<std::pair<std::string, CoverageReport>>& rows);
void write_timing_csv(const std::string& path,
                      const std::vector<TimingRow>& rows);
void write_locality_csv(const std::string& path,
                        const LocalityProfile& profile);

}  // namespace pfn
