#pragma once
#include <string>
#include <vector>

#include "pfn/rng.hpp"
#include "pfn/tensor.hpp"

namespace pfn {

enum class KernelKind { RbfFixed, RbfSampled, SumOfTwoRbf, LinearPeriodic };

struct KernelSpec {
  KernelKind kind = KernelKind::RbfFixed;
  double signal_variance = 0.01;
  double lengthscale = 0.6;
  // RbfSampled / SumOfTwoRbf draw per-dataset lengthscales from these ranges.
  double lengthscale_lo = 0.0, lengthscale_hi = 0.0;
  double lengthscale2 = 0.0;
  double lengthscale2_lo = 0.0, lengthscale2_hi = 0.0;
  // LinearPeriodic (1-d inputs only)
  double period = 0.2;
  double slope = 1.0;
  double offset = 0.1;
  double periodic_lengthscale = 0.5;
};

enum class InputNorm { Uniform01, Zscore };

struct PriorConfig {
  int64_t input_dim = 1;
  int64_t points_per_dataset = 100;
  KernelSpec kernel;
  double noise_variance = 1e-4;
  double shift = 1.0;
  // When shift_hi > shift_lo the shift is drawn per dataset from [lo, hi].
  double shift_lo = 0.0, shift_hi = 0.0;
  InputNorm input_norm = InputNorm::Uniform01;
};

struct SyntheticDataset {
  Tensor x;               // [n x d]
  std::vector<double> y;  // n
  int64_t n() const { return x.rows(); }
  int64_t dim() const { return x.cols(); }
};

// Draws concrete lengthscales for the sampled kernel kinds.
KernelSpec resolve_kernel(const KernelSpec& spec, SeededRng& rng);

// Cross-covariance between row sets; spec must already be resolved.
Tensor kernel_matrix(const Tensor& a, const Tensor& b, const KernelSpec& spec);

// Dataset k of a prior is sample_dataset(cfg, fork of base seed); the result
// is a pure function of (cfg, seed).
SyntheticDataset sample_dataset(const PriorConfig& cfg, uint64_t seed);

enum class RobustnessKind { Smooth, Wiggly, Mixed, All };
RobustnessKind robustness_kind_from_string(const std::string& s);
PriorConfig robustness_prior(RobustnessKind kind);
SyntheticDataset sample_robustness_prior(RobustnessKind kind, uint64_t seed);

PriorConfig linear_periodic_prior();
SyntheticDataset sample_linear_periodic_dataset(uint64_t seed);

// In-place z-score over columns; constant columns keep zero after centering.
void standardize_columns(Tensor& x);

void write_dataset_csv(const std::string& path, const SyntheticDataset& ds);
SyntheticDataset load_dataset_csv(const std::string& path);

}  // namespace pfn
