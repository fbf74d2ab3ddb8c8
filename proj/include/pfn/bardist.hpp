#pragma once
#include <vector>

#include "pfn/tensor.hpp"

namespace pfn {

// Bucket edges are strictly increasing; bucket b covers [edges[b], edges[b+1]).
// Targets outside the support are clamped into the first or last bucket.
struct BucketSpec {
  std::vector<double> edges;

  int64_t count() const { return static_cast<int64_t>(edges.size()) - 1; }
  double width(int64_t b) const { return edges[b + 1] - edges[b]; }
  double midpoint(int64_t b) const { return 0.5 * (edges[b] + edges[b + 1]); }
  double support_lo() const { return edges.front(); }
  double support_hi() const { return edges.back(); }
  int64_t bucket_of(double y) const;
  std::vector<double> widths() const;
};

// Edges at the empirical quantiles i/count of the samples. Requires at least
// 10*count samples; ties are broken by nudging edges up 1e-9.
BucketSpec build_buckets(const std::vector<double>& samples, int64_t count);

// One predictive distribution: softmax(logits) over the buckets, interpreted
// as a piecewise-constant density (probability / width).
struct BarDistribution {
  BucketSpec spec;
  std::vector<double> logits;

  std::vector<double> probs() const;
  double nll(double y) const;  // -log density at y, clamped into the support
  double mean() const;
  double variance() const;     // includes the within-bucket uniform term
  double quantile(double q) const;  // 0 < q < 1
  double cdf(double y) const;
};

}  // namespace pfn
