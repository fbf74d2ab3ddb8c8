#include "pfn/bardist.hpp"

#include <algorithm>
#include <cmath>

#include "pfn/error.hpp"

namespace pfn {

int64_t BucketSpec::bucket_of(double y) const {
  int64_t b = static_cast<int64_t>(
                  std::upper_bound(edges.begin(), edges.end(), y) - edges.begin()) -
              1;
  if (b < 0) return 0;
  if (b >= count()) return count() - 1;
  return b;
}

std::vector<double> BucketSpec::widths() const {
  std::vector<double> w(static_cast<size_t>(count()));
  for (int64_t b = 0; b < count(); ++b) w[static_cast<size_t>(b)] = width(b);
  return w;
}

BucketSpec build_buckets(const std::vector<double>& samples, int64_t count) {
  if (count < 2) throw ConfigError("build_buckets: count < 2");
  if (static_cast<int64_t>(samples.size()) < 10 * count)
    throw ConfigError("build_buckets: need at least 10*count samples");
  for (double v : samples)
    if (!std::isfinite(v)) throw NumericError("build_buckets: non-finite sample");
  std::vector<double> s = samples;
  std::sort(s.begin(), s.end());
  int64_t m = static_cast<int64_t>(s.size());
  BucketSpec spec;
  spec.edges.resize(static_cast<size_t>(count) + 1);
  for (int64_t i = 0; i <= count; ++i) {
    double pos = static_cast<double>(i) / static_cast<double>(count) *
                 static_cast<double>(m - 1);
    int64_t lo = static_cast<int64_t>(std::floor(pos));
    int64_t hi = std::min(lo + 1, m - 1);
    double frac = pos - static_cast<double>(lo);
    spec.edges[static_cast<size_t>(i)] =
        s[static_cast<size_t>(lo)] * (1.0 - frac) + s[static_cast<size_t>(hi)] * frac;
  }
  for (size_t i = 1; i < spec.edges.size(); ++i)
    if (spec.edges[i] <= spec.edges[i - 1])
      spec.edges[i] = spec.edges[i - 1] + 1e-9;
  return spec;
}

std::vector<double> BarDistribution::probs() const {
  if (static_cast<int64_t>(logits.size()) != spec.count())
    throw DimensionError("bar distribution: logits/bucket count mismatch");
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

double BarDistribution::nll(double y) const {
  int64_t b = spec.bucket_of(y);
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  double logp = logits[static_cast<size_t>(b)] - mx - std::log(z);
  return -(logp - std::log(spec.width(b)));
}

double BarDistribution::mean() const {
  std::vector<double> p = probs();
  double m = 0.0;
  for (int64_t b = 0; b < spec.count(); ++b)
    m += p[static_cast<size_t>(b)] * spec.midpoint(b);
  return m;
}

double BarDistribution::variance() const {
  std::vector<double> p = probs();
  double m = mean();
  double e2 = 0.0;
  for (int64_t b = 0; b < spec.count(); ++b) {
    double mid = spec.midpoint(b), w = spec.width(b);
    e2 += p[static_cast<size_t>(b)] * (mid * mid + w * w / 12.0);
  }
  return e2 - m * m;
}

double BarDistribution::quantile(double q) const {
  if (!(q > 0.0 && q < 1.0))
    throw ContractError("bar distribution: quantile needs 0 < q < 1");
  std::vector<double> p = probs();
  double cum = 0.0;
  for (int64_t b = 0; b < spec.count(); ++b) {
    double pb = p[static_cast<size_t>(b)];
    if (cum + pb >= q || b == spec.count() - 1)
      return spec.edges[static_cast<size_t>(b)] +
             (pb > 0.0 ? (q - cum) / pb * spec.width(b) : 0.0);
    cum += pb;
  }
  return spec.support_hi();
}

double BarDistribution::cdf(double y) const {
  if (y <= spec.support_lo()) return 0.0;
  if (y >= spec.support_hi()) return 1.0;
  std::vector<double> p = probs();
  int64_t b = spec.bucket_of(y);
  double cum = 0.0;
  for (int64_t i = 0; i < b; ++i) cum += p[static_cast<size_t>(i)];
  return cum + p[static_cast<size_t>(b)] *
                   (y - spec.edges[static_cast<size_t>(b)]) / spec.width(b);
}

}  // namespace pfn
