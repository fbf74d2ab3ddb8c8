#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pfn/bardist.hpp"
#include "pfn/error.hpp"
#include "pfn/rng.hpp"

using namespace pfn;

namespace {
BucketSpec unit_buckets(int64_t count) {
  BucketSpec s;
  for (int64_t i = 0; i <= count; ++i)
    s.edges.push_back(static_cast<double>(i) / static_cast<double>(count));
  return s;
}
}  // namespace

TEST_CASE("build_buckets on uniform samples recovers even quantile edges") {
  SeededRng r(1);
  std::vector<double> samples;
  for (int i = 0; i < 100000; ++i) samples.push_back(r.uniform());
  BucketSpec spec = build_buckets(samples, 4);
  REQUIRE(spec.count() == 4);
  CHECK(spec.edges[0] == doctest::Approx(0.0).epsilon(1e-3));
  CHECK(spec.edges[1] == doctest::Approx(0.25).epsilon(0.02));
  CHECK(spec.edges[2] == doctest::Approx(0.50).epsilon(0.02));
  CHECK(spec.edges[3] == doctest::Approx(0.75).epsilon(0.02));
  CHECK(spec.edges[4] == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("build_buckets enforces sample budget and strict edges") {
  std::vector<double> few(39, 0.5);
  CHECK_THROWS_AS(build_buckets(few, 4), ConfigError);
  CHECK_THROWS_AS(build_buckets(few, 1), ConfigError);
  // heavy ties: edges still strictly increasing
  std::vector<double> ties(1000, 1.0);
  for (int i = 0; i < 100; ++i) ties.push_back(2.0);
  BucketSpec spec = build_buckets(ties, 8);
  for (size_t i = 1; i < spec.edges.size(); ++i)
    CHECK(spec.edges[i] > spec.edges[i - 1]);
}

TEST_CASE("probabilities sum to one and densities integrate to one") {
  SeededRng r(2);
  BarDistribution d;
  d.spec = unit_buckets(16);
  for (int i = 0; i < 16; ++i) d.logits.push_back(r.uniform(-3.0, 3.0));
  auto p = d.probs();
  double sp = 0.0, integral = 0.0;
  for (int64_t b = 0; b < 16; ++b) {
    sp += p[b];
    double density = p[b] / d.spec.width(b);
    integral += density * d.spec.width(b);
    CHECK(d.spec.width(b) > 0.0);
  }
  CHECK(std::abs(sp - 1.0) < 1e-12);
  CHECK(std::abs(integral - 1.0) < 1e-12);
}

TEST_CASE("uniform logits over unit support give zero nll") {
  BarDistribution d;
  d.spec = unit_buckets(4);
  d.logits.assign(4, 0.7);
  CHECK(d.nll(0.3) == doctest::Approx(0.0).epsilon(1e-12));
  // all mass on the true bucket of width 1/4: nll -> -log 4
  BarDistribution peaked;
  peaked.spec = unit_buckets(4);
  peaked.logits = {0.0, 0.0, 40.0, 0.0};
  CHECK(peaked.nll(0.6) == doctest::Approx(-std::log(4.0)).epsilon(1e-9));
}

TEST_CASE("logit shift invariance") {
  SeededRng r(3);
  BarDistribution a;
  a.spec = unit_buckets(12);
  for (int i = 0; i < 12; ++i) a.logits.push_back(r.uniform(-2.0, 2.0));
  BarDistribution b = a;
  for (double& v : b.logits) v += 57.0;
  CHECK(std::abs(a.nll(0.37) - b.nll(0.37)) < 1e-12);
  CHECK(std::abs(a.mean() - b.mean()) < 1e-12);
  CHECK(std::abs(a.quantile(0.9) - b.quantile(0.9)) < 1e-12);
}

TEST_CASE("targets outside the support clamp to edge buckets") {
  BucketSpec s = unit_buckets(5);
  CHECK(s.bucket_of(-3.0) == 0);
  CHECK(s.bucket_of(42.0) == 4);
  CHECK(s.bucket_of(0.0) == 0);
  CHECK(s.bucket_of(0.999) == 4);
  BarDistribution d;
  d.spec = s;
  d.logits.assign(5, 0.0);
  CHECK(std::isfinite(d.nll(-3.0)));
  CHECK(d.nll(-3.0) == doctest::Approx(d.nll(0.1)).epsilon(1e-12));
}

TEST_CASE("mean and variance of symmetric distribution") {
  BarDistribution d;
  d.spec = unit_buckets(10);
  d.logits.assign(10, 0.0);
  CHECK(d.mean() == doctest::Approx(0.5).epsilon(1e-12));
  // uniform on [0,1]: variance 1/12 regardless of bucketing
  CHECK(d.variance() == doctest::Approx(1.0 / 12.0).epsilon(1e-9));
}

TEST_CASE("quantiles invert the cdf and stay monotone") {
  SeededRng r(4);
  BarDistribution d;
  d.spec = unit_buckets(20);
  for (int i = 0; i < 20; ++i) d.logits.push_back(r.uniform(-1.5, 1.5));
  double prev = -1.0;
  for (double q = 0.05; q < 0.999; q += 0.05) {
    double x = d.quantile(q);
    CHECK(x >= prev);
    prev = x;
    CHECK(d.cdf(x) == doctest::Approx(q).epsilon(1e-9));
  }
  CHECK(d.quantile(0.5) == doctest::Approx(0.5).epsilon(0.2));
  CHECK_THROWS_AS(d.quantile(0.0), ContractError);
  CHECK_THROWS_AS(d.quantile(1.0), ContractError);
}

TEST_CASE("gaussian bar distribution is calibrated at the 68% band") {
  // logits proportional to the log bucket mass of N(0.5, 0.01) on [0,1]
  BucketSpec s = unit_buckets(100);
  BarDistribution d;
  d.spec = s;
  const double mu = 0.5, sd = 0.1;
  for (int64_t b = 0; b < 100; ++b) {
    double mid = s.midpoint(b);
    d.logits.push_back(-0.5 * (mid - mu) * (mid - mu) / (sd * sd));
  }
  double sigma = std::sqrt(d.variance());
  CHECK(sigma == doctest::Approx(sd).epsilon(0.02));
  SeededRng r(5);
  int inside = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    double y = mu + sd * r.normal();
    if (std::abs(y - d.mean()) <= sigma) ++inside;
  }
  double frac = 100.0 * inside / n;
  CHECK(frac > 63.0);
  CHECK(frac < 73.0);
}
