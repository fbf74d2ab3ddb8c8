#include "pfn/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "pfn/bardist.hpp"
#include "pfn/error.hpp"
#include "pfn/tape.hpp"

namespace pfn {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Tensor column(const std::vector<double>& v) {
  Tensor t = Tensor::zeros({static_cast<int64_t>(v.size()), 1});
  for (size_t i = 0; i < v.size(); ++i)
    t.at(static_cast<int64_t>(i), 0) = v[i];
  return t;
}

Tensor rows_of(const Tensor& x, int64_t lo, int64_t hi) {
  Tensor out = Tensor::zeros({hi - lo, x.cols()});
  for (int64_t i = lo; i < hi; ++i)
    for (int64_t c = 0; c < x.cols(); ++c) out.at(i - lo, c) = x.at(i, c);
  return out;
}

double euclid(const Tensor& a, int64_t i, const Tensor& b, int64_t j) {
  double q = 0.0;
  for (int64_t c = 0; c < a.cols(); ++c) {
    double d = a.at(i, c) - b.at(j, c);
    q += d * d;
  }
  return std::sqrt(q);
}

void check_split(const std::vector<SyntheticDataset>& suite,
                 int64_t n_context) {
  if (suite.empty()) throw ContractError("evaluate: empty test suite");
  if (n_context < 1) throw ContractError("evaluate: n_context must be >= 1");
  for (const auto& ds : suite)
    if (ds.n() < n_context + 1)
      throw ContractError("evaluate: dataset with " + std::to_string(ds.n()) +
                          " points cannot provide context " +
                          std::to_string(n_context) + " plus a test point");
}

}  // namespace

std::string PfnPredictor::name() const {
  return backbone_name(model->spec.backbone) + "+" +
         attention_name(model->spec.attention.kind);
}

Prediction PfnPredictor::predict(const Tensor& ctx_x,
                                 const std::vector<double>& ctx_y,
                                 const Tensor& query_x) {
  if (model->buckets.count() != model->spec.bucket_count)
    throw ContractError("predict: model bucket spec not initialized");
  Tensor logits = forward(*model, ctx_x, column(ctx_y), query_x);
  Prediction out;
  int64_t m = logits.rows(), b = logits.cols();
  out.mean.reserve(static_cast<size_t>(m));
  out.sd.reserve(static_cast<size_t>(m));
  BarDistribution bd;
  bd.spec = model->buckets;
  for (int64_t i = 0; i < m; ++i) {
    bd.logits.assign(logits.data.begin() + i * b,
                     logits.data.begin() + (i + 1) * b);
    out.mean.push_back(bd.mean());
    out.sd.push_back(std::sqrt(bd.variance()));
  }
  return out;
}

std::string GpPredictor::name() const { return ard ? "gp_ard" : "gp"; }

Prediction GpPredictor::predict(const Tensor& ctx_x,
                                const std::vector<double>& ctx_y,
                                const Tensor& query_x) {
  // The regression core assumes a zero prior mean, so shifted targets are
  // centered on the context mean and the offset restored afterwards.
  double offset = 0.0;
  for (double y : ctx_y) offset += y;
  offset /= static_cast<double>(ctx_y.size());
  std::vector<double> centered(ctx_y);
  for (double& y : centered) y -= offset;

  GPHyper hyper;
  if (fixed.has_value()) {
    hyper = *fixed;
  } else if (ard) {
    hyper = gp_fit_ard(ctx_x, centered, {0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2},
                       {1e-6, 1e-4, 1e-2});
  } else {
    hyper = gp_fit(ctx_x, centered, default_gp_grid(centered));
  }
  GPPosterior post = gp_predict(hyper, ctx_x, centered, query_x);
  Prediction out;
  out.mean = post.mean;
  for (double& m : out.mean) m += offset;
  out.sd.reserve(post.variance.size());
  for (double v : post.variance) out.sd.push_back(std::sqrt(v));
  return out;
}

Metrics evaluate(Predictor& p, const std::vector<SyntheticDataset>& suite,
                 int64_t n_context) {
  check_split(suite, n_context);
  Metrics m;
  double se = 0.0, ae = 0.0;
  for (const auto& ds : suite) {
    Tensor ctx_x = rows_of(ds.x, 0, n_context);
    std::vector<double> ctx_y(ds.y.begin(), ds.y.begin() + n_context);
    Tensor query_x = rows_of(ds.x, n_context, ds.n());

    auto t0 = Clock::now();
    Prediction pred = p.predict(ctx_x, ctx_y, query_x);
    m.wall_seconds += seconds_since(t0);

    int64_t n_test = ds.n() - n_context;
    if (pred.mean.size() != static_cast<size_t>(n_test))
      throw ContractError("evaluate: predictor returned wrong count");
    for (int64_t i = 0; i < n_test; ++i) {
      double err = pred.mean[static_cast<size_t>(i)] -
                   ds.y[static_cast<size_t>(n_context + i)];
      se += err * err;
      ae += std::abs(err);
      m.max_err = std::max(m.max_err, std::abs(err));
      ++m.n_test;
    }
  }
  m.mse = se / static_cast<double>(m.n_test);
  m.mae = ae / static_cast<double>(m.n_test);
  return m;
}

std::vector<Metrics> sweep_context(Predictor& p,
                                   const std::vector<SyntheticDataset>& suite,
                                   const std::vector<int64_t>& sizes) {
  if (sizes.empty()) throw ContractError("sweep_context: no sizes");
  for (size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] <= sizes[i - 1])
      throw ContractError("sweep_context: sizes must ascend");
  std::vector<Metrics> out;
  out.reserve(sizes.size());
  for (int64_t s : sizes) out.push_back(evaluate(p, suite, s));
  return out;
}

CoverageReport coverage(Predictor& p,
                        const std::vector<SyntheticDataset>& suite,
                        int64_t n_context) {
  if (suite.empty()) throw ContractError("coverage: empty test suite");
  int64_t hits_tenth = 0, hits_one = 0, hits_two = 0, total = 0;
  for (const auto& ds : suite) {
    int64_t c = n_context < 0 ? ds.n() / 2 : n_context;
    if (c < 1 || ds.n() < c + 1)
      throw ContractError("coverage: dataset too small for the context size");
    Tensor ctx_x = rows_of(ds.x, 0, c);
    std::vector<double> ctx_y(ds.y.begin(), ds.y.begin() + c);
    Tensor query_x = rows_of(ds.x, c, ds.n());
    Prediction pred = p.predict(ctx_x, ctx_y, query_x);
    for (int64_t i = 0; i < ds.n() - c; ++i) {
      double dev = std::abs(ds.y[static_cast<size_t>(c + i)] -
                            pred.mean[static_cast<size_t>(i)]);
      double sd = pred.sd[static_cast<size_t>(i)];
      if (dev <= 0.1 * sd) ++hits_tenth;
      if (dev <= 1.0 * sd) ++hits_one;
      if (dev <= 2.0 * sd) ++hits_two;
      ++total;
    }
  }
  CoverageReport rep;
  rep.within_tenth_sd = static_cast<double>(hits_tenth) / total;
  rep.within_one_sd = static_cast<double>(hits_one) / total;
  rep.within_two_sd = static_cast<double>(hits_two) / total;
  return rep;
}

SyntheticDataset apply_posthoc_filter(const SyntheticDataset& context,
                                      const Tensor& x_star,
                                      const PostHocFilter& filter) {
  int64_t n = context.n();
  if (n < 1) throw ContractError("posthoc filter: empty context");
  if (x_star.numel() != context.dim())
    throw DimensionError("posthoc filter: query dim disagrees with context");

  std::vector<double> dist(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    double q = 0.0;
    for (int64_t c = 0; c < context.dim(); ++c) {
      double d = context.x.at(i, c) - x_star.at(c);
      q += d * d;
    }
    dist[static_cast<size_t>(i)] = std::sqrt(q);
  }

  std::vector<int64_t> keep;
  if (filter.kind == FilterKind::Knn) {
    if (filter.k < 1 || filter.k > n)
      throw ContractError("posthoc filter: k must be in [1, n_context]");
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
      return dist[static_cast<size_t>(a)] < dist[static_cast<size_t>(b)];
    });
    keep.assign(order.begin(), order.begin() + filter.k);
    std::sort(keep.begin(), keep.end());
  } else {
    if (!(filter.gamma > 0.0))
      throw ContractError("posthoc filter: gamma must be positive");
    std::vector<double> factor(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i)
      factor[static_cast<size_t>(i)] =
          std::exp(-filter.gamma * dist[static_cast<size_t>(i)]);
    std::vector<double> sorted = factor;
    std::sort(sorted.begin(), sorted.end());
    double median =
        n % 2 == 1
            ? sorted[static_cast<size_t>(n / 2)]
            : 0.5 * (sorted[static_cast<size_t>(n / 2 - 1)] +
                     sorted[static_cast<size_t>(n / 2)]);
    for (int64_t i = 0; i < n; ++i)
      if (factor[static_cast<size_t>(i)] > median) keep.push_back(i);
    if (keep.empty()) {
      int64_t best = 0;
      for (int64_t i = 1; i < n; ++i)
        if (dist[static_cast<size_t>(i)] < dist[static_cast<size_t>(best)])
          best = i;
      keep.push_back(best);
    }
  }

  SyntheticDataset out;
  out.x = Tensor::zeros({static_cast<int64_t>(keep.size()), context.dim()});
  out.y.reserve(keep.size());
  for (size_t r = 0; r < keep.size(); ++r) {
    for (int64_t c = 0; c < context.dim(); ++c)
      out.x.at(static_cast<int64_t>(r), c) = context.x.at(keep[r], c);
    out.y.push_back(context.y[static_cast<size_t>(keep[r])]);
  }
  return out;
}

Metrics evaluate_filtered(Predictor& p,
                          const std::vector<SyntheticDataset>& suite,
                          int64_t n_context, const PostHocFilter& filter) {
  check_split(suite, n_context);
  Metrics m;
  double se = 0.0, ae = 0.0;
  for (const auto& ds : suite) {
    SyntheticDataset ctx;
    ctx.x = rows_of(ds.x, 0, n_context);
    ctx.y.assign(ds.y.begin(), ds.y.begin() + n_context);
    for (int64_t i = n_context; i < ds.n(); ++i) {
      Tensor q = rows_of(ds.x, i, i + 1);
      SyntheticDataset local = apply_posthoc_filter(ctx, q, filter);
      auto t0 = Clock::now();
      Prediction pred = p.predict(local.x, local.y, q);
      m.wall_seconds += seconds_since(t0);
      double err = pred.mean[0] - ds.y[static_cast<size_t>(i)];
      se += err * err;
      ae += std::abs(err);
      m.max_err = std::max(m.max_err, std::abs(err));
      ++m.n_test;
    }
  }
  m.mse = se / static_cast<double>(m.n_test);
  m.mae = ae / static_cast<double>(m.n_test);
  return m;
}

double rosenbrock(const std::vector<double>& x) {
  if (x.size() < 2)
    throw ContractError("rosenbrock: needs at least two coordinates");
  double sum = 0.0;
  for (size_t i = 0; i + 1 < x.size(); ++i) {
    double a = x[i + 1] - x[i] * x[i];
    double b = 1.0 - x[i];
    sum += 100.0 * (a * a) + b * b;
  }
  return sum;
}

SyntheticDataset generate_rosenbrock_dataset(int64_t n, uint64_t seed) {
  if (n < 2) throw ContractError("rosenbrock dataset: need at least 2 samples");
  const int64_t d = 5;
  SyntheticDataset ds;
  ds.x = Tensor::zeros({n, d});
  ds.y.reserve(static_cast<size_t>(n));
  SeededRng rng(seed);
  std::vector<double> raw(static_cast<size_t>(d));
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t c = 0; c < d; ++c) {
      raw[static_cast<size_t>(c)] = rng.uniform(-1.0, 1.0);
      ds.x.at(i, c) = 0.5 * (raw[static_cast<size_t>(c)] + 1.0);
    }
    ds.y.push_back(rosenbrock(raw));
  }
  double mean = std::accumulate(ds.y.begin(), ds.y.end(), 0.0) /
                static_cast<double>(n);
  double var = 0.0;
  for (double v : ds.y) var += (v - mean) * (v - mean);
  double sd = std::sqrt(var / static_cast<double>(n));
  if (sd < 1e-12) sd = 1.0;
  for (double& v : ds.y) v = (v - mean) / sd;
  return ds;
}

namespace {

// One forward+backward step over a synthetic batch; the loss is the plain
// sum of the query logits so the cost profile is the attention rule's own.
double median_step_seconds(const PFNModel& model, const Tensor& ctx_x,
                           const Tensor& ctx_y, const Tensor& query_x,
                           int warmup, int steps) {
  std::vector<double> times;
  times.reserve(static_cast<size_t>(steps));
  for (int s = 0; s < warmup + steps; ++s) {
    auto t0 = Clock::now();
    Tape t;
    ForwardGraph g = forward_graph(t, model, ctx_x, ctx_y, query_x, true);
    Var loss = t.sum_all(g.logits);
    t.backward(loss);
    double dt = seconds_since(t0);
    if (s >= warmup) times.push_back(dt);
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

PFNModel timing_model(const AttentionSpec& att, const TimingShapes& sh,
                      uint64_t seed) {
  ModelSpec spec;
  spec.backbone = BackboneKind::Transformer;
  spec.input_dim = sh.input_dim;
  spec.width = sh.width;
  spec.layers = sh.layers;
  spec.ffn_dim = sh.ffn_dim;
  spec.attention = att;
  spec.attention.heads = sh.heads;
  spec.bucket_count = 10;
  SeededRng rng(seed);
  return build_model(spec, rng);
}

}  // namespace

std::vector<TimingRow> throughput_compare(
    const std::vector<AttentionSpec>& specs, const TimingShapes& shapes,
    uint64_t seed) {
  if (specs.empty()) throw ContractError("throughput_compare: no specs");
  if (shapes.steps < 20)
    throw ContractError("throughput_compare: need at least 20 timed steps");
  SeededRng data(seed);
  Tensor ctx_x = Tensor::zeros({shapes.n_context, shapes.input_dim});
  for (int64_t i = 0; i < ctx_x.numel(); ++i) ctx_x.at(i) = data.uniform();
  Tensor ctx_y = Tensor::zeros({shapes.n_context, 1});
  for (int64_t i = 0; i < ctx_y.numel(); ++i) ctx_y.at(i) = data.normal();
  Tensor query_x = Tensor::zeros({shapes.n_query, shapes.input_dim});
  for (int64_t i = 0; i < query_x.numel(); ++i) query_x.at(i) = data.uniform();

  std::vector<TimingRow> out;
  for (const AttentionSpec& att : specs) {
    PFNModel model = timing_model(att, shapes, seed + 1);
    double sec = median_step_seconds(model, ctx_x, ctx_y, query_x,
                                     shapes.warmup, shapes.steps);
    out.push_back({attention_name(att.kind), sec});
  }
  return out;
}

std::vector<double> context_cost_sweep(const AttentionSpec& spec,
                                       const TimingShapes& shapes,
                                       const std::vector<int64_t>& sizes,
                                       uint64_t seed) {
  if (sizes.empty()) throw ContractError("context_cost_sweep: no sizes");
  PFNModel model = timing_model(spec, shapes, seed + 1);
  SeededRng data(seed);
  std::vector<double> out;
  for (int64_t n : sizes) {
    Tensor ctx_x = Tensor::zeros({n, shapes.input_dim});
    for (int64_t i = 0; i < ctx_x.numel(); ++i) ctx_x.at(i) = data.uniform();
    Tensor ctx_y = Tensor::zeros({n, 1});
    for (int64_t i = 0; i < ctx_y.numel(); ++i) ctx_y.at(i) = data.normal();
    Tensor query_x = Tensor::zeros({shapes.n_query, shapes.input_dim});
    for (int64_t i = 0; i < query_x.numel(); ++i)
      query_x.at(i) = data.uniform();
    out.push_back(median_step_seconds(model, ctx_x, ctx_y, query_x,
                                      shapes.warmup, shapes.steps));
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out.good()) throw ParseError("csv: cannot write " + path);
  return out;
}

}  // namespace

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricsRow>& rows) {
  std::ofstream out = open_csv(path);
  out << "model,n_context,mse,mae,max_err,n_test\n";
  for (const auto& r : rows)
    out << r.model << "," << r.n_context << "," << fmt(r.metrics.mse) << ","
        << fmt(r.metrics.mae) << "," << fmt(r.metrics.max_err) << ","
        << r.metrics.n_test << "\n";
}

void write_metrics_timing_csv(const std::string& path,
                              const std::vector<MetricsRow>& rows) {
  std::ofstream out = open_csv(path);
  out << "model,n_context,wall_seconds\n";
  for (const auto& r : rows)
    out << r.model << "," << r.n_context << "," << fmt(r.metrics.wall_seconds)
        << "\n";
}

void write_coverage_csv(
    const std::string& path,
    const std::vector<std::pair<std::string, CoverageReport>>& rows) {
  std::ofstream out = open_csv(path);
  out << "model,within_0.1sd,within_1sd,within_2sd\n";
  for (const auto& [name, rep] : rows)
    out << name << "," << fmt(rep.within_tenth_sd) << ","
        << fmt(rep.within_one_sd) << "," << fmt(rep.within_two_sd) << "\n";
}

void write_timing_csv(const std::string& path,
                      const std::vector<TimingRow>& rows) {
  std::ofstream out = open_csv(path);
  out << "attention,seconds_per_step\n";
  for (const auto& r : rows)
    out << r.name << "," << fmt(r.seconds_per_step) << "\n";
}

void write_locality_csv(const std::string& path,
                        const LocalityProfile& profile) {
  std::ofstream out = open_csv(path);
  out << "layer,head,distance,weight\n";
  for (const auto& e : profile.entries)
    out << e.layer << "," << e.head << "," << fmt(e.distance) << ","
        << fmt(e.weight) << "\n";
}

}  // namespace pfn
