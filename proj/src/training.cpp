#include "pfn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "pfn/bardist.hpp"
#include "pfn/error.hpp"
#include "pfn/tape.hpp"

namespace pfn {

namespace {

SyntheticDataset slice_rows(const SyntheticDataset& ds, int64_t a, int64_t b) {
  SyntheticDataset out;
  out.x = Tensor::zeros({b - a, ds.dim()});
  out.y.resize(static_cast<size_t>(b - a));
  for (int64_t i = a; i < b; ++i) {
    for (int64_t c = 0; c < ds.dim(); ++c)
      out.x.at(i - a, c) = ds.x.at(i, c);
    out.y[static_cast<size_t>(i - a)] = ds.y[static_cast<size_t>(i)];
  }
  return out;
}

Tensor column(const std::vector<double>& v) {
  Tensor t = Tensor::zeros({static_cast<int64_t>(v.size()), 1});
  for (size_t i = 0; i < v.size(); ++i) t.at(static_cast<int64_t>(i)) = v[i];
  return t;
}

void check_config(const TrainConfig& cfg) {
  if (cfg.epochs < 1 || cfg.steps_per_epoch < 1 || cfg.batch_size < 1)
    throw ConfigError("train: counts must be positive");
  if (cfg.warmup_epochs < 0 || cfg.warmup_epochs >= cfg.epochs)
    throw ConfigError("train: warmup_epochs must lie in [0, epochs)");
  if (cfg.val_datasets < 1) throw ConfigError("train: val_datasets < 1");
  if (cfg.model.input_dim != cfg.prior.input_dim)
    throw ConfigError("train: model and prior input dims disagree");
  if (cfg.prior.points_per_dataset < 2)
    throw ConfigError("train: prior needs at least 2 points per dataset");
}

}  // namespace

ContextQuery split_context_query(const SyntheticDataset& ds, SeededRng& rng) {
  int64_t n = ds.n();
  if (n < 2) throw ContractError("split_context_query: need at least 2 points");
  int64_t c = rng.uniform_int(1, n - 1);
  return {slice_rows(ds, 0, c), slice_rows(ds, c, n)};
}

void adamw_update(std::map<std::string, Tensor>& params,
                  const std::map<std::string, Tensor>& grads, AdamWState& st,
                  double lr, double weight_decay, double beta1, double beta2,
                  double eps) {
  st.t += 1;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end())
      throw ContractError("adamw_update: missing gradient for " + name);
    const Tensor& g = git->second;
    if (!g.same_shape(p))
      throw DimensionError("adamw_update: gradient shape for " + name);
    Tensor& m = st.m.try_emplace(name, Tensor::zeros(p.shape)).first->second;
    Tensor& v = st.v.try_emplace(name, Tensor::zeros(p.shape)).first->second;
    for (int64_t i = 0; i < p.numel(); ++i) {
      double gi = g.at(i);
      m.at(i) = beta1 * m.at(i) + (1.0 - beta1) * gi;
      v.at(i) = beta2 * v.at(i) + (1.0 - beta2) * gi * gi;
      double mhat = m.at(i) / bc1;
      double vhat = v.at(i) / bc2;
      p.at(i) *= (1.0 - lr * weight_decay);
      p.at(i) -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

double clip_global_norm(std::map<std::string, Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g.data) sq += v * v;
  double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    double s = max_norm / norm;
    for (auto& [name, g] : grads)
      for (double& v : g.data) v *= s;
  }
  return norm;
}

double lr_schedule(int64_t step, const TrainConfig& cfg) {
  if (step < 0) throw ContractError("lr_schedule: negative step");
  int64_t warm = cfg.warmup_epochs * cfg.steps_per_epoch;
  int64_t total = cfg.epochs * cfg.steps_per_epoch;
  if (step < warm)
    return cfg.lr * static_cast<double>(step) / static_cast<double>(warm);
  if (step >= total) return 0.0;
  double u = static_cast<double>(step - warm) / static_cast<double>(total - warm);
  return cfg.lr * 0.5 * (1.0 + std::cos(M_PI * u));
}

StepResult train_step(PFNModel& model, AdamWState& st,
                      const std::vector<ContextQuery>& batch, double lr,
                      const TrainConfig& cfg, uint64_t batch_seed) {
  if (batch.empty()) throw ContractError("train_step: empty batch");
  if (model.buckets.count() != model.spec.bucket_count)
    throw ContractError("train_step: model bucket spec not initialized");

  Tape t;
  std::map<std::string, Var> leaves;
  int64_t total_q = 0;
  for (const auto& cq : batch) total_q += cq.query.n();
  std::vector<double> widths = model.buckets.widths();

  Var loss;
  try {
    for (size_t b = 0; b < batch.size(); ++b) {
      const ContextQuery& cq = batch[b];
      ForwardGraph g = forward_graph(t, model, cq.context.x,
                                     column(cq.context.y), cq.query.x, true,
                                     &leaves);
      std::vector<int> idx;
      idx.reserve(cq.query.y.size());
      for (double y : cq.query.y)
        idx.push_back(static_cast<int>(model.buckets.bucket_of(y)));
      Var nll = t.bar_nll(g.logits, idx, widths);
      Var scaled = t.scale(
          nll, static_cast<double>(cq.query.n()) / static_cast<double>(total_q));
      loss = b == 0 ? scaled : t.add(loss, scaled);
    }
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + ", batch seed " +
                       std::to_string(batch_seed));
  }

  double lval = t.val(loss).at(0);
  if (!std::isfinite(lval))
    throw NumericError("train_step: non-finite loss, batch seed " +
                       std::to_string(batch_seed));
  t.backward(loss);

  std::map<std::string, Tensor> grads;
  for (const auto& [name, var] : leaves) grads.emplace(name, t.grad(var));
  double norm = clip_global_norm(grads, cfg.clip_norm);
  adamw_update(model.params, grads, st, lr, cfg.weight_decay);
  bool clipped = cfg.clip_norm > 0.0 && norm > cfg.clip_norm;
  return {lval, clipped, norm};
}

double validate(const PFNModel& model,
                const std::vector<SyntheticDataset>& suite) {
  if (suite.empty()) throw ContractError("validate: empty suite");
  double total = 0.0;
  int64_t count = 0;
  for (const auto& ds : suite) {
    int64_t c = ds.n() / 2;
    SyntheticDataset ctx = slice_rows(ds, 0, c);
    SyntheticDataset qry = slice_rows(ds, c, ds.n());
    Tensor logits = forward(model, ctx.x, column(ctx.y), qry.x);
    for (int64_t i = 0; i < qry.n(); ++i) {
      BarDistribution bd;
      bd.spec = model.buckets;
      bd.logits.assign(logits.data.begin() + i * logits.cols(),
                       logits.data.begin() + (i + 1) * logits.cols());
      total += bd.nll(qry.y[static_cast<size_t>(i)]);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

std::vector<SyntheticDataset> make_validation_suite(const TrainConfig& cfg) {
  SeededRng stream = SeededRng(cfg.seed).fork(3);
  std::vector<SyntheticDataset> suite;
  suite.reserve(static_cast<size_t>(cfg.val_datasets));
  for (int64_t i = 0; i < cfg.val_datasets; ++i)
    suite.push_back(sample_dataset(cfg.prior, stream.fork(static_cast<uint64_t>(i)).seed));
  return suite;
}

BucketSpec make_bucket_spec(const TrainConfig& cfg) {
  SeededRng stream = SeededRng(cfg.seed).fork(2);
  int64_t needed = 10 * cfg.model.bucket_count;
  std::vector<double> ys;
  uint64_t k = 0;
  while (static_cast<int64_t>(ys.size()) < needed) {
    SyntheticDataset ds = sample_dataset(cfg.prior, stream.fork(k++).seed);
    ys.insert(ys.end(), ds.y.begin(), ds.y.end());
  }
  return build_buckets(ys, cfg.model.bucket_count);
}

double uniform_nll_reference(const BucketSpec& buckets,
                             const std::vector<SyntheticDataset>& suite) {
  double total = 0.0;
  int64_t count = 0;
  double logb = std::log(static_cast<double>(buckets.count()));
  for (const auto& ds : suite) {
    for (int64_t i = ds.n() / 2; i < ds.n(); ++i) {
      int64_t b = buckets.bucket_of(ds.y[static_cast<size_t>(i)]);
      total += logb + std::log(buckets.width(b));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

TrainResult train(const TrainConfig& cfg,
                  const std::function<void(const TrainRow&)>& on_epoch) {
  check_config(cfg);
  SeededRng root(cfg.seed);
  SeededRng init = root.fork(1);
  PFNModel model = build_model(cfg.model, init);
  model.buckets = make_bucket_spec(cfg);
  std::vector<SyntheticDataset> val_suite = make_validation_suite(cfg);
  SeededRng data = root.fork(4);

  AdamWState st;
  TrainResult res;
  res.best_val_nll = std::numeric_limits<double>::infinity();
  int64_t gstep = 0;
  auto t0 = std::chrono::steady_clock::now();

  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    int64_t clipped = 0;
    auto e0 = std::chrono::steady_clock::now();
    for (int64_t s = 0; s < cfg.steps_per_epoch; ++s) {
      double lr_t = lr_schedule(gstep, cfg);
      std::vector<ContextQuery> batch;
      batch.reserve(static_cast<size_t>(cfg.batch_size));
      for (int64_t b = 0; b < cfg.batch_size; ++b) {
        uint64_t idx = static_cast<uint64_t>(gstep * cfg.batch_size + b);
        SeededRng dstream = data.fork(idx);
        SyntheticDataset ds = sample_dataset(cfg.prior, dstream.fork(0).seed);
        SeededRng cut = dstream.fork(1);
        batch.push_back(split_context_query(ds, cut));
      }
      StepResult sr = train_step(model, st, batch, lr_t, cfg,
                                 static_cast<uint64_t>(gstep));
      loss_sum += sr.loss;
      clipped += sr.clipped ? 1 : 0;
      ++gstep;
    }
    auto e1 = std::chrono::steady_clock::now();
    double epoch_secs = std::chrono::duration<double>(e1 - e0).count();
    double vnll = validate(model, val_suite);

    TrainRow row;
    row.step = gstep;
    row.cumulative_points =
        gstep * cfg.batch_size * cfg.prior.points_per_dataset;
    row.train_nll = loss_sum / static_cast<double>(cfg.steps_per_epoch);
    row.val_nll = vnll;
    row.clipped_steps = clipped;
    row.wall_seconds = std::chrono::duration<double>(e1 - t0).count();
    row.throughput =
        epoch_secs > 0.0
            ? static_cast<double>(cfg.steps_per_epoch * cfg.batch_size *
                                  cfg.prior.points_per_dataset) /
                  epoch_secs
            : 0.0;
    res.log.rows.push_back(row);
    if (on_epoch) on_epoch(row);

    if (vnll < res.best_val_nll) {
      res.best_val_nll = vnll;
      res.best_epoch = epoch;
      res.model = model;
    }
  }
  return res;
}

void write_trainlog_csv(const std::string& path, const TrainLog& log) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ParseError("trainlog: cannot open " + path);
  std::fprintf(f, "step,cumulative_train_points,train_nll,val_nll,clipped_steps\n");
  for (const auto& r : log.rows)
    std::fprintf(f, "%lld,%lld,%.17g,%.17g,%lld\n",
                 static_cast<long long>(r.step),
                 static_cast<long long>(r.cumulative_points), r.train_nll,
                 r.val_nll, static_cast<long long>(r.clipped_steps));
  std::fclose(f);
}

void write_trainlog_timing_csv(const std::string& path, const TrainLog& log) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ParseError("trainlog: cannot open " + path);
  std::fprintf(f, "step,wall_seconds,throughput_points_per_sec\n");
  for (const auto& r : log.rows)
    std::fprintf(f, "%lld,%.6f,%.6f\n", static_cast<long long>(r.step),
                 r.wall_seconds, r.throughput);
  std::fclose(f);
}

}  // namespace pfn
