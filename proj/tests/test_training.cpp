#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pfn/bardist.hpp"
#include "pfn/error.hpp"
#include "pfn/training.hpp"

using namespace pfn;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.steps_per_epoch = 3;
  cfg.batch_size = 2;
  cfg.lr = 1e-3;
  cfg.warmup_epochs = 1;
  cfg.seed = 42;
  cfg.val_datasets = 4;
  cfg.prior.input_dim = 1;
  cfg.prior.points_per_dataset = 12;
  cfg.prior.kernel.lengthscale = 0.6;
  cfg.prior.kernel.signal_variance = 0.01;
  cfg.prior.noise_variance = 1e-4;
  cfg.prior.shift = 1.0;
  cfg.model.backbone = BackboneKind::Transformer;
  cfg.model.input_dim = 1;
  cfg.model.width = 8;
  cfg.model.layers = 1;
  cfg.model.ffn_dim = 16;
  cfg.model.attention.kind = AttentionKind::DVA;
  cfg.model.attention.heads = 2;
  cfg.model.bucket_count = 10;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("context/query split is a uniform prefix partition") {
  SeededRng r(1);
  TrainConfig cfg = tiny_config();
  SyntheticDataset ds = sample_dataset(cfg.prior, 7);

  SUBCASE("two points always split one and one") {
    SyntheticDataset two;
    two.x = Tensor::matrix(2, 1, {0.1, 0.9});
    two.y = {1.0, 2.0};
    for (int rep = 0; rep < 20; ++rep) {
      ContextQuery cq = split_context_query(two, r);
      CHECK(cq.context.n() == 1);
      CHECK(cq.query.n() == 1);
    }
  }

  SUBCASE("partition reassembles the dataset") {
    ContextQuery cq = split_context_query(ds, r);
    CHECK(cq.context.n() + cq.query.n() == ds.n());
    for (int64_t i = 0; i < cq.context.n(); ++i) {
      CHECK(cq.context.x.at(i, 0) == ds.x.at(i, 0));
      CHECK(cq.context.y[static_cast<size_t>(i)] == ds.y[static_cast<size_t>(i)]);
    }
    for (int64_t i = 0; i < cq.query.n(); ++i) {
      int64_t j = cq.context.n() + i;
      CHECK(cq.query.x.at(i, 0) == ds.x.at(j, 0));
      CHECK(cq.query.y[static_cast<size_t>(i)] == ds.y[static_cast<size_t>(j)]);
    }
  }

  SUBCASE("mean cutoff over many draws is n/2") {
    SyntheticDataset big;
    big.x = Tensor::zeros({100, 1});
    big.y.assign(100, 0.0);
    double sum = 0.0;
    const int reps = 10000;
    for (int i = 0; i < reps; ++i)
      sum += static_cast<double>(split_context_query(big, r).context.n());
    CHECK(sum / reps == doctest::Approx(50.0).epsilon(0.04));
  }

  SUBCASE("singleton dataset rejected") {
    SyntheticDataset one;
    one.x = Tensor::zeros({1, 1});
    one.y = {0.0};
    CHECK_THROWS_AS(split_context_query(one, r), ContractError);
  }
}

TEST_CASE("learning-rate schedule: linear warmup then cosine to zero") {
  TrainConfig cfg = tiny_config();
  cfg.epochs = 10;
  cfg.steps_per_epoch = 10;
  cfg.warmup_epochs = 2;
  cfg.lr = 4e-3;
  CHECK(lr_schedule(0, cfg) == 0.0);
  CHECK(lr_schedule(10, cfg) == doctest::Approx(cfg.lr * 0.5));
  CHECK(lr_schedule(20, cfg) == doctest::Approx(cfg.lr));
  CHECK(lr_schedule(60, cfg) == doctest::Approx(cfg.lr / 2).epsilon(1e-12));
  CHECK(lr_schedule(100, cfg) == 0.0);
  CHECK(lr_schedule(1000, cfg) == 0.0);
  CHECK(lr_schedule(99, cfg) > 0.0);
  CHECK_THROWS_AS(lr_schedule(-1, cfg), ContractError);

  cfg.warmup_epochs = 0;  // no ramp: cosine from the start
  CHECK(lr_schedule(0, cfg) == doctest::Approx(cfg.lr));
}

TEST_CASE("optimizer drives a convex quadratic to its minimum") {
  std::map<std::string, Tensor> params;
  params.emplace("w", Tensor::scalar(0.0));
  AdamWState st;
  for (int i = 0; i < 2000; ++i) {
    std::map<std::string, Tensor> grads;
    grads.emplace("w", Tensor::scalar(2.0 * (params.at("w").at(0) - 3.0)));
    adamw_update(params, grads, st, 1e-2, 0.0);
  }
  CHECK(std::abs(params.at("w").at(0) - 3.0) < 1e-3);
  CHECK(st.t == 2000);
  CHECK(st.m.at("w").same_shape(params.at("w")));
  CHECK(st.v.at("w").same_shape(params.at("w")));
}

TEST_CASE("decoupled decay: zero gradient scales weights by 1 - lr*decay") {
  std::map<std::string, Tensor> params;
  Tensor w = Tensor::matrix(2, 2, {1.0, -2.0, 0.5, 4.0});
  params.emplace("w", w);
  std::map<std::string, Tensor> zeros;
  zeros.emplace("w", Tensor::zeros({2, 2}));

  SUBCASE("with decay") {
    AdamWState st;
    adamw_update(params, zeros, st, 0.01, 0.1);
    for (int64_t i = 0; i < 4; ++i)
      CHECK(params.at("w").at(i) == w.at(i) * (1.0 - 0.01 * 0.1));
  }
  SUBCASE("without decay, bitwise unchanged") {
    AdamWState st;
    adamw_update(params, zeros, st, 0.01, 0.0);
    for (int64_t i = 0; i < 4; ++i) CHECK(params.at("w").at(i) == w.at(i));
  }
  SUBCASE("zero lr leaves weights bitwise unchanged") {
    AdamWState st;
    std::map<std::string, Tensor> grads;
    grads.emplace("w", Tensor::matrix(2, 2, {0.3, -0.7, 0.1, 0.9}));
    adamw_update(params, grads, st, 0.0, 0.1);
    for (int64_t i = 0; i < 4; ++i) CHECK(params.at("w").at(i) == w.at(i));
  }
}

TEST_CASE("global-norm clipping") {
  std::map<std::string, Tensor> grads;
  grads.emplace("a", Tensor::matrix(1, 1, {3.0}));
  grads.emplace("b", Tensor::matrix(1, 1, {4.0}));
  double norm = clip_global_norm(grads, 1.0);
  CHECK(norm == doctest::Approx(5.0));
  CHECK(grads.at("a").at(0) == doctest::Approx(0.6));
  CHECK(grads.at("b").at(0) == doctest::Approx(0.8));

  std::map<std::string, Tensor> small;
  small.emplace("a", Tensor::matrix(1, 1, {0.3}));
  CHECK(clip_global_norm(small, 1.0) == doctest::Approx(0.3));
  CHECK(small.at("a").at(0) == 0.3);

  std::map<std::string, Tensor> off;
  off.emplace("a", Tensor::matrix(1, 1, {30.0}));
  CHECK(clip_global_norm(off, 0.0) == doctest::Approx(30.0));
  CHECK(off.at("a").at(0) == 30.0);  // non-positive max disables clipping
}

TEST_CASE("train_step updates parameters and aborts on non-finite loss") {
  TrainConfig cfg = tiny_config();
  SeededRng init(3);
  PFNModel model = build_model(cfg.model, init);
  model.buckets = make_bucket_spec(cfg);

  SeededRng r(5);
  std::vector<ContextQuery> batch;
  for (uint64_t i = 0; i < 2; ++i)
    batch.push_back(split_context_query(sample_dataset(cfg.prior, 100 + i), r));

  Tensor before = model.params.at("head.w");
  AdamWState st;
  StepResult sr = train_step(model, st, batch, 1e-3, cfg, 17);
  CHECK(std::isfinite(sr.loss));
  CHECK(sr.grad_norm > 0.0);
  bool moved = false;
  for (int64_t i = 0; i < before.numel(); ++i)
    moved = moved || model.params.at("head.w").at(i) != before.at(i);
  CHECK(moved);

  SUBCASE("poisoned parameters raise a numeric error naming the batch seed") {
    model.params.at("head.w").at(0) = std::nan("");
    try {
      train_step(model, st, batch, 1e-3, cfg, 91);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("91") != std::string::npos);
    }
  }
  SUBCASE("empty batch rejected") {
    CHECK_THROWS_AS(train_step(model, st, {}, 1e-3, cfg, 0), ContractError);
  }
  SUBCASE("missing bucket spec rejected") {
    PFNModel bare = model;
    bare.buckets.edges.clear();
    CHECK_THROWS_AS(train_step(bare, st, batch, 1e-3, cfg, 0), ContractError);
  }
}

TEST_CASE("validation is deterministic and untrained sits near uniform") {
  TrainConfig cfg = tiny_config();
  cfg.prior.points_per_dataset = 20;
  cfg.val_datasets = 8;
  SeededRng init(4);
  PFNModel model = build_model(cfg.model, init);
  model.buckets = make_bucket_spec(cfg);
  auto suite = make_validation_suite(cfg);
  REQUIRE(suite.size() == 8);

  double a = validate(model, suite);
  double b = validate(model, suite);
  CHECK(a == b);

  double uniform = uniform_nll_reference(model.buckets, suite);
  CHECK(std::abs(a - uniform) < 0.5);
}

TEST_CASE("training run: determinism, best checkpoint, log invariants") {
  TrainConfig cfg = tiny_config();
  TrainResult r1 = train(cfg);
  TrainResult r2 = train(cfg);

  REQUIRE(r1.log.rows.size() == 2);
  for (size_t i = 0; i < r1.log.rows.size(); ++i) {
    const TrainRow &a = r1.log.rows[i], &b = r2.log.rows[i];
    CHECK(a.step == b.step);
    CHECK(a.cumulative_points == b.cumulative_points);
    CHECK(a.train_nll == b.train_nll);
    CHECK(a.val_nll == b.val_nll);
    CHECK(a.clipped_steps == b.clipped_steps);
  }
  CHECK(r1.log.rows[0].cumulative_points ==
        3 * cfg.batch_size * cfg.prior.points_per_dataset);
  CHECK(r1.log.rows[1].step == 6);

  double min_val = r1.log.rows[0].val_nll;
  for (const auto& row : r1.log.rows) min_val = std::min(min_val, row.val_nll);
  CHECK(r1.best_val_nll == min_val);
  CHECK(r1.best_val_nll <= r1.log.rows.back().val_nll);

  auto suite = make_validation_suite(cfg);
  CHECK(validate(r1.model, suite) == doctest::Approx(r1.best_val_nll));

  SUBCASE("log CSV bytes are reproducible, timing kept separate") {
    write_trainlog_csv("log_a.csv", r1.log);
    write_trainlog_csv("log_b.csv", r2.log);
    CHECK(slurp("log_a.csv") == slurp("log_b.csv"));
    std::string head = slurp("log_a.csv").substr(0, 60);
    CHECK(head.find("wall") == std::string::npos);

    write_trainlog_timing_csv("log_t.csv", r1.log);
    std::string timing = slurp("log_t.csv");
    CHECK(timing.find("wall_seconds") != std::string::npos);
    std::remove("log_a.csv");
    std::remove("log_b.csv");
    std::remove("log_t.csv");
  }
}

TEST_CASE("a short run reduces validation loss from the random start") {
  TrainConfig cfg = tiny_config();
  cfg.epochs = 6;
  cfg.steps_per_epoch = 30;
  cfg.batch_size = 2;
  cfg.lr = 3e-3;
  cfg.warmup_epochs = 1;
  cfg.prior.points_per_dataset = 16;
  cfg.val_datasets = 8;
  cfg.seed = 11;
  TrainResult res = train(cfg);
  CHECK(res.log.rows.back().val_nll < res.log.rows.front().val_nll);
  for (const auto& row : res.log.rows) {
    CHECK(std::isfinite(row.train_nll));
    CHECK(row.throughput > 0.0);
    CHECK(row.wall_seconds > 0.0);
  }
}

TEST_CASE("train configuration validation") {
  TrainConfig cfg = tiny_config();
  cfg.warmup_epochs = cfg.epochs;
  CHECK_THROWS_AS(train(cfg), ConfigError);

  cfg = tiny_config();
  cfg.model.input_dim = 2;
  CHECK_THROWS_AS(train(cfg), ConfigError);

  cfg = tiny_config();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(cfg), ConfigError);

  cfg = tiny_config();
  cfg.prior.points_per_dataset = 1;
  CHECK_THROWS_AS(train(cfg), ConfigError);
}

TEST_CASE("bucket spec construction from the prior stream") {
  TrainConfig cfg = tiny_config();
  BucketSpec b1 = make_bucket_spec(cfg);
  BucketSpec b2 = make_bucket_spec(cfg);
  CHECK(b1.count() == cfg.model.bucket_count);
  CHECK(b1.edges == b2.edges);
  for (size_t i = 1; i < b1.edges.size(); ++i)
    CHECK(b1.edges[i] > b1.edges[i - 1]);
}
