#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "synermix/errors.hpp"
#include "synermix/gradcheck.hpp"
#include "synermix/loss.hpp"
#include "synermix/trainer.hpp"

using namespace synermix;
using synermix::testing::random_matrix;
using synermix::testing::random_model;

namespace {

DataBundle blobs(double sigma, std::size_t per_class = 300) {
  DataSource src;
  src.format = DataFormat::synthetic;
  src.blobs.sigma = sigma;
  src.blobs.per_class = per_class;
  src.test_per_class = 100;
  return load_bundle(src);
}

TrainSettings quick(Variant v, double beta, std::size_t epochs = 3) {
  TrainSettings s;
  s.mix.variant = v;
  s.mix.beta = beta;
  s.optim.epochs = epochs;
  s.hidden = {16, 8};
  s.augment.noise_sigma = 0.1;
  s.seed = 4;
  return s;
}

void require_same_run(const ExperimentResult& a, const ExperimentResult& b) {
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].loss_inter == b.records[i].loss_inter);
    CHECK(a.records[i].loss_total == b.records[i].loss_total);
    CHECK(a.records[i].test_acc == b.records[i].test_acc);
  }
  for (std::size_t l = 0; l < a.model.depth(); ++l) {
    CHECK(a.model.layer(l).weight == b.model.layer(l).weight);
    CHECK(a.model.layer(l).bias == b.model.layer(l).bias);
  }
}

}  // namespace

TEST_CASE("objective gradients match finite differences for every variant") {
  RngStream rng(9);
  const Dataset data(random_matrix(12, 4, rng), synermix::testing::cyclic_labels(12, 3), 3);
  std::vector<std::size_t> rows(12);
  for (std::size_t i = 0; i < 12; ++i) rows[i] = i;
  AugmentPolicy pol;
  pol.noise_sigma = 0.2;
  RngStream sup(1), aug(2);
  const DualBatch batch = build_dual_batch(data, rows, sup, aug, pol);

  for (Variant v : kAllVariants) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      MlpModel model = random_model(4, {6, 5}, 3, seed);
      MixSpec spec;
      spec.variant = v;
      spec.beta = 0.3;
      spec.p_interp = 2;
      if (v == Variant::W_ER_MM || v == Variant::W_RA_ER_MM) spec.eligible_layers = {0, 1, 2};
      const RngStream intra0(seed, 50), inter0(seed, 51);
      auto objective = [&](const MlpModel& m) {
        RngStream a = intra0, b = inter0;
        return compute_objective(m, batch, spec, a, b, nullptr).total;
      };
      Gradients g = Gradients::zeros_like(model);
      RngStream a = intra0, b = inter0;
      const double loss = compute_objective(model, batch, spec, a, b, &g).total;
      CHECK(loss == doctest::Approx(objective(model)).epsilon(1e-14));
      const GradCheckResult r = check_gradients(model, objective, g);
      CAPTURE(variant_name(v));
      CAPTURE(r.worst);
      CHECK(r.max_rel_error < 1e-5);
    }
  }
}

TEST_CASE("loss breakdown composes with beta") {
  RngStream rng(10);
  const Dataset data(random_matrix(9, 3, rng), synermix::testing::cyclic_labels(9, 3), 3);
  std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5, 6, 7, 8};
  RngStream sup(1), aug(2);
  const DualBatch batch = build_dual_batch(data, rows, sup, aug, AugmentPolicy{});
  const MlpModel m = random_model(3, {4}, 3, 2);
  MixSpec spec;
  spec.variant = Variant::W_RA_ER_M;
  spec.beta = 0.25;
  RngStream a(1), b(2);
  const LossBreakdown l = compute_objective(m, batch, spec, a, b, nullptr);
  REQUIRE(l.intra.has_value());
  CHECK(l.total == doctest::Approx(0.25 * *l.intra + 0.75 * l.other).epsilon(1e-12));

  spec.variant = Variant::W_ER_M;
  RngStream c(1), d(2);
  CHECK_FALSE(compute_objective(m, batch, spec, c, d, nullptr).intra.has_value());
}

TEST_CASE("one SGD step on two samples matches a hand computation") {
  // No hidden layers: the model is softmax regression.
  RngStream rng(3);
  MlpModel m = MlpModel::make(2, {}, 2, rng);
  const MlpModel before = m;
  const Tensor x = Tensor::from_rows({{1.0, -2.0}, {0.5, 0.25}});
  DualBatch batch;
  batch.originals = x;
  batch.augmented = x;
  batch.labels = {0, 1};
  batch.indices = {0, 1};

  OptimConfig oc;
  oc.weight_decay = 0.01;
  SgdMomentum opt(m, oc);
  MixSpec spec;
  spec.variant = Variant::WO_RA_ER;
  TrainStreams streams(1);
  const double lr = 0.2;
  const LossBreakdown l = train_step(m, batch, spec, opt, lr, streams);

  const DenseLayer& w = before.layer(0);
  double expect_loss = 0.0;
  double gw[2][2] = {{0, 0}, {0, 0}}, gb[2] = {0, 0};
  for (int i = 0; i < 2; ++i) {
    double z[2];
    for (int o = 0; o < 2; ++o) z[o] = w.bias[o] + w.weight(o, 0) * x(i, 0) + w.weight(o, 1) * x(i, 1);
    const double denom = std::exp(z[0]) + std::exp(z[1]);
    for (int o = 0; o < 2; ++o) {
      const double p = std::exp(z[o]) / denom;
      const double d = (p - (o == i ? 1.0 : 0.0)) / 2.0;
      gb[o] += d;
      gw[o][0] += d * x(i, 0);
      gw[o][1] += d * x(i, 1);
    }
    expect_loss -= std::log(std::exp(z[i]) / denom) / 2.0;
  }
  CHECK(l.total == doctest::Approx(expect_loss).epsilon(1e-12));
  for (int o = 0; o < 2; ++o) {
    CHECK(m.layer(0).bias[o] == doctest::Approx(w.bias[o] - lr * (gb[o] + 0.01 * w.bias[o])));
    for (int k = 0; k < 2; ++k) {
      CHECK(m.layer(0).weight(o, k) ==
            doctest::Approx(w.weight(o, k) - lr * (gw[o][k] + 0.01 * w.weight(o, k))));
    }
  }
}

TEST_CASE("degenerate settings reduce to simpler variants bit for bit") {
  const DataBundle b = blobs(1.0, 60);
  SUBCASE("beta = 0 drops the intra branch") {
    require_same_run(run_experiment(b.train, nullptr, b.test, quick(Variant::W_RA_ER_M, 0.0)),
                     run_experiment(b.train, nullptr, b.test, quick(Variant::W_ER_M, 0.0)));
    require_same_run(run_experiment(b.train, nullptr, b.test, quick(Variant::W_RA, 0.0)),
                     run_experiment(b.train, nullptr, b.test, quick(Variant::WO_RA_ER, 0.0)));
  }
  SUBCASE("manifold mixing restricted to the input is input mixup") {
    require_same_run(run_experiment(b.train, nullptr, b.test, quick(Variant::W_ER_MM, 0.0)),
                     run_experiment(b.train, nullptr, b.test, quick(Variant::W_ER_M, 0.0)));
    require_same_run(run_experiment(b.train, nullptr, b.test, quick(Variant::W_RA_ER_MM, 0.3)),
                     run_experiment(b.train, nullptr, b.test, quick(Variant::W_RA_ER_M, 0.3)));
  }
}

TEST_CASE("training is deterministic per seed and varies across seeds") {
  const DataBundle b = blobs(1.0, 60);
  auto s = quick(Variant::W_RA_ER_MM, 0.2);
  s.mix.eligible_layers = {0, 1, 2};
  const auto r1 = run_experiment(b.train, nullptr, b.test, s);
  require_same_run(r1, run_experiment(b.train, nullptr, b.test, s));
  s.seed = 5;
  const auto r2 = run_experiment(b.train, nullptr, b.test, s);
  CHECK(r1.records.back().loss_total != r2.records.back().loss_total);
}

TEST_CASE("zero learning rate leaves the initial model in place") {
  const DataBundle b = blobs(1.0, 30);
  auto s = quick(Variant::W_RA_ER_M, 0.2, 2);
  s.optim.lr = 0.0;
  const auto r = run_experiment(b.train, nullptr, b.test, s);
  TrainStreams streams(s.seed);
  const MlpModel init = MlpModel::make(b.train.dim(), s.hidden, b.train.classes(), streams.init);
  for (std::size_t l = 0; l < init.depth(); ++l) CHECK(r.model.layer(l).weight == init.layer(l).weight);
}

TEST_CASE("run records and summary") {
  const DataBundle b = blobs(1.0, 40);
  SUBCASE("zero epochs") {
    const auto r = run_experiment(b.train, nullptr, b.test, quick(Variant::W_RA, 0.4, 0));
    CHECK(r.records.empty());
    CHECK_FALSE(r.summary.has_value());
  }
  SUBCASE("fields") {
    auto s = quick(Variant::W_RA, 0.4, 4);
    s.last_k = 2;
    std::size_t seen = 0;
    const auto r = run_experiment(b.train, &b.test, b.test, s, [&](const RunRecord&) { ++seen; });
    CHECK(seen == 4);
    REQUIRE(r.summary.has_value());
    CHECK(r.summary->averaged_epochs == 2);
    CHECK(r.summary->final_test_acc ==
          doctest::Approx((r.records[2].test_acc + r.records[3].test_acc) / 2.0));
    CHECK(r.records[0].loss_intra.has_value());
    CHECK(r.records[0].val_acc.has_value());
    CHECK_FALSE(r.records[0].wall_ms.has_value());
    CHECK(r.records[0].lr == doctest::Approx(0.1));
  }
  SUBCASE("timing on request") {
    auto s = quick(Variant::WO_RA_ER, 0.0, 1);
    s.record_timing = true;
    const auto r = run_experiment(b.train, nullptr, b.test, s);
    CHECK(r.records[0].wall_ms.has_value());
    CHECK_FALSE(r.records[0].loss_intra.has_value());
  }
}

TEST_CASE("divergence is reported, not thrown") {
  const DataBundle b = blobs(1.0, 30);
  auto s = quick(Variant::WO_RA_ER, 0.0, 3);
  s.optim.lr = 1e12;
  s.optim.momentum = 0.0;
  const auto r = run_experiment(b.train, nullptr, b.test, s);
  CHECK(r.diverged);
  CHECK_FALSE(r.summary.has_value());
  CHECK(r.diagnostic.find("epoch") != std::string::npos);
}

TEST_CASE("baseline learns well-separated blobs") {
  const DataBundle b = blobs(0.5);
  // Reference: full-batch softmax regression by plain gradient descent.
  {
    const std::size_t n = b.train.size(), d = b.train.dim(), k = b.train.classes();
    std::vector<double> w(k * d, 0.0), bias(k, 0.0);
    for (int it = 0; it < 300; ++it) {
      std::vector<double> gw(k * d, 0.0), gb(k, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> z(k);
        for (std::size_t c = 0; c < k; ++c) {
          z[c] = bias[c];
          for (std::size_t j = 0; j < d; ++j) z[c] += w[c * d + j] * b.train.features()(i, j);
        }
        const auto p = softmax(z);
        for (std::size_t c = 0; c < k; ++c) {
          const double e = (p[c] - (c == b.train.label(i) ? 1.0 : 0.0)) / static_cast<double>(n);
          gb[c] += e;
          for (std::size_t j = 0; j < d; ++j) gw[c * d + j] += e * b.train.features()(i, j);
        }
      }
      for (std::size_t q = 0; q < w.size(); ++q) w[q] -= 0.5 * gw[q];
      for (std::size_t c = 0; c < k; ++c) bias[c] -= 0.5 * gb[c];
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < b.test.size(); ++i) {
      std::vector<double> z(k);
      for (std::size_t c = 0; c < k; ++c) {
        z[c] = bias[c];
        for (std::size_t j = 0; j < d; ++j) z[c] += w[c * d + j] * b.test.features()(i, j);
      }
      hits += argmax(z) == b.test.label(i);
    }
    CHECK(static_cast<double>(hits) / static_cast<double>(b.test.size()) > 0.9);
  }
  TrainSettings s;
  s.mix.variant = Variant::WO_RA_ER;
  s.augment.noise_sigma = 0.1;
  const auto r = run_experiment(b.train, nullptr, b.test, s);
  REQUIRE(r.summary.has_value());
  CHECK(r.summary->final_test_acc > 0.9);
}

TEST_CASE("beta sweep") {
  const DataBundle b = blobs(1.0, 60);
  auto s = quick(Variant::W_RA, 0.0, 2);
  const std::vector<double> grid{0.4, 0.2, 0.4};
  std::vector<std::pair<double, bool>> calls;
  const SweepResult r = sweep_beta(b.train, b.test, s, grid, [&](double beta, bool final_run) {
    calls.emplace_back(beta, final_run);
    return RecordSink{};
  });
  REQUIRE(r.val_accuracy.size() == 2);
  CHECK(r.val_accuracy[0].first == 0.2);
  REQUIRE(calls.size() == 3);
  CHECK(calls.back().second);
  CHECK(calls.back().first == r.best_beta);
  const double best_score = std::max(r.val_accuracy[0].second, r.val_accuracy[1].second);
  for (auto [beta, score] : r.val_accuracy) {
    if (score == best_score) {
      CHECK(r.best_beta == beta);  // first (smallest) maximiser
      break;
    }
  }
  CHECK(r.final_run.summary->beta == r.best_beta);

  const std::vector<double> bad{0.2, 1.5};
  CHECK_THROWS_AS(sweep_beta(b.train, b.test, s, bad), ConfigError);
  s.mix.variant = Variant::W_ER_M;
  CHECK_THROWS_AS(sweep_beta(b.train, b.test, s, grid), ConfigError);
  CHECK(default_beta_grid(Variant::W_RA_ER_MM) == std::vector<double>{0.05, 0.1, 0.2, 0.4});
  CHECK(default_beta_grid(Variant::WO_RA_ER).empty());
}
