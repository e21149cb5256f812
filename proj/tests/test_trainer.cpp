#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "hhscore/trainer.hpp"
#include "oracles.hpp"

using namespace hhscore;
using fixtures::random_unit;

namespace {

// Two speakers clustered tightly around orthogonal directions.
TrainingPairSet separated_pairs(std::uint64_t seed, Eigen::Index dim = 16) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 0.05);
  MemberUtterances members;
  for (int s = 0; s < 2; ++s) {
    const std::string id = s == 0 ? "a" : "b";
    for (int i = 0; i < 20; ++i) {
      Eigen::VectorXd v = Eigen::VectorXd::Unit(dim, s);
      for (Eigen::Index k = 0; k < dim; ++k) v(k) += g(rng);
      members[id].push_back({id + std::to_string(i), id, v.normalized()});
    }
  }
  return build_pairs(members, {}, std::nullopt, seed);
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("loss of simple batches") {
    const std::vector<double> half = {0.5, 0.5};
    const std::vector<std::uint8_t> pn = {1, 0};
    CHECK(weighted_bce_loss(half, pn, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    const std::vector<double> perfect = {1 - 1e-15, 1e-15};
    CHECK(weighted_bce_loss(perfect, pn, 1.0) < 1e-11);
    const std::vector<double> saturated = {0.0, 1.0};
    const double worst = weighted_bce_loss(saturated, pn, 1.0);
    CHECK(std::isfinite(worst));
    CHECK(worst == doctest::Approx(-(std::log(1e-12) + std::log(1 - (1 - 1e-12))) / 2).epsilon(1e-15));
    CHECK_THROWS_AS(weighted_bce_loss(half, std::vector<std::uint8_t>{1}, 1.0), DimensionError);
    CHECK_THROWS_AS(weighted_bce_loss({}, {}, 1.0), EmptyInputError);
  }

  TEST_CASE("loss against scalar recomputation") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.001, 0.999);
    std::bernoulli_distribution coin(0.3);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 1 + rng() % 300;
      std::vector<double> s(n);
      std::vector<std::uint8_t> t(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = u(rng);
        t[i] = coin(rng);
      }
      const double w = 0.5 + 20 * u(rng);
      CHECK(std::abs(weighted_bce_loss(s, t, w) - oracle::weighted_bce(s, t, w)) < 1e-12);
      CHECK(weighted_bce_loss(s, t, 1.0) == oracle::mean_bce(s, t));
    }
  }

  TEST_CASE("dead network has no weight gradient") {
    std::mt19937_64 rng(2);
    auto m = init_model(16, 4, 1);
    m.weights.setZero();
    const auto s = fixtures::random_sample(rng, 16, 0.5);
    const auto g = backward(m, s.e1, s.e2, s.mask, 1, 3.0);
    CHECK(g.weights.isZero(0));
    CHECK(g.bias.isZero(0));
    CHECK(g.w_local == 0.0);
    CHECK(g.w_global != 0.0);
  }

  TEST_CASE("identical inputs contribute no distance gradient") {
    std::mt19937_64 rng(3);
    const auto m = fixtures::random_model(rng, 16, 4);
    const Eigen::VectorXd e = random_unit(rng, 16);
    const auto mask = sample_mask(16, 0.5, rng);
    for (std::uint8_t target : {0, 1}) {
      const auto g = backward(m, e, e, mask, target, 2.0);
      CHECK(g.weights.isZero(0));
      CHECK(g.bias.isZero(0));
      CHECK(g.w_local == 0.0);
      CHECK(g.fusion_bias != 0.0);
    }
  }

  TEST_CASE("analytic gradient matches central differences") {
    std::mt19937_64 rng(4);
    std::vector<GradientCheckSample> samples;
    for (int i = 0; i < 10; ++i) samples.push_back(fixtures::random_sample(rng, 24, i % 2 ? 0.5 : 0.0));
    const auto m = fixtures::random_model(rng, 24, 8);
    const auto fine = gradient_check(m, samples, 4.0, 1e-6);
    CHECK(fine.checked > 0);
    CHECK(fine.max_relative_error < 1e-6);
    const auto coarse = gradient_check(m, samples, 4.0, 1e-5);
    CHECK(coarse.checked == fine.checked);
    CHECK(coarse.max_relative_error < 1e-5);
  }

  TEST_CASE("samples on a ReLU kink are skipped") {
    std::mt19937_64 rng(5);
    auto m = fixtures::random_model(rng, 16, 4);
    auto s = fixtures::random_sample(rng, 16, 0.0);
    // Put unit 0 exactly at zero pre-activation for the first input.
    m.bias(0) = -(m.weights.row(0) * s.e1)(0);
    const auto r = gradient_check(m, std::vector<GradientCheckSample>{s}, 1.0);
    CHECK(r.skipped == 1);
    CHECK(r.checked == 0);
  }

  TEST_CASE("batch gradient is the scaled sum of pair gradients") {
    std::mt19937_64 rng(6);
    const auto m = fixtures::random_model(rng, 16, 6);
    const int n = 9;
    Eigen::MatrixXd first(16, n), second(16, n), scales(16, n);
    std::vector<std::uint8_t> targets(n);
    ModelGradient sum = ModelGradient::zeros_like(m);
    double loss_sum = 0;
    for (int j = 0; j < n; ++j) {
      const auto s = fixtures::random_sample(rng, 16, 0.5);
      first.col(j) = s.e1;
      second.col(j) = s.e2;
      scales.col(j) = s.mask.scales().matrix();
      targets[j] = s.target;
      const auto g = backward(m, s.e1, s.e2, s.mask, s.target, 2.5);
      sum.weights += g.weights;
      sum.bias += g.bias;
      sum.w_global += g.w_global;
      sum.w_local += g.w_local;
      sum.fusion_bias += g.fusion_bias;
      loss_sum += pair_loss(m, s.e1, s.e2, s.mask, s.target, 2.5);
    }
    const auto batch = batch_loss_and_gradient(m, first, second, scales, targets, 2.5, n);
    CHECK(std::abs(batch.loss - loss_sum / n) < 1e-12);
    CHECK((batch.gradient.weights - sum.weights / n).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((batch.gradient.bias - sum.bias / n).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(batch.gradient.w_global - sum.w_global / n) < 1e-12);
    CHECK(std::abs(batch.gradient.w_local - sum.w_local / n) < 1e-12);
    CHECK(std::abs(batch.gradient.fusion_bias - sum.fusion_bias / n) < 1e-12);
    CHECK_THROWS_AS(batch_loss_and_gradient(m, first, second.leftCols(3), scales, targets, 2.5, n), DimensionError);
  }

  TEST_CASE("full-set loss is the count-weighted mean of batch losses") {
    std::mt19937_64 rng(7);
    const auto m = fixtures::random_model(rng, 16, 6);
    const auto pairs = separated_pairs(3);
    std::vector<std::size_t> all(pairs.pairs.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::mt19937_64 mask_rng(1);
    const auto full = prepare_batch(pairs, all, 0.5, mask_rng);
    const double whole = batch_loss_and_gradient(m, full.first, full.second, full.mask_scales, full.targets,
                                                 pairs.weight_w, static_cast<double>(all.size()))
                             .loss;
    double weighted = 0;
    for (std::size_t start = 0; start < all.size(); start += 64) {
      const std::size_t n = std::min<std::size_t>(64, all.size() - start);
      const Eigen::Index s = static_cast<Eigen::Index>(start);
      const Eigen::Index c = static_cast<Eigen::Index>(n);
      const std::span<const std::uint8_t> t(full.targets.data() + start, n);
      weighted += n * batch_loss_and_gradient(m, full.first.middleCols(s, c), full.second.middleCols(s, c),
                                              full.mask_scales.middleCols(s, c), t, pairs.weight_w,
                                              static_cast<double>(n))
                          .loss;
    }
    CHECK(std::abs(whole - weighted / static_cast<double>(all.size())) < 1e-10);
  }

  TEST_CASE("prepared batches share one mask per pair") {
    const auto pairs = separated_pairs(4);
    const std::vector<std::size_t> idx = {0, 1, 2, 3, 4};
    std::mt19937_64 a(17), b(17);
    const auto batch = prepare_batch(pairs, idx, 0.5, a);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      // The batch consumes the stream exactly like one sample_mask per pair.
      const auto mask = sample_mask(pairs.dim(), 0.5, b);
      CHECK((batch.mask_scales.col(static_cast<Eigen::Index>(j)).array() == mask.scales()).all());
      CHECK(batch.first.col(static_cast<Eigen::Index>(j)) == pairs.first(pairs.pairs[idx[j]]));
      CHECK(batch.second.col(static_cast<Eigen::Index>(j)) == pairs.second(pairs.pairs[idx[j]]));
    }
  }

  TEST_CASE("zero learning rate leaves the model untouched") {
    const auto pairs = separated_pairs(5);
    const auto init = init_model(16, 4, 9);
    TrainConfig cfg;
    cfg.learning_rate = 0;
    cfg.epochs = 3;
    CHECK(same_parameters(train(init, pairs, cfg).model, init));
    cfg.optimizer = Optimizer::adam;
    CHECK(same_parameters(train(init, pairs, cfg).model, init));
  }

  TEST_CASE("training on separated speakers reduces the loss") {
    const auto pairs = separated_pairs(6);
    const auto init = init_model(16, 4, 10);
    TrainConfig cfg;
    cfg.seed = 3;
    const auto r = train(init, pairs, cfg);
    REQUIRE(r.report.epoch_losses.size() == 10);
    CHECK(r.report.epoch_losses.back() < r.report.epoch_losses.front());
    CHECK(r.report.loss_value == r.report.epoch_losses.back());

    cfg.optimizer = Optimizer::adam;
    const auto adam = train(init, pairs, cfg);
    CHECK(adam.report.epoch_losses.back() < adam.report.epoch_losses.front());
  }

  TEST_CASE("training is deterministic") {
    const auto pairs = separated_pairs(7);
    const auto init = init_model(16, 4, 11);
    TrainConfig cfg;
    cfg.seed = 5;
    cfg.learning_rate = 0.3;
    cfg.batch_size = 64;
    const auto a = train(init, pairs, cfg);
    const auto b = train(init, pairs, cfg);
    CHECK(same_parameters(a.model, b.model));
    CHECK(a.report.epoch_losses == b.report.epoch_losses);
    cfg.seed = 6;
    CHECK_FALSE(same_parameters(train(init, pairs, cfg).model, a.model));
  }

  TEST_CASE("local-only training keeps the global weight at zero") {
    const auto pairs = separated_pairs(8);
    TrainConfig cfg;
    cfg.fuse_global = false;
    cfg.learning_rate = 0.3;
    for (auto opt : {Optimizer::sgd, Optimizer::adam}) {
      cfg.optimizer = opt;
      const auto r = train(init_model(16, 4, 1), pairs, cfg);
      CHECK(r.model.w_global == 0.0);
      CHECK(r.model.w_local != -1.0);
    }
  }

  TEST_CASE("divergence is reported with the epoch") {
    const auto pairs = separated_pairs(9);
    TrainConfig cfg;
    cfg.learning_rate = 1e305;
    cfg.dropout_rate = 0;
    try {
      train(init_model(16, 4, 1), pairs, cfg);
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("epoch") != std::string::npos);
      CHECK(e.module() == "trainer");
    }
  }

  TEST_CASE("config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.dropout_rate = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.learning_rate = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.epochs = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  TEST_CASE("training curve text") {
    LossReport r;
    r.epoch_losses = {0.5, 0.25};
    std::ostringstream out;
    write_training_curve(out, r);
    CHECK(out.str() == "epoch\tmean_loss\n1\t0.5\n2\t0.25\n");
  }

  TEST_CASE("pair set and model must agree on D") {
    const auto pairs = separated_pairs(10, 16);
    TrainConfig cfg;
    CHECK_THROWS_AS(train(init_model(12, 4, 1), pairs, cfg), DimensionError);
  }
}
