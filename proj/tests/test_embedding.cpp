#include <doctest.h>

#include <random>
#include <vector>

#include "hhscore/embedding.hpp"
#include "oracles.hpp"

using namespace hhscore;

namespace {
Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}
}  // namespace

TEST_SUITE("embedding") {
  TEST_CASE("normalize 3-4-5") {
    const Eigen::VectorXd v = l2_normalize(Eigen::Vector2d(3, 4));
    CHECK(v(0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(v(1) == doctest::Approx(0.8).epsilon(1e-15));
  }

  TEST_CASE("normalize keeps unit vectors and is idempotent") {
    std::mt19937_64 rng(3);
    const Eigen::VectorXd e0 = Eigen::VectorXd::Unit(5, 2);
    CHECK(l2_normalize(e0) == e0);
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::VectorXd u = l2_normalize(random_vector(rng, 64));
      CHECK(std::abs(oracle::norm(oracle::to_std(u)) - 1.0) < 1e-12);
      CHECK((l2_normalize(u) - u).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("normalize rejects zero and non-finite vectors") {
    CHECK_THROWS_AS(l2_normalize(Eigen::VectorXd::Zero(4)), NormalizationError);
    Eigen::VectorXd v = Eigen::VectorXd::Ones(3);
    v(1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(l2_normalize(v), NormalizationError);
  }

  TEST_CASE("cosine of special pairs") {
    const Eigen::Vector3d a(1, 0, 0);
    const Eigen::Vector3d b(0, 1, 0);
    CHECK(cosine_similarity(a, a) == 1.0);
    CHECK(cosine_similarity(a, b) == 0.0);
    CHECK(cosine_similarity(a, Eigen::Vector3d(-a)) == -1.0);
    CHECK_THROWS_AS(cosine_similarity(a, Eigen::Vector3d::Zero()), NormalizationError);
    CHECK_THROWS_AS(cosine_similarity(Eigen::VectorXd(a), Eigen::VectorXd::Unit(2, 0)), DimensionError);
  }

  TEST_CASE("cosine is symmetric and clamped") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
      const Eigen::VectorXd a = random_vector(rng, 64);
      const Eigen::VectorXd b = random_vector(rng, 64);
      const double ab = cosine_similarity(a, b);
      CHECK(ab == cosine_similarity(b, a));
      CHECK(ab <= 1.0);
      CHECK(ab >= -1.0);
      const Eigen::VectorXd scaled = a * 3.7;
      CHECK(cosine_similarity(a, scaled) <= 1.0);
    }
  }

  TEST_CASE("euclidean distance") {
    CHECK(euclidean_distance(Eigen::Vector2d(0, 0), Eigen::Vector2d(3, 4)) == 5.0);
    const Eigen::Vector3d a(0.1, -2, 7);
    CHECK(euclidean_distance(a, a) == 0.0);
    CHECK_THROWS_AS(euclidean_distance(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)), DimensionError);

    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::VectorXd x = random_vector(rng, 32);
      const Eigen::VectorXd y = random_vector(rng, 32);
      const double d = euclidean_distance(x, y);
      CHECK(d == euclidean_distance(y, x));
      CHECK(std::abs(d - oracle::distance(oracle::to_std(x), oracle::to_std(y))) < 1e-12);
    }
  }

  TEST_CASE("distance and cosine agree on the unit sphere") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
      const Eigen::VectorXd a = l2_normalize(random_vector(rng, 64));
      const Eigen::VectorXd b = l2_normalize(random_vector(rng, 64));
      const double d = euclidean_distance(a, b);
      CHECK(std::abs(d * d - (2 - 2 * cosine_similarity(a, b))) < 1e-9);
    }
  }

  TEST_CASE("average profile") {
    std::mt19937_64 rng(13);
    const Eigen::VectorXd u = l2_normalize(random_vector(rng, 16));
    const std::vector<EmbeddingVector> one = {u};
    CHECK((average_profile("a", one).embedding - u).cwiseAbs().maxCoeff() < 1e-15);
    const std::vector<EmbeddingVector> twice = {u, u};
    const auto p = average_profile("a", twice);
    CHECK(p.speaker_id == "a");
    CHECK((p.embedding - u).cwiseAbs().maxCoeff() < 1e-15);

    const std::vector<EmbeddingVector> antipodal = {u, -u};
    CHECK_THROWS_AS(average_profile("a", antipodal), NormalizationError);
    CHECK_THROWS_AS(average_profile("a", std::span<const EmbeddingVector>{}), EmptyInputError);

    const Eigen::VectorXd v = l2_normalize(random_vector(rng, 16));
    const std::vector<EmbeddingVector> pair = {u, v};
    const auto normalized = average_profile("a", pair);
    CHECK(std::abs(normalized.embedding.norm() - 1) < 1e-12);
    const auto raw = average_profile("a", pair, false);
    CHECK((raw.embedding - (u + v) / 2).cwiseAbs().maxCoeff() < 1e-15);

    const std::vector<EmbeddingVector> mixed = {u, Eigen::VectorXd::Ones(3)};
    CHECK_THROWS_AS(average_profile("a", mixed), DimensionError);
  }
}
