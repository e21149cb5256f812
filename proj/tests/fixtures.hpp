#pragma once

#include <random>
#include <vector>

#include "hhscore/corpus.hpp"
#include "hhscore/trainer.hpp"

namespace fixtures {

inline Eigen::VectorXd random_unit(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
  return v.normalized();
}

/// A trained-looking model: random weights, small random biases and fusion
/// parameters away from their initial values.
inline hhscore::HouseholdScoringModel random_model(std::mt19937_64& rng, Eigen::Index d, Eigen::Index k) {
  auto m = hhscore::init_model(d, k, rng());
  std::normal_distribution<double> g(0, 0.05);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (Eigen::Index i = 0; i < k; ++i) m.bias(i) = g(rng);
  m.w_global = u(rng);
  m.w_local = -u(rng);
  m.fusion_bias = g(rng);
  return m;
}

/// One random (pair, mask, target) draw per call.
inline hhscore::GradientCheckSample random_sample(std::mt19937_64& rng, Eigen::Index d, double rate) {
  std::bernoulli_distribution coin(0.5);
  hhscore::GradientCheckSample s;
  s.e1 = random_unit(rng, d);
  s.e2 = random_unit(rng, d);
  s.mask = hhscore::sample_mask(d, rate, rng);
  s.target = coin(rng) ? 1 : 0;
  return s;
}

/// Small corpus for pipeline tests: quick to generate and to train on.
inline hhscore::SyntheticConfig small_corpus_config(std::uint64_t seed = 5) {
  hhscore::SyntheticConfig cfg;
  cfg.speaker_count = 30;
  cfg.utterances_per_speaker = 40;
  cfg.dim = 16;
  cfg.identity_subspace_dim = 4;
  cfg.nuisance_rank = 2;
  cfg.environment_group_size = 3;
  cfg.seed = seed;
  return cfg;
}

}  // namespace fixtures
