#pragma once

// Household-adapted scoring network:
//
//   S_g = cos(E1, E2)                      (unmasked inputs)
//   E*_i = InputDropout(E_i)               (one mask shared by the pair)
//   A_i = ReLU(W E*_i + B)                 (K-dimensional adapted embedding)
//   S_h = |A_1 - A_2|
//   S   = sigmoid(w_global S_g + w_local S_h + fusion_bias)

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "hhscore/embedding.hpp"
#include "hhscore/errors.hpp"

namespace hhscore {

template <typename Scalar>
struct ScoringModel {
  Matrix<Scalar> weights;  // K x D
  Vector<Scalar> bias;     // K
  Scalar w_global = 1;
  Scalar w_local = -1;
  Scalar fusion_bias = 0;

  Eigen::Index input_dim() const { return weights.cols(); }
  Eigen::Index adapted_dim() const { return weights.rows(); }

  bool all_finite() const {
    return weights.allFinite() && bias.allFinite() && std::isfinite(w_global) &&
           std::isfinite(w_local) && std::isfinite(fusion_bias);
  }
};

template <typename Scalar>
bool same_parameters(const ScoringModel<Scalar>& a, const ScoringModel<Scalar>& b) {
  return a.weights.rows() == b.weights.rows() && a.weights.cols() == b.weights.cols() &&
         a.weights == b.weights && a.bias == b.bias && a.w_global == b.w_global &&
         a.w_local == b.w_local && a.fusion_bias == b.fusion_bias;
}

using HouseholdScoringModel = ScoringModel<double>;

/// Pair-level input dropout mask. Kept components are scaled by 1/(1 - rate)
/// at train time so inference needs no rescaling.
struct DropoutMask {
  Eigen::Array<bool, Eigen::Dynamic, 1> kept;
  double rate = 0;

  Eigen::Index size() const { return kept.size(); }

  /// Multiplicative factor per component: 0 for dropped, 1/(1 - rate) for kept.
  Eigen::ArrayXd scales() const {
    const double keep_scale = 1.0 / (1.0 - rate);
    return kept.select(Eigen::ArrayXd::Constant(kept.size(), keep_scale),
                       Eigen::ArrayXd::Zero(kept.size()));
  }
};

struct ScoreBreakdown {
  double s_global = 0;
  double s_local = 0;
  double s_fused = 0;
};

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// W ~ U[-1/sqrt(D), 1/sqrt(D)] filled row by row, B = 0, fusion starts at
/// (w_global, w_local, bias) = (1, -1, 0).
HouseholdScoringModel init_model(Eigen::Index input_dim, Eigen::Index adapted_dim,
                                 std::uint64_t seed);

inline void check_dropout_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
}

/// Writes per-component dropout scales into `out` (0 or 1/(1-rate)), one
/// Bernoulli draw per component from `rng`. Shared by sample_mask and the
/// batched trainer so both consume the random stream identically.
template <typename Derived>
void draw_mask_scales(std::mt19937_64& rng, double rate, Eigen::DenseBase<Derived>& out) {
  check_dropout_rate(rate);
  const double keep_scale = 1.0 / (1.0 - rate);
  if (rate == 0.0) {
    out.setConstant(1.0);
    return;
  }
  // keep with probability (1 - rate), one raw 64-bit draw per component
  const auto keep_below = static_cast<std::uint64_t>(std::ldexp(1.0 - rate, 64));
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = rng() < keep_below ? keep_scale : 0.0;
}

DropoutMask sample_mask(Eigen::Index dim, double rate, std::mt19937_64& rng);

template <typename Derived>
EmbeddingVector apply_mask(const Eigen::MatrixBase<Derived>& e, const DropoutMask& mask) {
  if (e.size() != mask.size()) {
    throw DimensionError("apply_mask: embedding has " + std::to_string(e.size()) +
                         " components, mask has " + std::to_string(mask.size()));
  }
  if (mask.rate == 0.0) return e;
  return (e.array() * mask.scales()).matrix();
}

template <typename Scalar, typename Derived>
Vector<Scalar> adapt(const ScoringModel<Scalar>& model, const Eigen::MatrixBase<Derived>& e_star) {
  if (e_star.size() != model.input_dim()) {
    throw DimensionError("adapt: input has " + std::to_string(e_star.size()) +
                         " components, model expects " + std::to_string(model.input_dim()));
  }
  return (model.weights * e_star + model.bias).cwiseMax(Scalar(0));
}

template <typename Scalar>
Scalar fuse(const ScoringModel<Scalar>& model, Scalar s_global, Scalar s_local) {
  return sigmoid(model.w_global * s_global + model.w_local * s_local + model.fusion_bias);
}

/// Full forward chain. Without a mask this is the inference path.
ScoreBreakdown score_pair(const HouseholdScoringModel& model, const EmbeddingVector& e1,
                          const EmbeddingVector& e2,
                          const std::optional<DropoutMask>& mask = std::nullopt);

/// Cosine similarity mapped affinely onto [0, 1].
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar baseline_score(const Eigen::MatrixBase<DerivedA>& e1,
                                         const Eigen::MatrixBase<DerivedB>& e2) {
  using Scalar = typename DerivedA::Scalar;
  return (cosine_similarity(e1, e2) + Scalar(1)) / Scalar(2);
}

// Binary model file: "HHSM", u16 version, u32 D, u32 K, then W row-major, B,
// w_global, w_local, fusion_bias as little-endian f64.
void save_model(const HouseholdScoringModel& model, const std::string& path);
HouseholdScoringModel load_model(const std::string& path);

}  // namespace hhscore
