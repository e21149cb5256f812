#pragma once

// Fixed-dimension embedding primitives. Everything here is a free function
// over Eigen dense expressions so callers can pass blocks, maps or columns
// without copying.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "hhscore/errors.hpp"

namespace hhscore {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Unit-norm global speaker embedding. Internal arithmetic is 64-bit.
using EmbeddingVector = Eigen::VectorXd;

struct SpeakerProfile {
  std::string speaker_id;
  EmbeddingVector embedding;
};

template <typename Derived>
Vector<typename Derived::Scalar> l2_normalize(const Eigen::MatrixBase<Derived>& v) {
  const auto norm = v.norm();
  if (!(norm > 0) || !std::isfinite(norm)) {
    throw NormalizationError("cannot normalize a vector with norm " + std::to_string(norm));
  }
  return v / norm;
}

/// Cosine similarity clamped to [-1, 1]. Divides by both norms even for unit
/// inputs.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) {
    throw DimensionError("cosine_similarity: dimensions " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (!(na > 0) || !(nb > 0)) throw NormalizationError("cosine_similarity: zero-norm input");
  // Multiply norms first so the expression is symmetric in (a, b).
  const Scalar c = a.dot(b) / (na * nb);
  return std::clamp(c, Scalar(-1), Scalar(1));
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar euclidean_distance(const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw DimensionError("euclidean_distance: dimensions " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  return (a - b).norm();
}

/// Mean of the columns of `embeddings`, re-normalized unless `renormalize` is
/// false (kept for ablation only).
template <typename Derived>
Vector<typename Derived::Scalar> average_embedding(const Eigen::MatrixBase<Derived>& embeddings,
                                                   bool renormalize = true) {
  if (embeddings.cols() == 0) throw EmptyInputError("average of an empty embedding list");
  Vector<typename Derived::Scalar> mean = embeddings.rowwise().mean();
  if (!renormalize) return mean;
  return l2_normalize(mean);
}

SpeakerProfile average_profile(std::string speaker_id, std::span<const EmbeddingVector> embeddings,
                               bool renormalize = true);

}  // namespace hhscore
