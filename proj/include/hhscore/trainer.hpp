#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hhscore/pairs.hpp"
#include "hhscore/scoring_model.hpp"

namespace hhscore {

enum class Optimizer { sgd, adam };

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 0.01;
  std::size_t batch_size = 1024;
  double dropout_rate = 0.5;
  Optimizer optimizer = Optimizer::sgd;
  std::uint64_t seed = 0;
  // Below this adapted distance the distance gradient is taken as zero.
  double distance_epsilon = 1e-12;
  // false trains the local score alone: w_global is pinned at 0.
  bool fuse_global = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

/// Scores are clamped to [kScoreClamp, 1 - kScoreClamp] before the log.
inline constexpr double kScoreClamp = 1e-12;

/// Weighted binary cross-entropy, normalized by the number of scores:
///   L = -(w * sum_pos log S + sum_neg log(1 - S)) / (P + Q)
double weighted_bce_loss(std::span<const double> scores, std::span<const std::uint8_t> targets,
                         double w);

/// Same shape as the model; one slot per learnable parameter.
struct ModelGradient {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
  double w_global = 0;
  double w_local = 0;
  double fusion_bias = 0;

  static ModelGradient zeros_like(const HouseholdScoringModel& model);
  bool all_finite() const;
};

struct BatchResult {
  double loss = 0;  // normalized by the batch size
  ModelGradient gradient;
};

/// Forward and analytic backward pass over a batch of pairs stored as
/// columns. `mask_scales` (D x n) multiplies both members of each pair; pass
/// an all-ones matrix for no dropout. The loss is normalized by `normalizer`
/// (the batch size during training) and positives are weighted by `w`.
BatchResult batch_loss_and_gradient(const HouseholdScoringModel& model,
                                    const Eigen::Ref<const Eigen::MatrixXd>& first,
                                    const Eigen::Ref<const Eigen::MatrixXd>& second,
                                    const Eigen::Ref<const Eigen::MatrixXd>& mask_scales,
                                    std::span<const std::uint8_t> targets, double w,
                                    double normalizer, double distance_epsilon = 1e-12);

/// Gradient of the single-pair weighted loss -(w t log S + (1 - t) log(1 - S)).
ModelGradient backward(const HouseholdScoringModel& model, const EmbeddingVector& e1,
                       const EmbeddingVector& e2, const DropoutMask& mask, std::uint8_t target,
                       double w, double distance_epsilon = 1e-12);

/// The single-pair loss that `backward` differentiates.
double pair_loss(const HouseholdScoringModel& model, const EmbeddingVector& e1,
                 const EmbeddingVector& e2, const DropoutMask& mask, std::uint8_t target, double w);

/// Dropout-masked inputs of one batch. Column j of `mask_scales` is applied
/// to column j of both `first` and `second`.
struct PreparedBatch {
  Eigen::MatrixXd first;
  Eigen::MatrixXd second;
  Eigen::MatrixXd mask_scales;
  std::vector<std::uint8_t> targets;
};

PreparedBatch prepare_batch(const TrainingPairSet& pairs, std::span<const std::size_t> indices,
                            double dropout_rate, std::mt19937_64& rng);

struct LossReport {
  double loss_value = 0;            // mean loss of the last epoch
  std::vector<double> epoch_losses;
};

struct TrainResult {
  HouseholdScoringModel model;
  LossReport report;
};

/// Mini-batch training: each epoch reshuffles the pairs, draws a fresh
/// dropout mask per pair and applies one optimizer step per batch.
/// Deterministic given cfg.seed.
TrainResult train(HouseholdScoringModel model, const TrainingPairSet& pairs, const TrainConfig& cfg);

/// "epoch<TAB>mean_loss" lines with a header row.
void write_training_curve(std::ostream& out, const LossReport& report);

struct GradientCheckSample {
  EmbeddingVector e1;
  EmbeddingVector e2;
  DropoutMask mask;
  std::uint8_t target = 1;
};

struct GradientCheckResult {
  double max_relative_error = 0;
  std::size_t checked = 0;   // coordinates compared
  std::size_t skipped = 0;   // samples sitting on a ReLU kink or at zero distance
};

/// Compares `backward` against central differences of `pair_loss` for every
/// parameter. Samples whose pre-activations lie within `kink_margin` of zero
/// (or whose adapted distance is ~0) are skipped. Coordinates with
/// |analytic| <= 1e-8 are not compared.
GradientCheckResult gradient_check(const HouseholdScoringModel& model,
                                   std::span<const GradientCheckSample> samples, double w,
                                   double h = 1e-6);

}  // namespace hhscore
