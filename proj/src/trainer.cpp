#include "hhscore/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace hhscore {

namespace {

template <typename Scalar>
Scalar clamp_score(Scalar s) {
  return std::clamp(s, Scalar(kScoreClamp), Scalar(1) - Scalar(kScoreClamp));
}

// Contribution of one pair to the un-normalized loss sum. Kept as a single
// expression so weighted and unweighted paths share the same rounding.
template <typename Scalar>
Scalar log_likelihood_term(Scalar score, std::uint8_t target, Scalar w) {
  const Scalar s = clamp_score(score);
  return target ? w * std::log(s) : std::log(Scalar(1) - s);
}

// d(-term)/du where S = sigmoid(u); zero where the clamp is active.
double dloss_dlogit(double score, std::uint8_t target, double w) {
  if (score < kScoreClamp || score > 1.0 - kScoreClamp) return 0.0;
  return target ? -w * (1.0 - score) : score;
}

template <typename Scalar, typename Derived>
Scalar forward_pair_loss(const ScoringModel<Scalar>& model, const Eigen::MatrixBase<Derived>& e1,
                         const Eigen::MatrixBase<Derived>& e2, const Eigen::ArrayXd& scales,
                         std::uint8_t target, Scalar w) {
  const Vector<Scalar> s = scales.cast<Scalar>().matrix();
  const Scalar s_global = cosine_similarity(e1, e2);
  const Vector<Scalar> a1 = adapt(model, Vector<Scalar>(e1.cwiseProduct(s)));
  const Vector<Scalar> a2 = adapt(model, Vector<Scalar>(e2.cwiseProduct(s)));
  const Scalar s_local = (a1 - a2).norm();
  return -log_likelihood_term(fuse(model, s_global, s_local), target, w);
}

template <typename Scalar>
ScoringModel<Scalar> cast_model(const HouseholdScoringModel& m) {
  ScoringModel<Scalar> out;
  out.weights = m.weights.cast<Scalar>();
  out.bias = m.bias.cast<Scalar>();
  out.w_global = static_cast<Scalar>(m.w_global);
  out.w_local = static_cast<Scalar>(m.w_local);
  out.fusion_bias = static_cast<Scalar>(m.fusion_bias);
  return out;
}

Eigen::MatrixXd mask_matrix(const DropoutMask& mask) {
  return mask.scales().matrix();
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be finite and non-negative");
  }
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  check_dropout_rate(dropout_rate);
  if (!(distance_epsilon >= 0)) throw ConfigError("distance epsilon must be non-negative");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 && adam_epsilon > 0)) {
    throw ConfigError("invalid Adam hyper-parameters");
  }
}

double weighted_bce_loss(std::span<const double> scores, std::span<const std::uint8_t> targets,
                         double w) {
  if (scores.size() != targets.size()) {
    throw DimensionError("weighted_bce_loss: " + std::to_string(scores.size()) + " scores, " +
                         std::to_string(targets.size()) + " targets");
  }
  if (scores.empty()) throw EmptyInputError("weighted_bce_loss of an empty batch");
  double acc = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) acc += log_likelihood_term(scores[i], targets[i], w);
  return -acc / static_cast<double>(scores.size());
}

ModelGradient ModelGradient::zeros_like(const HouseholdScoringModel& model) {
  ModelGradient g;
  g.weights = Eigen::MatrixXd::Zero(model.weights.rows(), model.weights.cols());
  g.bias = Eigen::VectorXd::Zero(model.bias.size());
  return g;
}

bool ModelGradient::all_finite() const {
  return weights.allFinite() && bias.allFinite() && std::isfinite(w_global) &&
         std::isfinite(w_local) && std::isfinite(fusion_bias);
}

BatchResult batch_loss_and_gradient(const HouseholdScoringModel& model,
                                    const Eigen::Ref<const Eigen::MatrixXd>& first,
                                    const Eigen::Ref<const Eigen::MatrixXd>& second,
                                    const Eigen::Ref<const Eigen::MatrixXd>& mask_scales,
                                    std::span<const std::uint8_t> targets, double w,
                                    double normalizer, double distance_epsilon) {
  const Eigen::Index n = first.cols();
  const Eigen::Index dim = model.input_dim();
  if (first.rows() != dim || second.rows() != dim || mask_scales.rows() != dim ||
      second.cols() != n || mask_scales.cols() != n ||
      static_cast<Eigen::Index>(targets.size()) != n) {
    throw DimensionError("batch_loss_and_gradient: inconsistent batch shapes");
  }

  const Eigen::MatrixXd x1 = first.cwiseProduct(mask_scales);
  const Eigen::MatrixXd x2 = second.cwiseProduct(mask_scales);
  const Eigen::MatrixXd z1 = (model.weights * x1).colwise() + model.bias;
  const Eigen::MatrixXd z2 = (model.weights * x2).colwise() + model.bias;
  const Eigen::MatrixXd diff = z1.cwiseMax(0.0) - z2.cwiseMax(0.0);

  BatchResult out;
  out.gradient = ModelGradient::zeros_like(model);
  Eigen::RowVectorXd distance_coef(n);
  double acc = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double s_global = cosine_similarity(first.col(j), second.col(j));
    const double s_local = diff.col(j).norm();
    const double score = fuse(model, s_global, s_local);
    acc += log_likelihood_term(score, targets[j], w);

    const double g_logit = dloss_dlogit(score, targets[j], w) / normalizer;
    out.gradient.w_global += g_logit * s_global;
    out.gradient.w_local += g_logit * s_local;
    out.gradient.fusion_bias += g_logit;
    distance_coef(j) = s_local > distance_epsilon ? g_logit * model.w_local / s_local : 0.0;
  }
  out.loss = -acc / normalizer;

  // dL/dA1 = coef * (A1 - A2), dL/dA2 = -dL/dA1, gated by ReLU'(z) = [z > 0].
  const Eigen::MatrixXd g_adapted = diff.array().rowwise() * distance_coef.array();
  const Eigen::MatrixXd g_z1 = (z1.array() > 0.0).select(g_adapted, 0.0);
  const Eigen::MatrixXd g_z2 = (z2.array() > 0.0).select(-g_adapted, 0.0);
  out.gradient.weights.noalias() = g_z1 * x1.transpose();
  out.gradient.weights.noalias() += g_z2 * x2.transpose();
  out.gradient.bias = g_z1.rowwise().sum() + g_z2.rowwise().sum();

  if (!std::isfinite(out.loss) || !out.gradient.all_finite()) {
    throw NumericalError("non-finite loss or gradient in batch of " + std::to_string(n) + " pairs");
  }
  return out;
}

ModelGradient backward(const HouseholdScoringModel& model, const EmbeddingVector& e1,
                       const EmbeddingVector& e2, const DropoutMask& mask, std::uint8_t target,
                       double w, double distance_epsilon) {
  if (e1.size() != model.input_dim() || e2.size() != model.input_dim() ||
      mask.size() != model.input_dim()) {
    throw DimensionError("backward: pair or mask does not match model dimension");
  }
  const std::uint8_t t[1] = {target};
  return batch_loss_and_gradient(model, e1, e2, mask_matrix(mask), t, w, 1.0, distance_epsilon)
      .gradient;
}

double pair_loss(const HouseholdScoringModel& model, const EmbeddingVector& e1,
                 const EmbeddingVector& e2, const DropoutMask& mask, std::uint8_t target, double w) {
  return forward_pair_loss(model, e1, e2, mask.scales(), target, w);
}

PreparedBatch prepare_batch(const TrainingPairSet& pairs, std::span<const std::size_t> indices,
                            double dropout_rate, std::mt19937_64& rng) {
  const Eigen::Index dim = pairs.dim();
  const auto n = static_cast<Eigen::Index>(indices.size());
  PreparedBatch batch;
  batch.first.resize(dim, n);
  batch.second.resize(dim, n);
  batch.mask_scales.resize(dim, n);
  batch.targets.resize(indices.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    const TrainingPair& p = pairs.pairs[indices[static_cast<std::size_t>(j)]];
    batch.first.col(j) = pairs.first(p);
    batch.second.col(j) = pairs.second(p);
    auto column = batch.mask_scales.col(j);
    draw_mask_scales(rng, dropout_rate, column);
    batch.targets[static_cast<std::size_t>(j)] = p.target;
  }
  return batch;
}

namespace {

class Updater {
 public:
  Updater(const HouseholdScoringModel& model, const TrainConfig& cfg)
      : cfg_(cfg), m_(ModelGradient::zeros_like(model)), v_(ModelGradient::zeros_like(model)) {}

  void step(HouseholdScoringModel& model, ModelGradient g) {
    if (!cfg_.fuse_global) g.w_global = 0;
    if (cfg_.optimizer == Optimizer::sgd) {
      const double lr = cfg_.learning_rate;
      model.weights -= lr * g.weights;
      model.bias -= lr * g.bias;
      model.w_global -= lr * g.w_global;
      model.w_local -= lr * g.w_local;
      model.fusion_bias -= lr * g.fusion_bias;
      return;
    }
    ++t_;
    const double b1 = cfg_.adam_beta1;
    const double b2 = cfg_.adam_beta2;
    const double lr_t = cfg_.learning_rate * std::sqrt(1.0 - std::pow(b2, t_)) / (1.0 - std::pow(b1, t_));
    const double eps = cfg_.adam_epsilon;
    auto update_array = [&](auto& param, auto& m, auto& v, const auto& grad) {
      m = b1 * m + (1.0 - b1) * grad;
      v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
      param.array() -= lr_t * m.array() / (v.array().sqrt() + eps);
    };
    auto update_scalar = [&](double& param, double& m, double& v, double grad) {
      m = b1 * m + (1.0 - b1) * grad;
      v = b2 * v + (1.0 - b2) * grad * grad;
      param -= lr_t * m / (std::sqrt(v) + eps);
    };
    update_array(model.weights, m_.weights, v_.weights, g.weights);
    update_array(model.bias, m_.bias, v_.bias, g.bias);
    if (cfg_.fuse_global) update_scalar(model.w_global, m_.w_global, v_.w_global, g.w_global);
    update_scalar(model.w_local, m_.w_local, v_.w_local, g.w_local);
    update_scalar(model.fusion_bias, m_.fusion_bias, v_.fusion_bias, g.fusion_bias);
  }

 private:
  const TrainConfig& cfg_;
  ModelGradient m_;
  ModelGradient v_;
  int t_ = 0;
};

}  // namespace

TrainResult train(HouseholdScoringModel model, const TrainingPairSet& pairs, const TrainConfig& cfg) {
  cfg.validate();
  if (pairs.positives == 0 || pairs.negatives == 0 || pairs.pairs.empty()) {
    throw DegenerateHouseholdError("training needs at least one positive and one negative pair");
  }
  if (pairs.dim() != model.input_dim()) {
    throw DimensionError("pair set has D=" + std::to_string(pairs.dim()) + ", model has D=" +
                         std::to_string(model.input_dim()));
  }
  if (!cfg.fuse_global) model.w_global = 0;

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(pairs.pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Updater updater(model, cfg);
  TrainResult result;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> indices(order.data() + start, count);
      const PreparedBatch batch = prepare_batch(pairs, indices, cfg.dropout_rate, rng);
      BatchResult step;
      try {
        step = batch_loss_and_gradient(model, batch.first, batch.second, batch.mask_scales,
                                       batch.targets, pairs.weight_w, static_cast<double>(count),
                                       cfg.distance_epsilon);
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      total += step.loss * static_cast<double>(count);
      updater.step(model, std::move(step.gradient));
    }
    const double epoch_loss = total / static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss) || !model.all_finite()) {
      throw NumericalError("non-finite loss or parameters after epoch " + std::to_string(epoch));
    }
    result.report.epoch_losses.push_back(epoch_loss);
  }
  result.report.loss_value = result.report.epoch_losses.empty() ? 0.0 : result.report.epoch_losses.back();
  result.model = std::move(model);
  return result;
}

void write_training_curve(std::ostream& out, const LossReport& report) {
  out << "epoch\tmean_loss\n";
  char buf[64];
  for (std::size_t i = 0; i < report.epoch_losses.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\n", i + 1, report.epoch_losses[i]);
    out << buf;
  }
}

GradientCheckResult gradient_check(const HouseholdScoringModel& model,
                                   std::span<const GradientCheckSample> samples, double w,
                                   double h) {
  using Wide = long double;
  // A step of size h moves a pre-activation by at most h * max|x| (<= 2h at
  // dropout 0.5); pre-activations inside this margin could cross the kink.
  const double kink_margin = 10 * h;
  // The distance has curvature ~1/S_h, so near-zero distances ruin the
  // central difference itself.
  const double distance_margin = 1e-3;
  const double tiny_gradient = 1e-8;

  GradientCheckResult result;
  const ScoringModel<Wide> base = cast_model<Wide>(model);

  for (const auto& sample : samples) {
    const Eigen::ArrayXd scales = sample.mask.scales();
    const Eigen::VectorXd x1 = sample.e1.cwiseProduct(scales.matrix());
    const Eigen::VectorXd x2 = sample.e2.cwiseProduct(scales.matrix());
    const Eigen::VectorXd z1 = model.weights * x1 + model.bias;
    const Eigen::VectorXd z2 = model.weights * x2 + model.bias;
    const double distance = (z1.cwiseMax(0.0) - z2.cwiseMax(0.0)).norm();
    if (z1.cwiseAbs().minCoeff() < kink_margin || z2.cwiseAbs().minCoeff() < kink_margin ||
        distance < distance_margin) {
      ++result.skipped;
      continue;
    }

    const ModelGradient analytic = backward(model, sample.e1, sample.e2, sample.mask, sample.target, w);
    const Vector<Wide> e1 = sample.e1.cast<Wide>();
    const Vector<Wide> e2 = sample.e2.cast<Wide>();
    ScoringModel<Wide> probe = base;

    auto central = [&](Wide& param) {
      const Wide saved = param;
      param = saved + h;
      const Wide up = forward_pair_loss(probe, e1, e2, scales, sample.target, Wide(w));
      param = saved - h;
      const Wide down = forward_pair_loss(probe, e1, e2, scales, sample.target, Wide(w));
      param = saved;
      return static_cast<double>((up - down) / (2 * Wide(h)));
    };
    auto compare = [&](double a, double numeric) {
      if (std::abs(a) <= tiny_gradient) return;
      const double rel = std::abs(a - numeric) / std::max(std::abs(a), std::abs(numeric));
      result.max_relative_error = std::max(result.max_relative_error, rel);
      ++result.checked;
    };

    for (Eigen::Index r = 0; r < probe.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < probe.weights.cols(); ++c) {
        compare(analytic.weights(r, c), central(probe.weights(r, c)));
      }
    }
    for (Eigen::Index k = 0; k < probe.bias.size(); ++k) compare(analytic.bias(k), central(probe.bias(k)));
    compare(analytic.w_global, central(probe.w_global));
    compare(analytic.w_local, central(probe.w_local));
    compare(analytic.fusion_bias, central(probe.fusion_bias));
  }
  return result;
}

}  // namespace hhscore
