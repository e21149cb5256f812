#include "hhscore/scoring_model.hpp"

#include <fstream>

#include "binary_io.hpp"

namespace hhscore {

namespace {
constexpr std::uint16_t kModelVersion = 1;
}

HouseholdScoringModel init_model(Eigen::Index input_dim, Eigen::Index adapted_dim,
                                 std::uint64_t seed) {
  if (adapted_dim <= 0 || adapted_dim >= input_dim) {
    throw DimensionError("init_model requires 0 < K < D, got K=" + std::to_string(adapted_dim) +
                         " D=" + std::to_string(input_dim));
  }
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
  std::uniform_real_distribution<double> uniform(-bound, bound);

  HouseholdScoringModel model;
  model.weights.resize(adapted_dim, input_dim);
  for (Eigen::Index r = 0; r < adapted_dim; ++r) {
    for (Eigen::Index c = 0; c < input_dim; ++c) model.weights(r, c) = uniform(rng);
  }
  model.bias = Eigen::VectorXd::Zero(adapted_dim);
  return model;
}

DropoutMask sample_mask(Eigen::Index dim, double rate, std::mt19937_64& rng) {
  Eigen::ArrayXd scales(dim);
  draw_mask_scales(rng, rate, scales);
  return {scales > 0.0, rate};
}

ScoreBreakdown score_pair(const HouseholdScoringModel& model, const EmbeddingVector& e1,
                          const EmbeddingVector& e2, const std::optional<DropoutMask>& mask) {
  if (e1.size() != model.input_dim() || e2.size() != model.input_dim()) {
    throw DimensionError("score_pair: embeddings of size " + std::to_string(e1.size()) + "/" +
                         std::to_string(e2.size()) + " for a model with D=" +
                         std::to_string(model.input_dim()));
  }
  ScoreBreakdown out;
  out.s_global = cosine_similarity(e1, e2);
  if (mask) {
    out.s_local = euclidean_distance(adapt(model, apply_mask(e1, *mask)),
                                     adapt(model, apply_mask(e2, *mask)));
  } else {
    out.s_local = euclidean_distance(adapt(model, e1), adapt(model, e2));
  }
  out.s_fused = fuse(model, out.s_global, out.s_local);
  return out;
}

void save_model(const HouseholdScoringModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write("HHSM", 4);
  detail::write_le(out, kModelVersion);
  detail::write_le(out, static_cast<std::uint32_t>(model.input_dim()));
  detail::write_le(out, static_cast<std::uint32_t>(model.adapted_dim()));
  for (Eigen::Index r = 0; r < model.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.weights.cols(); ++c) detail::write_f64(out, model.weights(r, c));
  }
  for (Eigen::Index k = 0; k < model.bias.size(); ++k) detail::write_f64(out, model.bias(k));
  detail::write_f64(out, model.w_global);
  detail::write_f64(out, model.w_local);
  detail::write_f64(out, model.fusion_bias);
  if (!out) throw IoError("write to '" + path + "' failed");
}

HouseholdScoringModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model '" + path + "'");
  detail::expect_magic(in, "HHSM", path);
  const auto version = detail::read_le<std::uint16_t>(in);
  if (version != kModelVersion) {
    throw FormatError(path + ": unsupported model version " + std::to_string(version));
  }
  const auto input_dim = detail::read_le<std::uint32_t>(in);
  const auto adapted_dim = detail::read_le<std::uint32_t>(in);
  if (adapted_dim == 0 || adapted_dim >= input_dim) {
    throw FormatError(path + ": invalid dimensions D=" + std::to_string(input_dim) +
                      " K=" + std::to_string(adapted_dim));
  }
  HouseholdScoringModel model;
  model.weights.resize(adapted_dim, input_dim);
  for (Eigen::Index r = 0; r < model.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.weights.cols(); ++c) model.weights(r, c) = detail::read_f64(in);
  }
  model.bias.resize(adapted_dim);
  for (Eigen::Index k = 0; k < model.bias.size(); ++k) model.bias(k) = detail::read_f64(in);
  model.w_global = detail::read_f64(in);
  model.w_local = detail::read_f64(in);
  model.fusion_bias = detail::read_f64(in);
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path + ": trailing bytes");
  return model;
}

}  // namespace hhscore
