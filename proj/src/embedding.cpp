#include "hhscore/embedding.hpp"

namespace hhscore {

SpeakerProfile average_profile(std::string speaker_id, std::span<const EmbeddingVector> embeddings,
                               bool renormalize) {
  if (embeddings.empty()) throw EmptyInputError("profile for '" + speaker_id + "' has no embeddings");
  const auto dim = embeddings.front().size();
  Eigen::MatrixXd stacked(dim, static_cast<Eigen::Index>(embeddings.size()));
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (embeddings[i].size() != dim) {
      throw DimensionError("profile for '" + speaker_id + "' mixes dimensions");
    }
    stacked.col(static_cast<Eigen::Index>(i)) = embeddings[i];
  }
  return {std::move(speaker_id), average_embedding(stacked, renormalize)};
}

}  // namespace hhscore
