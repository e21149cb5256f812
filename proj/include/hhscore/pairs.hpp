#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hhscore/embedding.hpp"

namespace hhscore {

struct LabeledUtterance {
  std::string utterance_id;
  std::string speaker_label;
  EmbeddingVector embedding;
};

/// Indices into TrainingPairSet::embeddings; the pair never references the
/// same column twice.
struct TrainingPair {
  std::uint32_t first = 0;
  std::uint32_t second = 0;
  std::uint8_t target = 0;  // 1 = same speaker
};

struct TrainingPairSet {
  Eigen::MatrixXd embeddings;         // D x U, one column per utterance
  std::vector<std::string> labels;    // speaker label per column
  std::vector<bool> is_guest;         // per column
  std::vector<TrainingPair> pairs;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  double weight_w = 0;                // negatives / positives

  Eigen::Index dim() const { return embeddings.rows(); }
  auto first(const TrainingPair& p) const { return embeddings.col(p.first); }
  auto second(const TrainingPair& p) const { return embeddings.col(p.second); }
};

/// Utterances grouped by (possibly corrupted) member label.
using MemberUtterances = std::map<std::string, std::vector<LabeledUtterance>>;

/// Enumerates every same-member pair as a positive; every cross-member pair
/// and every member-guest pair as a negative. Guest-guest pairs are never
/// formed. `cap_guest_negatives` bounds the member-guest pairs kept per
/// member (uniform subsample). The combined list is shuffled with `seed`.
TrainingPairSet build_pairs(const MemberUtterances& members, std::span<const LabeledUtterance> guests,
                            std::optional<std::size_t> cap_guest_negatives, std::uint64_t seed);

enum class CorruptionDraw {
  any_member,    // uniform over all N labels, the true one included
  other_member,  // uniform over the N-1 other labels
};

/// Each utterance keeps its label with probability 1 - epsilon and otherwise
/// receives a random household label. Only training utterances should be
/// passed in.
std::vector<LabeledUtterance> corrupt_labels(std::span<const LabeledUtterance> utterances,
                                             std::span<const std::string> member_labels,
                                             double epsilon, std::uint64_t seed,
                                             CorruptionDraw draw = CorruptionDraw::any_member);

}  // namespace hhscore
