#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hhscore/corpus.hpp"

namespace hhscore {

struct UtteranceRef {
  std::string speaker_id;
  std::string utterance_id;

  bool operator==(const UtteranceRef&) const = default;
};

struct MemberSplits {
  std::string speaker_id;
  std::vector<std::string> enroll;
  std::vector<std::string> eval;
  std::vector<std::string> train;

  bool operator==(const MemberSplits&) const = default;
};

/// One simulated household. Evaluation guests and training guests come from
/// disjoint sets of non-member speakers, so guests seen at test time were
/// never used as training negatives.
struct Household {
  std::size_t id = 0;
  std::vector<MemberSplits> members;
  std::vector<UtteranceRef> guests;        // evaluation guest trials
  std::vector<UtteranceRef> train_guests;  // negatives for pair building

  std::vector<std::string> member_ids() const;
  bool operator==(const Household&) const = default;
};

struct SplitConfig {
  std::size_t enroll = 4;
  std::size_t eval = 10;
  std::size_t max_train = 50;
  std::size_t guests = 250;
  std::size_t train_guests = 250;
};

std::vector<Household> generate_random_households(const Corpus& corpus, std::size_t household_size,
                                                  std::size_t count, std::uint64_t seed,
                                                  const SplitConfig& splits = {});

/// Re-normalized mean of up to `utterances` randomly chosen utterance
/// embeddings of one speaker.
EmbeddingVector speaker_level_embedding(const Corpus& corpus, const std::string& speaker_id,
                                        std::size_t utterances, std::uint64_t seed);

/// Linear-interpolated percentile of cosine similarities between utterances
/// of different speakers. Enumerates every pair when there are at most
/// `sample_budget` of them, otherwise samples that many pairs uniformly.
double similarity_threshold(const Corpus& corpus, double percentile, std::size_t sample_budget,
                            std::uint64_t seed);

/// Same statistic computed over every cross-speaker pair.
double exhaustive_similarity_threshold(const Corpus& corpus, double percentile);

struct HardHouseholdConfig {
  std::size_t speaker_level_utterances = 20;
  std::size_t restarts_per_household = 2000;
};

/// Households whose members are pairwise similar: every pair of members has
/// speaker-level cosine above `threshold`. Cliques are grown greedily from
/// random seeds with restarts.
std::vector<Household> generate_hard_households(const Corpus& corpus, std::size_t household_size,
                                                std::size_t count, double threshold,
                                                std::uint64_t seed, const SplitConfig& splits = {},
                                                const HardHouseholdConfig& search = {});

/// Speaker-level embeddings for every speaker, in corpus order, as used by
/// hard-household generation.
std::vector<EmbeddingVector> speaker_level_embeddings(const Corpus& corpus, std::size_t utterances,
                                                      std::uint64_t seed);

// Household manifests are JSON documents listing members, their split
// utterance ids and the guest utterances.
void save_manifest(const std::vector<Household>& households, const std::string& path);
std::vector<Household> load_manifest(const std::string& path);
std::string manifest_to_string(const std::vector<Household>& households);
std::vector<Household> manifest_from_string(const std::string& text);

/// Confidence filter for pseudo-labeled runtime utterances: keep when the
/// rank-1 score exceeds `min_top_score` and beats rank-2 by more than
/// `min_margin`.
struct PseudoLabelFilter {
  double min_top_score = 0.0;
  double min_margin = 0.0;

  bool accepts(double rank1, double rank2) const {
    return rank1 > min_top_score && (rank1 - rank2) > min_margin;
  }
};

}  // namespace hhscore
