#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hhscore/corpus.hpp"
#include "hhscore/household.hpp"
#include "hhscore/scoring_model.hpp"

namespace hhscore {

/// Cosine baseline, (cos + 1) / 2.
struct BaselineScorer {};

/// Fused score of a trained household model, inference path (no dropout).
struct ModelScorer {
  const HouseholdScoringModel* model = nullptr;
};

using Scorer = std::variant<BaselineScorer, ModelScorer>;

double score(const Scorer& scorer, const EmbeddingVector& profile, const EmbeddingVector& test);

struct Identification {
  std::string predicted;
  double s_max = 0;
  std::vector<double> scores;  // one per profile, in profile order
};

/// Rank-1 speaker over `profiles`. Equal scores resolve to the smallest
/// speaker id.
Identification identify(const Scorer& scorer, std::span<const SpeakerProfile> profiles,
                        const EmbeddingVector& test);

enum class TrialType { enrolled, guest };

struct Trial {
  std::size_t household_id = 0;
  TrialType type = TrialType::enrolled;
  std::string truth;      // speaker id, or the guest's speaker id for guest trials
  std::string predicted;  // rank-1 enrolled speaker
  double s_max = 0;
};

struct ErrorRates {
  double far = 0;
  double fnir = 0;
  double threshold = 0;
};

/// A trial is accepted when s_max >= tau.
ErrorRates rates_at_threshold(std::span<const Trial> trials, double tau);

struct EerResult {
  double eer = 0;
  double threshold = 0;
};

/// Sweeps every distinct s_max (plus -inf/+inf) as a threshold and returns
/// the point where FAR meets FNIR; when they never coincide, the midpoint
/// (FAR + FNIR) / 2 at the threshold minimizing |FAR - FNIR| (lowest such
/// threshold on ties).
EerResult eer(std::span<const Trial> trials);

std::vector<SpeakerProfile> household_profiles(const Household& household, const Corpus& corpus,
                                               bool renormalize = true);

/// Every evaluation utterance of every member plus every evaluation guest
/// utterance, each identified against all member profiles.
std::vector<Trial> evaluate_household(const Scorer& scorer, const Household& household,
                                      const Corpus& corpus);

enum class Aggregation { pooled, mean_per_household };

double aggregate_eer(std::span<const std::vector<Trial>> per_household, Aggregation mode);

// Trial dumps: header "household_id<TAB>trial_type<TAB>truth<TAB>predicted<TAB>s_max",
// lines starting with '#' are comments.
void write_trials(std::ostream& out, std::span<const Trial> trials, bool header = true);
std::vector<Trial> read_trials(std::istream& in);

const char* to_string(TrialType type);

}  // namespace hhscore
