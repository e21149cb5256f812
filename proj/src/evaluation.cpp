#include "hhscore/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace hhscore {

double score(const Scorer& scorer, const EmbeddingVector& profile, const EmbeddingVector& test) {
  if (const auto* m = std::get_if<ModelScorer>(&scorer)) {
    return score_pair(*m->model, profile, test).s_fused;
  }
  return baseline_score(profile, test);
}

Identification identify(const Scorer& scorer, std::span<const SpeakerProfile> profiles,
                        const EmbeddingVector& test) {
  if (profiles.empty()) throw EmptyInputError("identify: no enrolled profiles");
  Identification out;
  out.scores.reserve(profiles.size());
  const SpeakerProfile* best = nullptr;
  for (const auto& p : profiles) {
    const double s = score(scorer, p.embedding, test);
    out.scores.push_back(s);
    if (!best || s > out.s_max || (s == out.s_max && p.speaker_id < best->speaker_id)) {
      best = &p;
      out.s_max = s;
    }
  }
  out.predicted = best->speaker_id;
  return out;
}

namespace {

struct TrialCounts {
  std::size_t guests = 0;
  std::size_t enrolled = 0;
};

TrialCounts count_trials(std::span<const Trial> trials) {
  TrialCounts c;
  for (const auto& t : trials) (t.type == TrialType::guest ? c.guests : c.enrolled)++;
  if (c.guests == 0 || c.enrolled == 0) {
    throw DegenerateTrialSetError("trial set has " + std::to_string(c.enrolled) + " enrolled and " +
                                  std::to_string(c.guests) + " guest trials; both are required");
  }
  return c;
}

}  // namespace

ErrorRates rates_at_threshold(std::span<const Trial> trials, double tau) {
  const TrialCounts counts = count_trials(trials);
  std::size_t false_accepts = 0;
  std::size_t false_negatives = 0;
  for (const auto& t : trials) {
    const bool accepted = t.s_max >= tau;
    if (t.type == TrialType::guest) {
      false_accepts += accepted;
    } else {
      false_negatives += (t.predicted != t.truth || !accepted);
    }
  }
  return {static_cast<double>(false_accepts) / static_cast<double>(counts.guests),
          static_cast<double>(false_negatives) / static_cast<double>(counts.enrolled), tau};
}

EerResult eer(std::span<const Trial> trials) {
  const TrialCounts counts = count_trials(trials);
  std::vector<double> guest_scores;
  std::vector<double> correct_scores;
  std::vector<double> candidates;
  std::size_t misidentified = 0;
  for (const auto& t : trials) {
    candidates.push_back(t.s_max);
    if (t.type == TrialType::guest) {
      guest_scores.push_back(t.s_max);
    } else if (t.predicted == t.truth) {
      correct_scores.push_back(t.s_max);
    } else {
      ++misidentified;
    }
  }
  std::sort(guest_scores.begin(), guest_scores.end());
  std::sort(correct_scores.begin(), correct_scores.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  constexpr double inf = std::numeric_limits<double>::infinity();
  candidates.insert(candidates.begin(), -inf);
  candidates.push_back(inf);

  // Rates are compared as exact rationals: |FA/G - FN/E| ~ |FA*E - FN*G|.
  const auto guests = static_cast<std::int64_t>(counts.guests);
  const auto enrolled = static_cast<std::int64_t>(counts.enrolled);
  std::size_t guests_below = 0;
  std::size_t correct_below = 0;
  std::int64_t best_gap = std::numeric_limits<std::int64_t>::max();
  EerResult best;
  for (const double tau : candidates) {
    while (guests_below < guest_scores.size() && guest_scores[guests_below] < tau) ++guests_below;
    while (correct_below < correct_scores.size() && correct_scores[correct_below] < tau) ++correct_below;
    const auto false_accepts = static_cast<std::int64_t>(guest_scores.size() - guests_below);
    const auto false_negatives = static_cast<std::int64_t>(misidentified + correct_below);
    const std::int64_t gap = std::abs(false_accepts * enrolled - false_negatives * guests);
    if (gap < best_gap) {
      best_gap = gap;
      const double far = static_cast<double>(false_accepts) / static_cast<double>(guests);
      const double fnir = static_cast<double>(false_negatives) / static_cast<double>(enrolled);
      best = {(far + fnir) / 2.0, tau};
    }
  }
  return best;
}

std::vector<SpeakerProfile> household_profiles(const Household& household, const Corpus& corpus,
                                               bool renormalize) {
  std::vector<SpeakerProfile> profiles;
  for (const auto& m : household.members) {
    std::vector<EmbeddingVector> enroll;
    for (const auto& u : m.enroll) enroll.push_back(corpus.embedding(m.speaker_id, u));
    profiles.push_back(average_profile(m.speaker_id, enroll, renormalize));
  }
  return profiles;
}

std::vector<Trial> evaluate_household(const Scorer& scorer, const Household& household,
                                      const Corpus& corpus) {
  if (const auto* m = std::get_if<ModelScorer>(&scorer); m && m->model->input_dim() != corpus.dim()) {
    throw DimensionError("model expects D=" + std::to_string(m->model->input_dim()) + ", corpus has D=" +
                         std::to_string(corpus.dim()));
  }
  const auto profiles = household_profiles(household, corpus);
  std::vector<Trial> trials;
  auto add = [&](TrialType type, const std::string& speaker, const std::string& utterance) {
    const auto id = identify(scorer, profiles, corpus.embedding(speaker, utterance));
    trials.push_back({household.id, type, speaker, id.predicted, id.s_max});
  };
  for (const auto& m : household.members) {
    for (const auto& u : m.eval) add(TrialType::enrolled, m.speaker_id, u);
  }
  for (const auto& g : household.guests) add(TrialType::guest, g.speaker_id, g.utterance_id);
  return trials;
}

double aggregate_eer(std::span<const std::vector<Trial>> per_household, Aggregation mode) {
  if (per_household.empty()) throw EmptyInputError("aggregate_eer needs at least one household");
  if (mode == Aggregation::mean_per_household) {
    double sum = 0;
    for (const auto& trials : per_household) sum += eer(trials).eer;
    return sum / static_cast<double>(per_household.size());
  }
  std::vector<Trial> pooled;
  for (const auto& trials : per_household) pooled.insert(pooled.end(), trials.begin(), trials.end());
  return eer(pooled).eer;
}

const char* to_string(TrialType type) { return type == TrialType::guest ? "guest" : "enrolled"; }

void write_trials(std::ostream& out, std::span<const Trial> trials, bool header) {
  if (header) out << "household_id\ttrial_type\ttruth\tpredicted\ts_max\n";
  char buf[32];
  for (const auto& t : trials) {
    std::snprintf(buf, sizeof buf, "%.17g", t.s_max);
    out << t.household_id << '\t' << to_string(t.type) << '\t' << t.truth << '\t' << t.predicted << '\t'
        << buf << '\n';
  }
}

std::vector<Trial> read_trials(std::istream& in) {
  std::vector<Trial> trials;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.rfind("household_id", 0) == 0) continue;
    std::istringstream fields(line);
    Trial t;
    std::string type;
    std::string s_max;
    if (!(fields >> t.household_id >> type >> t.truth >> t.predicted >> s_max)) {
      throw FormatError("trial dump line " + std::to_string(line_no) + ": expected 5 fields");
    }
    if (type == "guest") {
      t.type = TrialType::guest;
    } else if (type == "enrolled") {
      t.type = TrialType::enrolled;
    } else {
      throw FormatError("trial dump line " + std::to_string(line_no) + ": unknown trial type '" + type + "'");
    }
    try {
      t.s_max = std::stod(s_max);
    } catch (const std::exception&) {
      throw FormatError("trial dump line " + std::to_string(line_no) + ": bad score '" + s_max + "'");
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

}  // namespace hhscore
