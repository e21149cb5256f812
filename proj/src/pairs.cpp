#include "hhscore/pairs.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace hhscore {

TrainingPairSet build_pairs(const MemberUtterances& members, std::span<const LabeledUtterance> guests,
                            std::optional<std::size_t> cap_guest_negatives, std::uint64_t seed) {
  TrainingPairSet set;
  Eigen::Index dim = -1;
  std::size_t total = guests.size();
  for (const auto& [label, utts] : members) total += utts.size();
  for (const auto& [label, utts] : members) {
    if (!utts.empty()) {
      dim = utts.front().embedding.size();
      break;
    }
  }
  if (dim < 0 && !guests.empty()) dim = guests.front().embedding.size();
  if (dim <= 0) throw DegenerateHouseholdError("no utterances to pair");

  set.embeddings.resize(dim, static_cast<Eigen::Index>(total));
  set.labels.reserve(total);
  set.is_guest.reserve(total);
  std::uint32_t next = 0;
  auto append = [&](const LabeledUtterance& u, bool guest) {
    if (u.embedding.size() != dim) {
      throw DimensionError("utterance '" + u.utterance_id + "' has dimension " +
                           std::to_string(u.embedding.size()) + ", expected " + std::to_string(dim));
    }
    set.embeddings.col(next) = u.embedding;
    set.labels.push_back(u.speaker_label);
    set.is_guest.push_back(guest);
    return next++;
  };

  std::vector<std::vector<std::uint32_t>> member_columns;
  for (const auto& [label, utts] : members) {
    auto& cols = member_columns.emplace_back();
    for (const auto& u : utts) cols.push_back(append(u, false));
  }
  std::vector<std::uint32_t> guest_columns;
  for (const auto& g : guests) guest_columns.push_back(append(g, true));

  // Positives: unordered pairs within each member.
  for (const auto& cols : member_columns) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      for (std::size_t j = i + 1; j < cols.size(); ++j) set.pairs.push_back({cols[i], cols[j], 1});
    }
  }
  set.positives = set.pairs.size();

  // Negatives between members.
  for (std::size_t a = 0; a < member_columns.size(); ++a) {
    for (std::size_t b = a + 1; b < member_columns.size(); ++b) {
      for (auto ca : member_columns[a]) {
        for (auto cb : member_columns[b]) set.pairs.push_back({ca, cb, 0});
      }
    }
  }

  // Negatives against guests, optionally subsampled per member.
  std::mt19937_64 rng(seed);
  for (const auto& cols : member_columns) {
    const std::size_t available = cols.size() * guest_columns.size();
    if (!cap_guest_negatives || *cap_guest_negatives >= available) {
      for (auto c : cols) {
        for (auto g : guest_columns) set.pairs.push_back({c, g, 0});
      }
      continue;
    }
    std::vector<std::size_t> all(available);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> chosen;
    chosen.reserve(*cap_guest_negatives);
    std::sample(all.begin(), all.end(), std::back_inserter(chosen), *cap_guest_negatives, rng);
    for (auto k : chosen) {
      set.pairs.push_back({cols[k / guest_columns.size()], guest_columns[k % guest_columns.size()], 0});
    }
  }
  set.negatives = set.pairs.size() - set.positives;

  if (set.positives == 0 || set.negatives == 0) {
    throw DegenerateHouseholdError("household yields " + std::to_string(set.positives) +
                                   " positive and " + std::to_string(set.negatives) +
                                   " negative pairs; both must be non-zero");
  }
  set.weight_w = static_cast<double>(set.negatives) / static_cast<double>(set.positives);
  std::shuffle(set.pairs.begin(), set.pairs.end(), rng);
  return set;
}

std::vector<LabeledUtterance> corrupt_labels(std::span<const LabeledUtterance> utterances,
                                             std::span<const std::string> member_labels,
                                             double epsilon, std::uint64_t seed,
                                             CorruptionDraw draw) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ConfigError("label corruption rate must lie in [0, 1], got " + std::to_string(epsilon));
  }
  if (member_labels.empty()) throw EmptyInputError("corrupt_labels needs the household label set");

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution corrupt(epsilon);
  std::vector<LabeledUtterance> out(utterances.begin(), utterances.end());
  for (auto& u : out) {
    if (std::find(member_labels.begin(), member_labels.end(), u.speaker_label) == member_labels.end()) {
      throw ConfigError("label '" + u.speaker_label + "' is not a household member");
    }
    if (!corrupt(rng)) continue;
    if (draw == CorruptionDraw::any_member) {
      std::uniform_int_distribution<std::size_t> pick(0, member_labels.size() - 1);
      u.speaker_label = member_labels[pick(rng)];
    } else if (member_labels.size() > 1) {
      std::vector<std::string> others;
      for (const auto& l : member_labels) {
        if (l != u.speaker_label) others.push_back(l);
      }
      std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
      u.speaker_label = others[pick(rng)];
    }
  }
  return out;
}

}  // namespace hhscore
