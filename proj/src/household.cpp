#include "hhscore/household.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "hhscore/random.hpp"

namespace hhscore {

namespace {

void require_sizes(const Corpus& corpus, std::size_t household_size, const SplitConfig& splits) {
  if (household_size == 0) throw ConfigError("household size must be positive");
  if (corpus.speaker_count() < household_size) {
    throw ConfigError("corpus has " + std::to_string(corpus.speaker_count()) +
                      " speakers, fewer than the household size " + std::to_string(household_size));
  }
  if (splits.enroll == 0 || splits.eval == 0) throw ConfigError("enroll and eval splits must be non-empty");
}

std::vector<UtteranceRef> sample_guest_utterances(const Corpus& corpus,
                                                  std::span<const std::size_t> speakers,
                                                  std::size_t count, std::mt19937_64& rng) {
  std::vector<UtteranceRef> pool;
  for (auto s : speakers) {
    const auto& rec = corpus.speakers()[s];
    for (const auto& u : rec.utterance_ids) pool.push_back({rec.id, u});
  }
  std::vector<UtteranceRef> out;
  out.reserve(std::min(count, pool.size()));
  std::sample(pool.begin(), pool.end(), std::back_inserter(out), count, rng);
  return out;
}

Household fill_household(const Corpus& corpus, std::size_t id, std::span<const std::size_t> members,
                         const SplitConfig& splits, std::mt19937_64& rng) {
  Household h;
  h.id = id;
  const std::size_t required = splits.enroll + splits.eval;
  for (auto s : members) {
    const auto& rec = corpus.speakers()[s];
    if (rec.size() < required) {
      throw SpeakerTooSmallError("speaker '" + rec.id + "' has " + std::to_string(rec.size()) +
                                 " utterances, needs at least " + std::to_string(required));
    }
    std::vector<std::size_t> order(rec.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    MemberSplits m{rec.id, {}, {}, {}};
    const std::size_t train_count = std::min(splits.max_train, rec.size() - required);
    for (std::size_t i = 0; i < required + train_count; ++i) {
      const auto& utt = rec.utterance_ids[order[i]];
      if (i < splits.enroll) {
        m.enroll.push_back(utt);
      } else if (i < required) {
        m.eval.push_back(utt);
      } else {
        m.train.push_back(utt);
      }
    }
    h.members.push_back(std::move(m));
  }

  std::vector<std::size_t> others;
  for (std::size_t s = 0; s < corpus.speaker_count(); ++s) {
    if (std::find(members.begin(), members.end(), s) == members.end()) others.push_back(s);
  }
  std::shuffle(others.begin(), others.end(), rng);
  const bool need_both = splits.guests > 0 && splits.train_guests > 0;
  if (others.empty() || (need_both && others.size() < 2)) {
    throw GuestPoolEmptyError("household " + std::to_string(id) + " has " +
                              std::to_string(others.size()) +
                              " non-member speakers; guests need at least " +
                              std::to_string(need_both ? 2 : 1));
  }
  // Evaluation guests take the first half of the shuffled non-members.
  std::size_t eval_speakers = others.size();
  if (splits.train_guests > 0) eval_speakers = splits.guests > 0 ? (others.size() + 1) / 2 : 0;
  const std::span<const std::size_t> all(others);
  h.guests = sample_guest_utterances(corpus, all.first(eval_speakers), splits.guests, rng);
  h.train_guests = sample_guest_utterances(corpus, all.subspan(eval_speakers), splits.train_guests, rng);
  return h;
}

double interpolated_percentile(std::vector<double>& values, double percentile) {
  if (values.empty()) throw EmptyInputError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = percentile / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= values.size()) return values.back();
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

void check_percentile(const Corpus& corpus, double percentile) {
  if (!(percentile >= 0.0 && percentile <= 100.0)) {
    throw ConfigError("percentile must lie in [0, 100], got " + std::to_string(percentile));
  }
  if (corpus.speaker_count() < 2) throw ConfigError("similarity threshold needs at least two speakers");
}

}  // namespace

std::vector<std::string> Household::member_ids() const {
  std::vector<std::string> ids;
  for (const auto& m : members) ids.push_back(m.speaker_id);
  return ids;
}

std::vector<Household> generate_random_households(const Corpus& corpus, std::size_t household_size,
                                                  std::size_t count, std::uint64_t seed,
                                                  const SplitConfig& splits) {
  require_sizes(corpus, household_size, splits);
  std::vector<std::size_t> speakers(corpus.speaker_count());
  std::iota(speakers.begin(), speakers.end(), std::size_t{0});
  std::vector<Household> out;
  out.reserve(count);
  for (std::size_t h = 0; h < count; ++h) {
    std::mt19937_64 rng(derive_seed(seed, {h}));
    std::vector<std::size_t> members;
    std::sample(speakers.begin(), speakers.end(), std::back_inserter(members), household_size, rng);
    std::shuffle(members.begin(), members.end(), rng);
    out.push_back(fill_household(corpus, h, members, splits, rng));
  }
  return out;
}

EmbeddingVector speaker_level_embedding(const Corpus& corpus, const std::string& speaker_id,
                                        std::size_t utterances, std::uint64_t seed) {
  const auto& rec = corpus.speaker(speaker_id);
  if (rec.size() == 0) throw EmptyInputError("speaker '" + speaker_id + "' has no utterances");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> all(rec.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> chosen;
  std::sample(all.begin(), all.end(), std::back_inserter(chosen), std::max<std::size_t>(utterances, 1), rng);
  Eigen::MatrixXd stacked(corpus.dim(), static_cast<Eigen::Index>(chosen.size()));
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    stacked.col(static_cast<Eigen::Index>(i)) = rec.embeddings[chosen[i]];
  }
  return average_embedding(stacked);
}

std::vector<EmbeddingVector> speaker_level_embeddings(const Corpus& corpus, std::size_t utterances,
                                                      std::uint64_t seed) {
  std::vector<EmbeddingVector> out;
  out.reserve(corpus.speaker_count());
  for (std::size_t s = 0; s < corpus.speaker_count(); ++s) {
    out.push_back(speaker_level_embedding(corpus, corpus.speakers()[s].id, utterances, derive_seed(seed, {s})));
  }
  return out;
}

double exhaustive_similarity_threshold(const Corpus& corpus, double percentile) {
  check_percentile(corpus, percentile);
  std::vector<double> sims;
  const auto& spk = corpus.speakers();
  for (std::size_t a = 0; a < spk.size(); ++a) {
    for (std::size_t b = a + 1; b < spk.size(); ++b) {
      for (const auto& x : spk[a].embeddings) {
        for (const auto& y : spk[b].embeddings) sims.push_back(cosine_similarity(x, y));
      }
    }
  }
  return interpolated_percentile(sims, percentile);
}

double similarity_threshold(const Corpus& corpus, double percentile, std::size_t sample_budget,
                            std::uint64_t seed) {
  check_percentile(corpus, percentile);
  const std::size_t total = corpus.utterance_count();
  std::size_t same_speaker = 0;
  for (const auto& s : corpus.speakers()) same_speaker += s.size() * s.size();
  const std::size_t cross_pairs = (total * total - same_speaker) / 2;
  if (cross_pairs <= sample_budget) return exhaustive_similarity_threshold(corpus, percentile);

  std::vector<std::pair<std::size_t, const EmbeddingVector*>> flat;
  flat.reserve(total);
  for (std::size_t s = 0; s < corpus.speaker_count(); ++s) {
    for (const auto& e : corpus.speakers()[s].embeddings) flat.emplace_back(s, &e);
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  std::vector<double> sims;
  sims.reserve(sample_budget);
  while (sims.size() < sample_budget) {
    const auto& a = flat[pick(rng)];
    const auto& b = flat[pick(rng)];
    if (a.first == b.first) continue;
    sims.push_back(cosine_similarity(*a.second, *b.second));
  }
  return interpolated_percentile(sims, percentile);
}

std::vector<Household> generate_hard_households(const Corpus& corpus, std::size_t household_size,
                                                std::size_t count, double threshold,
                                                std::uint64_t seed, const SplitConfig& splits,
                                                const HardHouseholdConfig& search) {
  require_sizes(corpus, household_size, splits);
  const std::size_t n = corpus.speaker_count();
  const auto level = speaker_level_embeddings(corpus, search.speaker_level_utterances, derive_seed(seed, {0x5EED}));
  std::vector<std::vector<std::size_t>> neighbors(n);
  std::vector<std::vector<bool>> adjacent(n, std::vector<bool>(n, false));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (cosine_similarity(level[a], level[b]) > threshold) {
        neighbors[a].push_back(b);
        neighbors[b].push_back(a);
        adjacent[a][b] = adjacent[b][a] = true;
      }
    }
  }

  std::vector<Household> out;
  out.reserve(count);
  for (std::size_t h = 0; h < count; ++h) {
    std::mt19937_64 rng(derive_seed(seed, {h}));
    std::uniform_int_distribution<std::size_t> pick_start(0, n - 1);
    std::vector<std::size_t> clique;
    for (std::size_t attempt = 0; attempt < search.restarts_per_household; ++attempt) {
      clique.assign(1, pick_start(rng));
      std::vector<std::size_t> candidates = neighbors[clique.front()];
      while (clique.size() < household_size && !candidates.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        const std::size_t next = candidates[pick(rng)];
        clique.push_back(next);
        std::erase_if(candidates, [&](std::size_t c) { return c == next || !adjacent[next][c]; });
      }
      if (clique.size() == household_size) break;
    }
    if (clique.size() != household_size) {
      throw CliqueSearchError("found " + std::to_string(h) + " of " + std::to_string(count) +
                              " hard households of size " + std::to_string(household_size) +
                              " at threshold " + std::to_string(threshold));
    }
    out.push_back(fill_household(corpus, h, clique, splits, rng));
  }
  return out;
}

namespace {

nlohmann::json refs_to_json(const std::vector<UtteranceRef>& refs) {
  auto arr = nlohmann::json::array();
  for (const auto& r : refs) arr.push_back({r.speaker_id, r.utterance_id});
  return arr;
}

std::vector<UtteranceRef> refs_from_json(const nlohmann::json& arr) {
  std::vector<UtteranceRef> refs;
  for (const auto& r : arr) refs.push_back({r.at(0).get<std::string>(), r.at(1).get<std::string>()});
  return refs;
}

}  // namespace

std::string manifest_to_string(const std::vector<Household>& households) {
  nlohmann::json doc;
  doc["format"] = "hhscore-household-manifest";
  doc["version"] = 1;
  auto& list = doc["households"] = nlohmann::json::array();
  for (const auto& h : households) {
    nlohmann::json jh;
    jh["id"] = h.id;
    auto& members = jh["members"] = nlohmann::json::array();
    for (const auto& m : h.members) {
      members.push_back({{"speaker", m.speaker_id}, {"enroll", m.enroll}, {"eval", m.eval}, {"train", m.train}});
    }
    jh["guests"] = refs_to_json(h.guests);
    jh["train_guests"] = refs_to_json(h.train_guests);
    list.push_back(std::move(jh));
  }
  return doc.dump(1) + "\n";
}

std::vector<Household> manifest_from_string(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    if (doc.value("format", "") != "hhscore-household-manifest") {
      throw FormatError("not a household manifest");
    }
    std::vector<Household> out;
    for (const auto& jh : doc.at("households")) {
      Household h;
      h.id = jh.at("id").get<std::size_t>();
      for (const auto& jm : jh.at("members")) {
        h.members.push_back({jm.at("speaker").get<std::string>(),
                             jm.at("enroll").get<std::vector<std::string>>(),
                             jm.at("eval").get<std::vector<std::string>>(),
                             jm.at("train").get<std::vector<std::string>>()});
      }
      h.guests = refs_from_json(jh.at("guests"));
      h.train_guests = refs_from_json(jh.at("train_guests"));
      out.push_back(std::move(h));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed household manifest: ") + e.what());
  }
}

void save_manifest(const std::vector<Household>& households, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << manifest_to_string(households);
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::vector<Household> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return manifest_from_string(buf.str());
}

}  // namespace hhscore
