#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <tuple>

#include "hhscore/pairs.hpp"

using namespace hhscore;

namespace {

LabeledUtterance utt(const std::string& speaker, std::size_t i, std::mt19937_64& rng, Eigen::Index dim = 8) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(dim);
  for (Eigen::Index k = 0; k < dim; ++k) v(k) = g(rng);
  return {speaker + "-" + std::to_string(i), speaker, v.normalized()};
}

MemberUtterances members(std::size_t n, std::size_t per_member, std::mt19937_64& rng) {
  MemberUtterances m;
  for (std::size_t s = 0; s < n; ++s) {
    const std::string id = "m" + std::to_string(s);
    for (std::size_t i = 0; i < per_member; ++i) m[id].push_back(utt(id, i, rng));
  }
  return m;
}

std::vector<LabeledUtterance> guests(std::size_t n, std::mt19937_64& rng) {
  std::vector<LabeledUtterance> g;
  for (std::size_t i = 0; i < n; ++i) g.push_back(utt("g" + std::to_string(i % 7), i, rng));
  return g;
}

// Unordered pair identity that ignores the order inside a pair.
std::multiset<std::tuple<std::uint32_t, std::uint32_t, int>> as_multiset(const TrainingPairSet& s) {
  std::multiset<std::tuple<std::uint32_t, std::uint32_t, int>> out;
  for (const auto& p : s.pairs) out.insert({std::min(p.first, p.second), std::max(p.first, p.second), p.target});
  return out;
}

}  // namespace

TEST_SUITE("pair_builder") {
  TEST_CASE("small counts") {
    std::mt19937_64 rng(1);
    const auto two = build_pairs(members(2, 3, rng), {}, std::nullopt, 1);
    CHECK(two.positives == 6);
    CHECK(two.negatives == 9);
    CHECK(two.weight_w == 1.5);

    MemberUtterances one = members(1, 2, rng);
    const auto g = guests(1, rng);
    const auto with_guest = build_pairs(one, g, std::nullopt, 1);
    CHECK(with_guest.positives == 1);
    CHECK(with_guest.negatives == 2);
    CHECK(with_guest.weight_w == 2.0);
  }

  TEST_CASE("four-member household against exhaustive enumeration") {
    std::mt19937_64 rng(2);
    const auto m = members(4, 50, rng);
    const auto g = guests(250, rng);
    const auto set = build_pairs(m, g, std::nullopt, 7);

    // Enumerate every unordered pair of the combined utterance list and
    // classify it independently of the builder.
    std::vector<std::pair<std::string, bool>> all;
    for (const auto& [label, utts] : m) {
      for (std::size_t i = 0; i < utts.size(); ++i) all.emplace_back(label, false);
    }
    for (std::size_t i = 0; i < g.size(); ++i) all.emplace_back("", true);
    std::size_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
      for (std::size_t j = i + 1; j < all.size(); ++j) {
        if (all[i].second && all[j].second) continue;
        if (!all[i].second && !all[j].second && all[i].first == all[j].first) {
          ++pos;
        } else {
          ++neg;
        }
      }
    }
    CHECK(pos == 4900);
    CHECK(neg == 65000);
    CHECK(set.positives == pos);
    CHECK(set.negatives == neg);
    CHECK(set.pairs.size() == pos + neg);
    CHECK(set.weight_w == 65000.0 / 4900.0);
    CHECK(set.weight_w * static_cast<double>(set.positives) == static_cast<double>(set.negatives));
  }

  TEST_CASE("pair labels are consistent") {
    std::mt19937_64 rng(3);
    const auto set = build_pairs(members(3, 12, rng), guests(20, rng), std::nullopt, 3);
    for (const auto& p : set.pairs) {
      CHECK(p.first != p.second);
      const bool guest_pair = set.is_guest[p.first] || set.is_guest[p.second];
      CHECK_FALSE((set.is_guest[p.first] && set.is_guest[p.second]));
      if (p.target) {
        CHECK_FALSE(guest_pair);
        CHECK(set.labels[p.first] == set.labels[p.second]);
      } else {
        CHECK((guest_pair || set.labels[p.first] != set.labels[p.second]));
      }
    }
  }

  TEST_CASE("shuffle is deterministic and only permutes") {
    std::mt19937_64 rng(4);
    const auto m = members(3, 10, rng);
    const auto g = guests(15, rng);
    const auto a = build_pairs(m, g, std::nullopt, 11);
    const auto b = build_pairs(m, g, std::nullopt, 11);
    const auto c = build_pairs(m, g, std::nullopt, 12);
    REQUIRE(a.pairs.size() == b.pairs.size());
    bool identical = true;
    bool reordered = false;
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
      identical &= a.pairs[i].first == b.pairs[i].first && a.pairs[i].second == b.pairs[i].second;
      reordered |= a.pairs[i].first != c.pairs[i].first || a.pairs[i].second != c.pairs[i].second;
    }
    CHECK(identical);
    CHECK(reordered);
    CHECK(as_multiset(a) == as_multiset(c));
  }

  TEST_CASE("guest negative cap") {
    std::mt19937_64 rng(5);
    const auto m = members(3, 10, rng);
    const auto g = guests(40, rng);
    const auto capped = build_pairs(m, g, std::size_t{25}, 1);
    CHECK(capped.positives == 3 * 45);
    CHECK(capped.negatives == 3 * 100 + 3 * 25);
    std::map<std::string, std::size_t> per_member;
    std::set<std::pair<std::uint32_t, std::uint32_t>> distinct;
    for (const auto& p : capped.pairs) {
      if (capped.is_guest[p.second]) {
        ++per_member[capped.labels[p.first]];
        distinct.insert({p.first, p.second});
      }
    }
    for (const auto& [label, n] : per_member) CHECK(n == 25);
    CHECK(distinct.size() == 75);
    const auto loose = build_pairs(m, g, std::size_t{100000}, 1);
    CHECK(loose.negatives == 3 * 100 + 3 * 400);
  }

  TEST_CASE("degenerate inputs") {
    std::mt19937_64 rng(6);
    CHECK_THROWS_AS(build_pairs(members(1, 5, rng), {}, std::nullopt, 1), DegenerateHouseholdError);
    CHECK_THROWS_AS(build_pairs(members(2, 1, rng), {}, std::nullopt, 1), DegenerateHouseholdError);
    CHECK_THROWS_AS(build_pairs({}, {}, std::nullopt, 1), DegenerateHouseholdError);
    auto m = members(2, 3, rng);
    m["m0"][0].embedding = Eigen::VectorXd::Ones(3).normalized();
    CHECK_THROWS_AS(build_pairs(m, {}, std::nullopt, 1), DimensionError);
  }

  TEST_CASE("label corruption") {
    std::mt19937_64 rng(7);
    const std::vector<std::string> labels = {"a", "b", "c", "d"};
    std::vector<LabeledUtterance> utts;
    for (std::size_t i = 0; i < 10000; ++i) utts.push_back({"u" + std::to_string(i), labels[i % 4], Eigen::VectorXd::Ones(2)});

    const auto same = corrupt_labels(utts, labels, 0.0, 1);
    for (std::size_t i = 0; i < utts.size(); ++i) CHECK(same[i].speaker_label == utts[i].speaker_label);

    auto flips = [&](const std::vector<LabeledUtterance>& out) {
      std::size_t n = 0;
      for (std::size_t i = 0; i < utts.size(); ++i) n += out[i].speaker_label != utts[i].speaker_label;
      return static_cast<double>(n) / static_cast<double>(utts.size());
    };
    const auto noisy = corrupt_labels(utts, labels, 0.1, 2);
    CHECK(std::abs(flips(noisy) - 0.075) < 0.01);
    const auto others = corrupt_labels(utts, labels, 0.1, 2, CorruptionDraw::other_member);
    CHECK(std::abs(flips(others) - 0.1) < 0.01);
    for (const auto& u : noisy) CHECK(std::find(labels.begin(), labels.end(), u.speaker_label) != labels.end());

    const auto again = corrupt_labels(utts, labels, 0.1, 2);
    for (std::size_t i = 0; i < utts.size(); ++i) CHECK(again[i].speaker_label == noisy[i].speaker_label);

    const std::vector<std::string> solo = {"a"};
    std::vector<LabeledUtterance> only_a(50, LabeledUtterance{"u", "a", Eigen::VectorXd::Ones(2)});
    for (const auto& u : corrupt_labels(only_a, solo, 1.0, 3)) CHECK(u.speaker_label == "a");
    for (const auto& u : corrupt_labels(only_a, solo, 1.0, 3, CorruptionDraw::other_member)) CHECK(u.speaker_label == "a");

    CHECK_THROWS_AS(corrupt_labels(utts, labels, 1.5, 1), ConfigError);
    CHECK_THROWS_AS(corrupt_labels(utts, labels, -0.1, 1), ConfigError);
    const std::vector<std::string> partial = {"a", "b"};
    CHECK_THROWS_AS(corrupt_labels(utts, partial, 0.1, 1), ConfigError);
  }
}
