#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "hhscore/embedding.hpp"

namespace hhscore {

struct SpeakerRecord {
  std::string id;
  std::vector<std::string> utterance_ids;
  std::vector<EmbeddingVector> embeddings;

  std::size_t size() const { return embeddings.size(); }
};

/// Speakers with their unit-norm utterance embeddings, all of dimension D.
/// Speakers keep insertion order, which is also file order.
class Corpus {
 public:
  explicit Corpus(Eigen::Index dim = 0) : dim_(dim) {}

  Eigen::Index dim() const { return dim_; }
  const std::vector<SpeakerRecord>& speakers() const { return speakers_; }
  std::size_t speaker_count() const { return speakers_.size(); }
  std::size_t utterance_count() const;

  /// Stores `embedding` as given; it must already be unit-norm.
  void add(const std::string& speaker_id, const std::string& utterance_id, EmbeddingVector embedding);

  bool contains(const std::string& speaker_id) const { return index_.contains(speaker_id); }
  std::size_t speaker_index(const std::string& speaker_id) const;  // NotFoundError
  const SpeakerRecord& speaker(const std::string& speaker_id) const { return speakers_[speaker_index(speaker_id)]; }
  const EmbeddingVector& embedding(const std::string& speaker_id, const std::string& utterance_id) const;

 private:
  Eigen::Index dim_;
  std::vector<SpeakerRecord> speakers_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::unordered_map<std::string, std::size_t>> utterance_index_;
};

bool operator==(const Corpus& a, const Corpus& b);

// Binary corpus: "HHEB", u16 version, u32 D, u64 record count; per record a
// u32-length-prefixed UTF-8 speaker id, the same for the utterance id, then D
// little-endian f32 values. Loading re-normalizes and promotes to f64.
void save_corpus_binary(const Corpus& corpus, const std::string& path);
Corpus load_corpus_binary(const std::string& path);

// Text corpus: "speaker<TAB>utterance<TAB>v0,v1,..." per line, values at f32
// precision (shortest round-trip form).
void save_corpus_text(const Corpus& corpus, const std::string& path);
Corpus load_corpus_text(const std::string& path);

/// Picks the reader from the file's leading bytes.
Corpus load_corpus(const std::string& path);

/// Rounds a unit vector to f32 storage and re-normalizes, repeating until the
/// result is a fixed point of store-then-load. Vectors produced this way
/// round-trip through either corpus format bit for bit.
EmbeddingVector snap_to_storage(const EmbeddingVector& v);

struct SyntheticConfig {
  std::size_t speaker_count = 300;
  std::size_t utterances_per_speaker = 80;
  Eigen::Index dim = 64;
  Eigen::Index identity_subspace_dim = 8;
  double within_speaker_noise = 1.5;
  double household_nuisance_scale = 1.0;
  // Speakers are partitioned into consecutive groups of this size that share
  // an acoustic-environment (nuisance) direction. 1 gives every speaker its own.
  std::size_t environment_group_size = 6;
  // Rank of the per-utterance part of the nuisance: each group owns a random
  // subspace of this size and every utterance draws a fresh offset in it
  // (0 keeps the nuisance a fixed per-group shift).
  Eigen::Index nuisance_rank = 4;
  bool share_nuisance = true;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Speaker means live in a random identity subspace; every utterance adds
/// isotropic noise and a nuisance offset from the complementary subspace
/// (the group's shift plus a random point of the group's nuisance subspace),
/// then is normalized and snapped to storage precision.
Corpus generate_synthetic_corpus(const SyntheticConfig& cfg);

}  // namespace hhscore
