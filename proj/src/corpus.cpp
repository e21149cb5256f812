#include "hhscore/corpus.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "binary_io.hpp"

namespace hhscore {

namespace {
constexpr std::uint16_t kCorpusVersion = 1;

EmbeddingVector from_storage(const Eigen::VectorXf& stored, const std::string& where) {
  try {
    return l2_normalize(stored.cast<double>());
  } catch (const NormalizationError&) {
    throw FormatError(where + ": zero embedding");
  }
}
}  // namespace

std::size_t Corpus::utterance_count() const {
  std::size_t n = 0;
  for (const auto& s : speakers_) n += s.size();
  return n;
}

void Corpus::add(const std::string& speaker_id, const std::string& utterance_id,
                 EmbeddingVector embedding) {
  if (dim_ == 0) dim_ = embedding.size();
  if (embedding.size() != dim_) {
    throw DimensionError("utterance '" + utterance_id + "' has dimension " +
                         std::to_string(embedding.size()) + ", corpus has " + std::to_string(dim_));
  }
  auto [it, inserted] = index_.try_emplace(speaker_id, speakers_.size());
  if (inserted) {
    speakers_.push_back({speaker_id, {}, {}});
    utterance_index_.emplace_back();
  }
  SpeakerRecord& rec = speakers_[it->second];
  auto& utt_index = utterance_index_[it->second];
  if (!utt_index.try_emplace(utterance_id, rec.size()).second) {
    throw FormatError("duplicate utterance '" + utterance_id + "' for speaker '" + speaker_id + "'");
  }
  rec.utterance_ids.push_back(utterance_id);
  rec.embeddings.push_back(std::move(embedding));
}

std::size_t Corpus::speaker_index(const std::string& speaker_id) const {
  const auto it = index_.find(speaker_id);
  if (it == index_.end()) throw NotFoundError("unknown speaker '" + speaker_id + "'");
  return it->second;
}

const EmbeddingVector& Corpus::embedding(const std::string& speaker_id,
                                         const std::string& utterance_id) const {
  const std::size_t s = speaker_index(speaker_id);
  const auto& utt_index = utterance_index_[s];
  const auto it = utt_index.find(utterance_id);
  if (it == utt_index.end()) {
    throw NotFoundError("unknown utterance '" + utterance_id + "' for speaker '" + speaker_id + "'");
  }
  return speakers_[s].embeddings[it->second];
}

bool operator==(const Corpus& a, const Corpus& b) {
  if (a.dim() != b.dim() || a.speaker_count() != b.speaker_count()) return false;
  for (std::size_t s = 0; s < a.speaker_count(); ++s) {
    const auto& x = a.speakers()[s];
    const auto& y = b.speakers()[s];
    if (x.id != y.id || x.utterance_ids != y.utterance_ids) return false;
    for (std::size_t u = 0; u < x.size(); ++u) {
      if (x.embeddings[u] != y.embeddings[u]) return false;
    }
  }
  return true;
}

void save_corpus_binary(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write("HHEB", 4);
  detail::write_le(out, kCorpusVersion);
  detail::write_le(out, static_cast<std::uint32_t>(corpus.dim()));
  detail::write_le(out, static_cast<std::uint64_t>(corpus.utterance_count()));
  for (const auto& spk : corpus.speakers()) {
    for (std::size_t u = 0; u < spk.size(); ++u) {
      detail::write_string(out, spk.id);
      detail::write_string(out, spk.utterance_ids[u]);
      for (Eigen::Index i = 0; i < corpus.dim(); ++i) {
        detail::write_f32(out, static_cast<float>(spk.embeddings[u](i)));
      }
    }
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

Corpus load_corpus_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus '" + path + "'");
  detail::expect_magic(in, "HHEB", path);
  const auto version = detail::read_le<std::uint16_t>(in);
  if (version != kCorpusVersion) {
    throw FormatError(path + ": unsupported corpus version " + std::to_string(version));
  }
  const auto dim = detail::read_le<std::uint32_t>(in);
  const auto records = detail::read_le<std::uint64_t>(in);
  if (dim == 0) throw FormatError(path + ": zero embedding dimension");
  Corpus corpus(dim);
  Eigen::VectorXf stored(dim);
  for (std::uint64_t r = 0; r < records; ++r) {
    std::string speaker = detail::read_string(in);
    std::string utterance = detail::read_string(in);
    for (std::uint32_t i = 0; i < dim; ++i) stored(i) = detail::read_f32(in);
    corpus.add(speaker, utterance, from_storage(stored, path + " record " + std::to_string(r)));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path + ": trailing bytes");
  return corpus;
}

void save_corpus_text(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  char buf[32];
  for (const auto& spk : corpus.speakers()) {
    for (std::size_t u = 0; u < spk.size(); ++u) {
      out << spk.id << '\t' << spk.utterance_ids[u] << '\t';
      for (Eigen::Index i = 0; i < corpus.dim(); ++i) {
        if (i) out << ',';
        const auto res = std::to_chars(buf, buf + sizeof buf, static_cast<float>(spk.embeddings[u](i)));
        out.write(buf, res.ptr - buf);
      }
      out << '\n';
    }
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

Corpus load_corpus_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus '" + path + "'");
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  std::vector<float> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto where = path + ":" + std::to_string(line_no);
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw FormatError(where + ": expected three tab-separated fields");
    values.clear();
    const char* p = line.data() + t2 + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      float v = 0;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc{}) throw FormatError(where + ": bad embedding value");
      values.push_back(v);
      p = res.ptr;
      if (p < end) {
        if (*p != ',') throw FormatError(where + ": expected ',' between values");
        ++p;
      }
    }
    if (values.empty()) throw FormatError(where + ": empty embedding");
    const Eigen::VectorXf stored = Eigen::Map<const Eigen::VectorXf>(values.data(), static_cast<Eigen::Index>(values.size()));
    corpus.add(line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), from_storage(stored, where));
  }
  return corpus;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus '" + path + "'");
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::string(magic, 4) == "HHEB") return load_corpus_binary(path);
  return load_corpus_text(path);
}

EmbeddingVector snap_to_storage(const EmbeddingVector& v) {
  EmbeddingVector current = l2_normalize(v);
  for (int iter = 0; iter < 16; ++iter) {
    const Eigen::VectorXf stored = current.cast<float>();
    EmbeddingVector loaded = l2_normalize(stored.cast<double>());
    const bool stable = loaded.cast<float>() == stored;
    current = std::move(loaded);
    if (stable) break;
  }
  return current;
}

void SyntheticConfig::validate() const {
  if (speaker_count == 0 || utterances_per_speaker == 0) throw ConfigError("empty synthetic corpus");
  if (dim <= 0) throw ConfigError("dimension must be positive");
  if (identity_subspace_dim <= 0 || identity_subspace_dim > dim) {
    throw ConfigError("identity subspace dimension must lie in [1, D]");
  }
  if (!(within_speaker_noise >= 0) || !(household_nuisance_scale >= 0)) {
    throw ConfigError("noise scales must be non-negative");
  }
  if (household_nuisance_scale > 0 && identity_subspace_dim == dim) {
    throw ConfigError("nuisance needs a complementary subspace (identity_subspace_dim < D)");
  }
  if (environment_group_size == 0) throw ConfigError("environment group size must be positive");
  if (nuisance_rank < 0 || nuisance_rank > dim - identity_subspace_dim) {
    throw ConfigError("nuisance rank must lie in [0, D - identity_subspace_dim]");
  }
}

Corpus generate_synthetic_corpus(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
    }
    return m;
  };

  const Eigen::Index dim = cfg.dim;
  const Eigen::Index id_dim = cfg.identity_subspace_dim;
  const Eigen::Index nuisance_dim = dim - id_dim;
  const Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian(dim, dim)).householderQ();
  const Eigen::MatrixXd identity_basis = basis.leftCols(id_dim);
  const Eigen::MatrixXd nuisance_basis = basis.rightCols(nuisance_dim);

  const std::size_t group_size = cfg.share_nuisance ? cfg.environment_group_size : 1;
  const std::size_t groups = (cfg.speaker_count + group_size - 1) / group_size;
  std::vector<Eigen::VectorXd> nuisance(groups, Eigen::VectorXd::Zero(dim));
  std::vector<Eigen::MatrixXd> nuisance_span(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    if (nuisance_dim == 0) break;
    nuisance[g] = l2_normalize(nuisance_basis * gaussian(nuisance_dim, 1));
    if (cfg.nuisance_rank > 0) {
      const Eigen::MatrixXd q =
          Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian(nuisance_dim, cfg.nuisance_rank)).householderQ();
      nuisance_span[g] = nuisance_basis * q.leftCols(cfg.nuisance_rank);
    }
  }
  const double span_scale =
      cfg.nuisance_rank > 0 ? cfg.household_nuisance_scale / std::sqrt(static_cast<double>(cfg.nuisance_rank)) : 0;

  const double noise_scale = cfg.within_speaker_noise / std::sqrt(static_cast<double>(dim));
  Corpus corpus(dim);
  char name[64];
  for (std::size_t s = 0; s < cfg.speaker_count; ++s) {
    const Eigen::VectorXd mean = l2_normalize(identity_basis * gaussian(id_dim, 1));
    const std::size_t g = s / group_size;
    const Eigen::VectorXd offset = mean + cfg.household_nuisance_scale * nuisance[g];
    std::snprintf(name, sizeof name, "spk%05zu", s);
    const std::string speaker = name;
    for (std::size_t u = 0; u < cfg.utterances_per_speaker; ++u) {
      Eigen::VectorXd x = offset + noise_scale * gaussian(dim, 1);
      if (cfg.nuisance_rank > 0) x += span_scale * (nuisance_span[g] * gaussian(cfg.nuisance_rank, 1));
      std::snprintf(name, sizeof name, "%s-u%04zu", speaker.c_str(), u);
      corpus.add(speaker, name, snap_to_storage(x));
    }
  }
  return corpus;
}

}  // namespace hhscore
