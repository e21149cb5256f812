#include "hhscore/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "hhscore/random.hpp"

namespace hhscore {

namespace fs = std::filesystem;

namespace {

// Stream tags for derive_seed.
enum SeedStream : std::uint64_t {
  kHouseholds = 1,
  kCorruption = 2,
  kPairs = 3,
  kInit = 4,
  kTraining = 5,
  kThreshold = 6,
};

std::string format_double(double v, const char* fmt = "%.6f") {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

template <typename F>
void parallel_for(std::size_t count, std::size_t workers, F&& body) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  std::vector<std::exception_ptr> errors(count);
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count && !failed; i = next++) {
          try {
            body(i);
          } catch (...) {
            errors[i] = std::current_exception();
            failed = true;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  // Lowest failing index wins so the reported error does not depend on scheduling.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

[[noreturn]] void rethrow_with_household(std::size_t household) {
  try {
    throw;
  } catch (const Error& e) {
    throw Error(e.module(), "household " + std::to_string(household) + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error("experiment", "household " + std::to_string(household) + ": " + e.what());
  }
}

TrainingPairSet merge_pair_sets(const std::vector<TrainingPairSet>& sets) {
  TrainingPairSet merged;
  Eigen::Index cols = 0;
  for (const auto& s : sets) cols += s.embeddings.cols();
  merged.embeddings.resize(sets.front().dim(), cols);
  Eigen::Index offset = 0;
  for (const auto& s : sets) {
    merged.embeddings.middleCols(offset, s.embeddings.cols()) = s.embeddings;
    merged.labels.insert(merged.labels.end(), s.labels.begin(), s.labels.end());
    merged.is_guest.insert(merged.is_guest.end(), s.is_guest.begin(), s.is_guest.end());
    for (auto p : s.pairs) {
      p.first += static_cast<std::uint32_t>(offset);
      p.second += static_cast<std::uint32_t>(offset);
      merged.pairs.push_back(p);
    }
    merged.positives += s.positives;
    merged.negatives += s.negatives;
    offset += s.embeddings.cols();
  }
  merged.weight_w = static_cast<double>(merged.negatives) / static_cast<double>(merged.positives);
  return merged;
}

TrainConfig mode_train_config(const ExperimentConfig& cfg, ScoringMode mode, std::size_t stream) {
  TrainConfig t = cfg.train;
  t.fuse_global = mode == ScoringMode::fused;
  t.seed = derive_seed(cfg.seed, {kTraining, stream, cfg.train.seed});
  return t;
}

nlohmann::json provenance_json(const ExperimentConfig& cfg) {
  auto j = to_json(cfg);
  // Where results go and how many threads produce them do not change them.
  j.erase("output_dir");
  j.erase("workers");
  return j;
}

}  // namespace

const char* to_string(ScoringMode mode) {
  switch (mode) {
    case ScoringMode::baseline: return "baseline";
    case ScoringMode::local_only: return "local_only";
    case ScoringMode::fused: return "fused";
  }
  return "?";
}

const char* to_string(Hardness h) { return h == Hardness::hard ? "hard" : "random"; }

const char* to_string(LabelSource s) {
  switch (s) {
    case LabelSource::truth: return "truth";
    case LabelSource::corrupted: return "corrupted";
    case LabelSource::pseudo: return "pseudo";
  }
  return "?";
}

const char* to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::dropout: return "dropout";
    case SweepAxis::epsilon: return "epsilon";
    case SweepAxis::household_size: return "household_size";
  }
  return "?";
}

ScoringMode parse_scoring_mode(const std::string& s) {
  if (s == "baseline") return ScoringMode::baseline;
  if (s == "local_only" || s == "local-only") return ScoringMode::local_only;
  if (s == "fused") return ScoringMode::fused;
  throw ConfigError("unknown scoring mode '" + s + "' (baseline | local_only | fused)");
}

Hardness parse_hardness(const std::string& s) {
  if (s == "random") return Hardness::random;
  if (s == "hard") return Hardness::hard;
  throw ConfigError("unknown hardness '" + s + "' (random | hard)");
}

LabelSource parse_label_source(const std::string& s) {
  if (s == "truth") return LabelSource::truth;
  if (s == "corrupted") return LabelSource::corrupted;
  if (s == "pseudo") return LabelSource::pseudo;
  throw ConfigError("unknown label source '" + s + "' (truth | corrupted | pseudo)");
}

Optimizer parse_optimizer(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "adam") return Optimizer::adam;
  throw ConfigError("unknown optimizer '" + s + "' (sgd | adam)");
}

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "dropout") return SweepAxis::dropout;
  if (s == "epsilon") return SweepAxis::epsilon;
  if (s == "household_size" || s == "household-size") return SweepAxis::household_size;
  throw ConfigError("unknown sweep axis '" + s + "' (dropout | epsilon | household_size)");
}

void ExperimentConfig::validate() const {
  if (household_size == 0) throw ConfigError("household_size must be positive");
  if (household_count == 0) throw ConfigError("household_count must be positive");
  if (!(percentile >= 0 && percentile <= 100)) throw ConfigError("percentile must lie in [0, 100]");
  if (adapted_dim <= 0) throw ConfigError("adapted_dim must be positive");
  if (!(epsilon >= 0 && epsilon <= 1)) throw ConfigError("epsilon must lie in [0, 1]");
  if (modes.empty()) throw ConfigError("at least one scoring mode is required");
  if (workers == 0) throw ConfigError("workers must be positive");
  train.validate();
}

bool ExperimentConfig::has_mode(ScoringMode m) const {
  return std::find(modes.begin(), modes.end(), m) != modes.end();
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["corpus"] = cfg.corpus_paths;
  j["household_size"] = cfg.household_size;
  j["household_count"] = cfg.household_count;
  j["hardness"] = to_string(cfg.hardness);
  j["percentile"] = cfg.percentile;
  j["threshold"] = cfg.threshold ? nlohmann::json(*cfg.threshold) : nlohmann::json(nullptr);
  j["threshold_sample_budget"] = cfg.threshold_sample_budget;
  j["speaker_level_utterances"] = cfg.speaker_level_utterances;
  j["clique_restarts"] = cfg.clique_restarts;
  j["enroll"] = cfg.splits.enroll;
  j["eval"] = cfg.splits.eval;
  j["max_train"] = cfg.splits.max_train;
  j["guests"] = cfg.splits.guests;
  j["train_guests"] = cfg.splits.train_guests;
  j["cap_guest_negatives"] =
      cfg.cap_guest_negatives ? nlohmann::json(*cfg.cap_guest_negatives) : nlohmann::json(nullptr);
  j["adapted_dim"] = cfg.adapted_dim;
  j["epochs"] = cfg.train.epochs;
  j["learning_rate"] = cfg.train.learning_rate;
  j["batch_size"] = cfg.train.batch_size;
  j["dropout"] = cfg.train.dropout_rate;
  j["optimizer"] = to_string(cfg.train.optimizer);
  j["distance_epsilon"] = cfg.train.distance_epsilon;
  j["adam_beta1"] = cfg.train.adam_beta1;
  j["adam_beta2"] = cfg.train.adam_beta2;
  j["adam_epsilon"] = cfg.train.adam_epsilon;
  j["train_seed"] = cfg.train.seed;
  j["labels"] = to_string(cfg.labels);
  j["epsilon"] = cfg.epsilon;
  j["corruption_draw"] = cfg.corruption_draw == CorruptionDraw::any_member ? "any_member" : "other_member";
  j["pseudo_min_top_score"] = cfg.pseudo_filter.min_top_score;
  j["pseudo_min_margin"] = cfg.pseudo_filter.min_margin;
  auto modes = nlohmann::json::array();
  for (auto m : cfg.modes) modes.push_back(to_string(m));
  j["modes"] = modes;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["workers"] = cfg.workers;
  j["shared_model"] = cfg.shared_model;
  j["save_models"] = cfg.save_models;
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig cfg) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "corpus") {
        cfg.corpus_paths = v.is_string() ? std::vector<std::string>{v.get<std::string>()}
                                         : v.get<std::vector<std::string>>();
      } else if (key == "household_size") cfg.household_size = v.get<std::size_t>();
      else if (key == "household_count") cfg.household_count = v.get<std::size_t>();
      else if (key == "hardness") cfg.hardness = parse_hardness(v.get<std::string>());
      else if (key == "percentile") cfg.percentile = v.get<double>();
      else if (key == "threshold") cfg.threshold = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
      else if (key == "threshold_sample_budget") cfg.threshold_sample_budget = v.get<std::size_t>();
      else if (key == "speaker_level_utterances") cfg.speaker_level_utterances = v.get<std::size_t>();
      else if (key == "clique_restarts") cfg.clique_restarts = v.get<std::size_t>();
      else if (key == "enroll") cfg.splits.enroll = v.get<std::size_t>();
      else if (key == "eval") cfg.splits.eval = v.get<std::size_t>();
      else if (key == "max_train") cfg.splits.max_train = v.get<std::size_t>();
      else if (key == "guests") cfg.splits.guests = v.get<std::size_t>();
      else if (key == "train_guests") cfg.splits.train_guests = v.get<std::size_t>();
      else if (key == "cap_guest_negatives") {
        cfg.cap_guest_negatives = v.is_null() ? std::nullopt : std::optional<std::size_t>(v.get<std::size_t>());
      } else if (key == "adapted_dim") cfg.adapted_dim = v.get<Eigen::Index>();
      else if (key == "epochs") cfg.train.epochs = v.get<int>();
      else if (key == "learning_rate") cfg.train.learning_rate = v.get<double>();
      else if (key == "batch_size") cfg.train.batch_size = v.get<std::size_t>();
      else if (key == "dropout") cfg.train.dropout_rate = v.get<double>();
      else if (key == "optimizer") cfg.train.optimizer = parse_optimizer(v.get<std::string>());
      else if (key == "distance_epsilon") cfg.train.distance_epsilon = v.get<double>();
      else if (key == "adam_beta1") cfg.train.adam_beta1 = v.get<double>();
      else if (key == "adam_beta2") cfg.train.adam_beta2 = v.get<double>();
      else if (key == "adam_epsilon") cfg.train.adam_epsilon = v.get<double>();
      else if (key == "train_seed") cfg.train.seed = v.get<std::uint64_t>();
      else if (key == "labels") cfg.labels = parse_label_source(v.get<std::string>());
      else if (key == "epsilon") cfg.epsilon = v.get<double>();
      else if (key == "corruption_draw") {
        const auto s = v.get<std::string>();
        if (s == "any_member") cfg.corruption_draw = CorruptionDraw::any_member;
        else if (s == "other_member") cfg.corruption_draw = CorruptionDraw::other_member;
        else throw ConfigError("unknown corruption_draw '" + s + "' (any_member | other_member)");
      } else if (key == "pseudo_min_top_score") cfg.pseudo_filter.min_top_score = v.get<double>();
      else if (key == "pseudo_min_margin") cfg.pseudo_filter.min_margin = v.get<double>();
      else if (key == "modes") {
        cfg.modes.clear();
        for (const auto& m : v) cfg.modes.push_back(parse_scoring_mode(m.get<std::string>()));
      } else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
      else if (key == "output_dir") cfg.output_dir = v.get<std::string>();
      else if (key == "workers") cfg.workers = v.get<std::size_t>();
      else if (key == "shared_model") cfg.shared_model = v.get<bool>();
      else if (key == "save_models") cfg.save_models = v.get<bool>();
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return cfg;
}

const ModeResult& ExperimentResult::mode(ScoringMode m) const {
  for (const auto& r : modes) {
    if (r.mode == m) return r;
  }
  throw ConfigError(std::string("mode '") + to_string(m) + "' was not run");
}

Corpus load_experiment_corpus(const ExperimentConfig& cfg) {
  if (cfg.corpus_paths.empty()) throw ConfigError("no corpus path given");
  if (cfg.corpus_paths.size() == 1) return load_corpus(cfg.corpus_paths.front());
  Corpus merged;
  for (const auto& path : cfg.corpus_paths) {
    const Corpus part = load_corpus(path);
    for (const auto& spk : part.speakers()) {
      if (merged.contains(spk.id)) throw FormatError("speaker '" + spk.id + "' appears in more than one corpus");
      for (std::size_t u = 0; u < spk.size(); ++u) merged.add(spk.id, spk.utterance_ids[u], spk.embeddings[u]);
    }
  }
  return merged;
}

std::vector<Household> generate_households(const Corpus& corpus, const ExperimentConfig& cfg,
                                           std::optional<double>* threshold_out) {
  const std::uint64_t seed = derive_seed(cfg.seed, {kHouseholds});
  if (cfg.hardness == Hardness::random) {
    return generate_random_households(corpus, cfg.household_size, cfg.household_count, seed, cfg.splits);
  }
  const double threshold = cfg.threshold ? *cfg.threshold
                                         : similarity_threshold(corpus, cfg.percentile, cfg.threshold_sample_budget,
                                                                derive_seed(cfg.seed, {kThreshold}));
  if (threshold_out) *threshold_out = threshold;
  HardHouseholdConfig search;
  search.speaker_level_utterances = cfg.speaker_level_utterances;
  search.restarts_per_household = cfg.clique_restarts;
  return generate_hard_households(corpus, cfg.household_size, cfg.household_count, threshold, seed, cfg.splits,
                                  search);
}

MemberUtterances household_training_utterances(const Household& household, const Corpus& corpus,
                                               const ExperimentConfig& cfg) {
  std::vector<LabeledUtterance> utts;
  for (const auto& m : household.members) {
    for (const auto& u : m.train) utts.push_back({u, m.speaker_id, corpus.embedding(m.speaker_id, u)});
  }

  if (cfg.labels == LabelSource::corrupted) {
    const auto labels = household.member_ids();
    utts = corrupt_labels(utts, labels, cfg.epsilon, derive_seed(cfg.seed, {kCorruption, household.id}),
                          cfg.corruption_draw);
  } else if (cfg.labels == LabelSource::pseudo) {
    const auto profiles = household_profiles(household, corpus);
    std::vector<LabeledUtterance> kept;
    for (auto& u : utts) {
      const auto id = identify(BaselineScorer{}, profiles, u.embedding);
      std::vector<double> sorted = id.scores;
      std::sort(sorted.rbegin(), sorted.rend());
      const double rank2 = sorted.size() > 1 ? sorted[1] : -std::numeric_limits<double>::infinity();
      if (cfg.pseudo_filter.accepts(id.s_max, rank2)) {
        u.speaker_label = id.predicted;
        kept.push_back(std::move(u));
      }
    }
    utts = std::move(kept);
  }

  MemberUtterances grouped;
  for (auto& u : utts) grouped[u.speaker_label].push_back(std::move(u));
  return grouped;
}

std::vector<LabeledUtterance> household_training_guests(const Household& household, const Corpus& corpus) {
  std::vector<LabeledUtterance> guests;
  for (const auto& g : household.train_guests) {
    guests.push_back({g.utterance_id, g.speaker_id, corpus.embedding(g.speaker_id, g.utterance_id)});
  }
  return guests;
}

ExperimentResult run_experiment(const Corpus& corpus, const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.adapted_dim >= corpus.dim()) {
    throw DimensionError("adapted_dim " + std::to_string(cfg.adapted_dim) + " must be below D=" +
                         std::to_string(corpus.dim()));
  }
  ExperimentResult result;
  result.config = cfg;
  result.households = generate_households(corpus, cfg, &result.threshold);
  const std::size_t count = result.households.size();

  std::vector<ScoringMode> trained;
  for (auto m : cfg.modes) {
    if (m != ScoringMode::baseline && std::find(trained.begin(), trained.end(), m) == trained.end()) {
      trained.push_back(m);
    }
  }

  auto build_household_pairs = [&](std::size_t h) {
    const auto& household = result.households[h];
    return build_pairs(household_training_utterances(household, corpus, cfg),
                       household_training_guests(household, corpus), cfg.cap_guest_negatives,
                       derive_seed(cfg.seed, {kPairs, household.id}));
  };

  // models[h * trained.size() + k]
  std::vector<TrainedHousehold> models;
  if (cfg.shared_model && !trained.empty()) {
    std::vector<TrainingPairSet> sets(count);
    parallel_for(count, cfg.workers, [&](std::size_t h) {
      try {
        sets[h] = build_household_pairs(h);
      } catch (...) {
        rethrow_with_household(result.households[h].id);
      }
    });
    const TrainingPairSet merged = merge_pair_sets(sets);
    sets.clear();
    std::vector<TrainedHousehold> shared(trained.size());
    parallel_for(trained.size(), cfg.workers, [&](std::size_t k) {
      const auto init = init_model(corpus.dim(), cfg.adapted_dim, derive_seed(cfg.seed, {kInit, 0xFFFF}));
      auto [model, report] = train(init, merged, mode_train_config(cfg, trained[k], 0xFFFF));
      shared[k] = {0, trained[k], std::move(model), std::move(report)};
    });
    for (std::size_t h = 0; h < count; ++h) {
      for (const auto& s : shared) models.push_back({result.households[h].id, s.mode, s.model, s.report});
    }
  } else if (!trained.empty()) {
    models.resize(count * trained.size());
    parallel_for(count, cfg.workers, [&](std::size_t h) {
      const auto& household = result.households[h];
      try {
        const TrainingPairSet pairs = build_household_pairs(h);
        const auto init = init_model(corpus.dim(), cfg.adapted_dim, derive_seed(cfg.seed, {kInit, household.id}));
        for (std::size_t k = 0; k < trained.size(); ++k) {
          auto [model, report] = train(init, pairs, mode_train_config(cfg, trained[k], household.id));
          models[h * trained.size() + k] = {household.id, trained[k], std::move(model), std::move(report)};
        }
      } catch (...) {
        rethrow_with_household(household.id);
      }
    });
  }

  std::vector<ScoringMode> evaluated = {ScoringMode::baseline};
  evaluated.insert(evaluated.end(), trained.begin(), trained.end());
  for (auto m : evaluated) result.modes.push_back({m, 0, 0, 0, std::vector<std::vector<Trial>>(count)});

  parallel_for(count, cfg.workers, [&](std::size_t h) {
    const auto& household = result.households[h];
    try {
      result.modes[0].trials[h] = evaluate_household(BaselineScorer{}, household, corpus);
      for (std::size_t k = 0; k < trained.size(); ++k) {
        const auto& model = models[h * trained.size() + k].model;
        result.modes[k + 1].trials[h] = evaluate_household(ModelScorer{&model}, household, corpus);
      }
    } catch (...) {
      rethrow_with_household(household.id);
    }
  });

  for (auto& r : result.modes) {
    r.eer_pooled = aggregate_eer(r.trials, Aggregation::pooled);
    r.eer_mean = aggregate_eer(r.trials, Aggregation::mean_per_household);
  }
  const double base = result.modes[0].eer_pooled;
  for (auto& r : result.modes) {
    r.relative_improvement = base > 0 ? 1.0 - r.eer_pooled / base : std::nan("");
  }
  result.models = std::move(models);
  return result;
}

std::string results_header() {
  return "seed\tN\thardness\tmode\tdropout\tepsilon\tlabels\teer_pooled\teer_mean\trel_improvement\thouseholds\ttrials\n";
}

std::string results_rows(const ExperimentResult& result, const std::string& prefix) {
  const auto& cfg = result.config;
  std::ostringstream out;
  for (const auto& r : result.modes) {
    std::size_t trials = 0;
    for (const auto& t : r.trials) trials += t.size();
    const bool trained = r.mode != ScoringMode::baseline;
    out << prefix << cfg.seed << '\t' << cfg.household_size << '\t' << to_string(cfg.hardness) << '\t'
        << to_string(r.mode) << '\t' << (trained ? format_double(cfg.train.dropout_rate, "%g") : "-") << '\t'
        << format_double(cfg.labels == LabelSource::corrupted ? cfg.epsilon : 0.0, "%g") << '\t'
        << to_string(cfg.labels) << '\t' << format_double(r.eer_pooled) << '\t' << format_double(r.eer_mean)
        << '\t' << format_double(r.relative_improvement, "%.4f") << '\t' << r.trials.size() << '\t' << trials
        << '\n';
  }
  return out.str();
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string config_comment(const ExperimentConfig& cfg) {
  return "# config " + provenance_json(cfg).dump() + "\n";
}

}  // namespace

void write_experiment_outputs(const ExperimentResult& result, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);
  const auto& cfg = result.config;
  std::string threshold_line;
  if (result.threshold) threshold_line = "# similarity_threshold " + format_double(*result.threshold, "%.17g") + "\n";

  write_file(root / "results.tsv", config_comment(cfg) + threshold_line + results_header() + results_rows(result));
  write_file(root / "config.json", provenance_json(cfg).dump(2) + "\n");
  save_manifest(result.households, (root / "households.json").string());

  for (const auto& r : result.modes) {
    std::ostringstream trials;
    trials << config_comment(cfg);
    bool header = true;
    for (const auto& t : r.trials) {
      write_trials(trials, t, header);
      header = false;
    }
    write_file(root / (std::string("trials_") + to_string(r.mode) + ".tsv"), trials.str());
  }

  std::ostringstream curves;
  curves << config_comment(cfg) << "household_id\tmode\tepoch\tmean_loss\n";
  for (const auto& m : result.models) {
    for (std::size_t e = 0; e < m.report.epoch_losses.size(); ++e) {
      curves << m.household_id << '\t' << to_string(m.mode) << '\t' << e + 1 << '\t'
             << format_double(m.report.epoch_losses[e], "%.17g") << '\n';
    }
  }
  write_file(root / "training_curves.tsv", curves.str());

  if (cfg.save_models) {
    for (const auto& m : result.models) {
      const fs::path mode_dir = root / "models" / to_string(m.mode);
      fs::create_directories(mode_dir);
      char name[64];
      if (cfg.shared_model) {
        std::snprintf(name, sizeof name, "shared.hhsm");
      } else {
        std::snprintf(name, sizeof name, "household_%04zu.hhsm", m.household_id);
      }
      save_model(m.model, (mode_dir / name).string());
    }
  }
}

SweepResult run_sweep(const Corpus& corpus, const ExperimentConfig& base, SweepAxis axis,
                      const std::vector<double>& values, const std::vector<std::uint64_t>& seeds) {
  if (values.empty()) throw ConfigError(std::string("sweep over ") + to_string(axis) + " needs at least one value");
  SweepResult sweep;
  sweep.axis = axis;
  sweep.values = values;
  sweep.seeds = seeds.empty() ? std::vector<std::uint64_t>{base.seed} : seeds;
  for (const double v : values) {
    for (const auto seed : sweep.seeds) {
      ExperimentConfig cfg = base;
      cfg.seed = seed;
      switch (axis) {
        case SweepAxis::dropout:
          cfg.train.dropout_rate = v;
          break;
        case SweepAxis::epsilon:
          cfg.epsilon = v;
          cfg.labels = LabelSource::corrupted;
          break;
        case SweepAxis::household_size:
          if (!(v >= 1) || v != std::floor(v)) throw ConfigError("household sizes must be positive integers");
          cfg.household_size = static_cast<std::size_t>(v);
          break;
      }
      sweep.runs.push_back(run_experiment(corpus, cfg));
    }
  }
  return sweep;
}

void write_sweep_outputs(const SweepResult& sweep, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);
  std::ostringstream table;
  table << config_comment(sweep.runs.front().config);
  table << "axis\tvalue\t" << results_header();
  std::size_t run = 0;
  for (const double v : sweep.values) {
    for (const auto seed : sweep.seeds) {
      const auto& r = sweep.runs[run++];
      const std::string value = format_double(v, "%g");
      table << results_rows(r, std::string(to_string(sweep.axis)) + "\t" + value + "\t");
      write_experiment_outputs(r, (root / (std::string(to_string(sweep.axis)) + "_" + value + "_seed" +
                                           std::to_string(seed)))
                                      .string());
    }
  }
  write_file(root / "results.tsv", table.str());
}

void export_adapted(const HouseholdScoringModel& model, const Corpus& corpus, const Household& household,
                    const std::string& path) {
  if (model.input_dim() != corpus.dim()) {
    throw DimensionError("model expects D=" + std::to_string(model.input_dim()) + ", corpus has D=" +
                         std::to_string(corpus.dim()));
  }
  std::ostringstream out;
  out << "household_id\tspeaker\tsplit\tutterance";
  for (Eigen::Index i = 0; i < model.input_dim(); ++i) out << "\te" << i;
  for (Eigen::Index k = 0; k < model.adapted_dim(); ++k) out << "\ta" << k;
  out << '\n';
  auto row = [&](const std::string& speaker, const char* split, const std::string& utterance) {
    const auto& e = corpus.embedding(speaker, utterance);
    const auto adapted = adapt(model, e);
    out << household.id << '\t' << speaker << '\t' << split << '\t' << utterance;
    for (Eigen::Index i = 0; i < e.size(); ++i) out << '\t' << format_double(e(i), "%.17g");
    for (Eigen::Index k = 0; k < adapted.size(); ++k) out << '\t' << format_double(adapted(k), "%.17g");
    out << '\n';
  };
  for (const auto& m : household.members) {
    for (const auto& u : m.enroll) row(m.speaker_id, "enroll", u);
    for (const auto& u : m.eval) row(m.speaker_id, "eval", u);
    for (const auto& u : m.train) row(m.speaker_id, "train", u);
  }
  for (const auto& g : household.guests) row(g.speaker_id, "guest", g.utterance_id);
  for (const auto& g : household.train_guests) row(g.speaker_id, "train_guest", g.utterance_id);
  write_file(path, out.str());
}

}  // namespace hhscore
