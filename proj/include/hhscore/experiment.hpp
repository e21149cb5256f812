#pragma once

// Reproducible experiment pipeline behind the command-line tool: household
// simulation, optional label corruption, per-household training and
// evaluation of every scoring mode on the same trials.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hhscore/corpus.hpp"
#include "hhscore/evaluation.hpp"
#include "hhscore/household.hpp"
#include "hhscore/pairs.hpp"
#include "hhscore/trainer.hpp"

namespace hhscore {

enum class Hardness { random, hard };
enum class ScoringMode { baseline, local_only, fused };
enum class LabelSource { truth, corrupted, pseudo };

struct ExperimentConfig {
  std::vector<std::string> corpus_paths;
  std::size_t household_size = 4;
  std::size_t household_count = 50;
  Hardness hardness = Hardness::random;
  double percentile = 98.0;
  std::optional<double> threshold;  // overrides the percentile estimate
  std::size_t threshold_sample_budget = 1'000'000;
  std::size_t speaker_level_utterances = 20;
  std::size_t clique_restarts = 2000;
  SplitConfig splits;
  std::optional<std::size_t> cap_guest_negatives;
  Eigen::Index adapted_dim = 32;
  TrainConfig train;
  LabelSource labels = LabelSource::truth;
  double epsilon = 0.0;
  CorruptionDraw corruption_draw = CorruptionDraw::any_member;
  PseudoLabelFilter pseudo_filter;
  std::vector<ScoringMode> modes = {ScoringMode::baseline, ScoringMode::local_only, ScoringMode::fused};
  std::uint64_t seed = 1;
  std::string output_dir;
  std::size_t workers = 1;
  bool shared_model = false;
  bool save_models = true;

  void validate() const;
  bool has_mode(ScoringMode m) const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Applies the keys present in `j` on top of `base`; unknown keys are errors.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});

const char* to_string(ScoringMode mode);
const char* to_string(Hardness h);
const char* to_string(LabelSource s);
ScoringMode parse_scoring_mode(const std::string& s);
Hardness parse_hardness(const std::string& s);
LabelSource parse_label_source(const std::string& s);
Optimizer parse_optimizer(const std::string& s);
const char* to_string(Optimizer o);

struct ModeResult {
  ScoringMode mode = ScoringMode::baseline;
  double eer_pooled = 0;
  double eer_mean = 0;
  double relative_improvement = 0;  // 1 - EER / EER_baseline (pooled)
  std::vector<std::vector<Trial>> trials;  // per household
};

struct TrainedHousehold {
  std::size_t household_id = 0;
  ScoringMode mode = ScoringMode::fused;
  HouseholdScoringModel model;
  LossReport report;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::optional<double> threshold;  // similarity threshold used for hard households
  std::vector<Household> households;
  std::vector<ModeResult> modes;
  std::vector<TrainedHousehold> models;  // household-major, then mode order

  const ModeResult& mode(ScoringMode m) const;
};

/// Training utterances of one household with labels as configured (true,
/// corrupted or pseudo-labeled), grouped by label for pair building.
MemberUtterances household_training_utterances(const Household& household, const Corpus& corpus,
                                               const ExperimentConfig& cfg);
std::vector<LabeledUtterance> household_training_guests(const Household& household, const Corpus& corpus);

std::vector<Household> generate_households(const Corpus& corpus, const ExperimentConfig& cfg,
                                           std::optional<double>* threshold_out = nullptr);

ExperimentResult run_experiment(const Corpus& corpus, const ExperimentConfig& cfg);

/// Merges every corpus named in the config (speaker ids must not collide).
Corpus load_experiment_corpus(const ExperimentConfig& cfg);

// Report layout shared by `run` and `sweep`.
std::string results_header();
std::string results_rows(const ExperimentResult& result, const std::string& prefix = "");

/// Writes results.tsv, config.json, households.json, trials_<mode>.tsv,
/// training_curves.tsv and models/<mode>/household_<id>.hhsm under `dir`.
void write_experiment_outputs(const ExperimentResult& result, const std::string& dir);

enum class SweepAxis { dropout, epsilon, household_size };
SweepAxis parse_sweep_axis(const std::string& s);
const char* to_string(SweepAxis a);

struct SweepResult {
  SweepAxis axis = SweepAxis::dropout;
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  std::vector<ExperimentResult> runs;  // value-major, then seed
};

SweepResult run_sweep(const Corpus& corpus, const ExperimentConfig& base, SweepAxis axis,
                      const std::vector<double>& values, const std::vector<std::uint64_t>& seeds);
void write_sweep_outputs(const SweepResult& sweep, const std::string& dir);

/// One row per utterance of the household: speaker, split, utterance id,
/// original embedding, adapted embedding (inference path).
void export_adapted(const HouseholdScoringModel& model, const Corpus& corpus, const Household& household,
                    const std::string& path);

}  // namespace hhscore
