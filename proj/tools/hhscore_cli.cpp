// hhscore: household-adapted speaker identification experiments.
//
//   hhscore gen-corpus --out corpus.hheb
//   hhscore run --config exp.json --corpus corpus.hheb --out results/
//   hhscore sweep --config exp.json --axis dropout --values 0,0.2,0.5,0.8 --seeds 1,2,3
//   hhscore export-adapted --model m.hhsm --corpus corpus.hheb --manifest households.json --household 3 --out a.tsv
//   hhscore eer trials_fused.tsv

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "hhscore/experiment.hpp"

using namespace hhscore;

namespace {

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

SyntheticConfig synthetic_from_json(const nlohmann::json& j, SyntheticConfig cfg) {
  if (!j.is_object()) throw ConfigError("corpus config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "speakers") cfg.speaker_count = v.get<std::size_t>();
      else if (key == "utterances") cfg.utterances_per_speaker = v.get<std::size_t>();
      else if (key == "dim") cfg.dim = v.get<Eigen::Index>();
      else if (key == "identity_dim") cfg.identity_subspace_dim = v.get<Eigen::Index>();
      else if (key == "noise") cfg.within_speaker_noise = v.get<double>();
      else if (key == "nuisance") cfg.household_nuisance_scale = v.get<double>();
      else if (key == "group_size") cfg.environment_group_size = v.get<std::size_t>();
      else if (key == "nuisance_rank") cfg.nuisance_rank = v.get<Eigen::Index>();
      else if (key == "shared_nuisance") cfg.share_nuisance = v.get<bool>();
      else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
      else throw ConfigError("unknown corpus config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad corpus config value: ") + e.what());
  }
  return cfg;
}

// Flags that were given on the command line, as config keys. They are applied
// on top of the config file.
struct Overrides {
  nlohmann::json values = nlohmann::json::object();
  std::vector<std::function<void()>> collect;

  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto value = std::make_shared<T>();
    auto* opt = app->add_option(flag, *value, help);
    collect.push_back([this, opt, value, key] {
      if (opt->count()) values[key] = *value;
    });
    return opt;
  }

  void add_flag(CLI::App* app, const std::string& flag, const std::string& key, bool value,
                const std::string& help) {
    auto* opt = app->add_flag(flag, help);
    collect.push_back([this, opt, key, value] {
      if (opt->count()) values[key] = value;
    });
  }

  nlohmann::json gather() {
    for (auto& c : collect) c();
    return values;
  }
};

void add_experiment_options(CLI::App* app, Overrides& o) {
  o.add<std::vector<std::string>>(app, "--corpus", "corpus", "Embedding corpus file(s), binary or text");
  o.add<std::string>(app, "--out", "output_dir", "Output directory");
  o.add<std::size_t>(app, "-N,--household-size", "household_size", "Enrolled speakers per household");
  o.add<std::size_t>(app, "--households", "household_count", "Number of households");
  o.add<std::string>(app, "--hardness", "hardness", "random | hard");
  o.add<double>(app, "--percentile", "percentile", "Similarity percentile for hard households");
  o.add<double>(app, "--threshold", "threshold", "Explicit similarity threshold (overrides --percentile)");
  o.add<std::size_t>(app, "--guests", "guests", "Evaluation guest utterances per household");
  o.add<std::size_t>(app, "--train-guests", "train_guests", "Training guest utterances per household");
  o.add<std::size_t>(app, "--max-train", "max_train", "Training utterances per member");
  o.add<std::size_t>(app, "--cap-guest-negatives", "cap_guest_negatives",
                     "Guest negatives kept per member (default: all)");
  o.add<long>(app, "-K,--adapted-dim", "adapted_dim", "Adapted embedding dimension");
  o.add<int>(app, "--epochs", "epochs", "Training epochs");
  o.add<double>(app, "--lr", "learning_rate", "Learning rate");
  o.add<std::size_t>(app, "--batch-size", "batch_size", "Pairs per minibatch");
  o.add<double>(app, "--dropout", "dropout", "Input dropout rate");
  o.add<std::string>(app, "--optimizer", "optimizer", "sgd | adam");
  o.add<std::string>(app, "--labels", "labels", "truth | corrupted | pseudo");
  o.add<double>(app, "--epsilon", "epsilon", "Label corruption rate");
  o.add<std::vector<std::string>>(app, "--modes", "modes", "Scoring modes: baseline local_only fused")
      ->delimiter(',');
  o.add<std::uint64_t>(app, "--seed", "seed", "Experiment seed");
  o.add<std::size_t>(app, "-j,--workers", "workers", "Worker threads");
  o.add_flag(app, "--shared-model", "shared_model", true, "Train one model on all households' pairs");
  o.add_flag(app, "--no-save-models", "save_models", false, "Do not write model files");
}

ExperimentConfig resolve_config(const std::string& config_path, Overrides& o) {
  ExperimentConfig cfg;
  if (!config_path.empty()) cfg = config_from_json(read_json_file(config_path), cfg);
  cfg = config_from_json(o.gather(), cfg);
  cfg.validate();
  if (cfg.output_dir.empty()) throw ConfigError("no output directory (--out)");
  return cfg;
}

void print_results(const std::string& header, const std::string& rows) { std::cout << header << rows; }

std::vector<Trial> read_trial_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trial dump '" + path + "'");
  return read_trials(in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Household-adapted speaker identification scoring"};
  app.require_subcommand(1);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Write a synthetic embedding corpus");
  std::string gen_config;
  std::string gen_out;
  std::string gen_format = "binary";
  SyntheticConfig syn_flags;
  gen->add_option("--config", gen_config, "JSON corpus config");
  gen->add_option("--out", gen_out, "Output file")->required();
  gen->add_option("--format", gen_format, "binary | text")->check(CLI::IsMember({"binary", "text"}));
  auto* o_speakers = gen->add_option("--speakers", syn_flags.speaker_count, "Speakers");
  auto* o_utts = gen->add_option("--utterances", syn_flags.utterances_per_speaker, "Utterances per speaker");
  auto* o_dim = gen->add_option("--dim", syn_flags.dim, "Embedding dimension D");
  auto* o_id = gen->add_option("--identity-dim", syn_flags.identity_subspace_dim, "Identity subspace dimension");
  auto* o_noise = gen->add_option("--noise", syn_flags.within_speaker_noise, "Within-speaker noise");
  auto* o_nuis = gen->add_option("--nuisance", syn_flags.household_nuisance_scale, "Nuisance offset scale");
  auto* o_group = gen->add_option("--group-size", syn_flags.environment_group_size,
                                  "Speakers sharing a nuisance direction");
  auto* o_rank = gen->add_option("--nuisance-rank", syn_flags.nuisance_rank,
                                 "Rank of the per-utterance nuisance subspace of each group");
  auto* o_noshare = gen->add_flag("--no-shared-nuisance", "Give every speaker its own nuisance direction");
  auto* o_gseed = gen->add_option("--seed", syn_flags.seed, "Generator seed");

  // run
  auto* run = app.add_subcommand("run", "Simulate households, train and evaluate");
  std::string run_config;
  Overrides run_over;
  run->add_option("--config", run_config, "JSON experiment config");
  add_experiment_options(run, run_over);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Repeat `run` over one axis");
  std::string sweep_config;
  std::string sweep_axis;
  std::vector<double> sweep_values;
  std::vector<std::uint64_t> sweep_seeds;
  Overrides sweep_over;
  sweep->add_option("--config", sweep_config, "JSON experiment config");
  sweep->add_option("--axis", sweep_axis, "dropout | epsilon | household_size")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated axis values")->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "Comma-separated seeds (default: config seed)")->delimiter(',');
  add_experiment_options(sweep, sweep_over);

  // export-adapted
  auto* exp = app.add_subcommand("export-adapted", "Write original and adapted embeddings of one household");
  std::string exp_model;
  std::vector<std::string> exp_corpus;
  std::string exp_manifest;
  std::size_t exp_household = 0;
  std::string exp_out;
  exp->add_option("--model", exp_model, "Model file")->required();
  exp->add_option("--corpus", exp_corpus, "Corpus file(s)")->required();
  exp->add_option("--manifest", exp_manifest, "Household manifest (households.json)")->required();
  exp->add_option("--household", exp_household, "Household id")->required();
  exp->add_option("--out", exp_out, "Output TSV")->required();

  // eer
  auto* eer_cmd = app.add_subcommand("eer", "Recompute EER from trial dumps");
  std::vector<std::string> eer_files;
  bool eer_per_household = false;
  eer_cmd->add_option("trials", eer_files, "Trial dump file(s)")->required();
  eer_cmd->add_flag("--per-household", eer_per_household, "Also print one EER per household");

  CLI11_PARSE(app, argc, argv);

  std::optional<std::size_t> current_household;
  try {
    if (*gen) {
      SyntheticConfig syn;
      if (!gen_config.empty()) syn = synthetic_from_json(read_json_file(gen_config), syn);
      if (o_speakers->count()) syn.speaker_count = syn_flags.speaker_count;
      if (o_utts->count()) syn.utterances_per_speaker = syn_flags.utterances_per_speaker;
      if (o_dim->count()) syn.dim = syn_flags.dim;
      if (o_id->count()) syn.identity_subspace_dim = syn_flags.identity_subspace_dim;
      if (o_noise->count()) syn.within_speaker_noise = syn_flags.within_speaker_noise;
      if (o_nuis->count()) syn.household_nuisance_scale = syn_flags.household_nuisance_scale;
      if (o_group->count()) syn.environment_group_size = syn_flags.environment_group_size;
      if (o_rank->count()) syn.nuisance_rank = syn_flags.nuisance_rank;
      if (o_noshare->count()) syn.share_nuisance = false;
      if (o_gseed->count()) syn.seed = syn_flags.seed;
      const Corpus corpus = generate_synthetic_corpus(syn);
      if (const auto parent = std::filesystem::path(gen_out).parent_path(); !parent.empty()) {
        std::filesystem::create_directories(parent);
      }
      if (gen_format == "text") {
        save_corpus_text(corpus, gen_out);
      } else {
        save_corpus_binary(corpus, gen_out);
      }
      std::cout << "speakers\t" << corpus.speaker_count() << "\nutterances\t" << corpus.utterance_count()
                << "\ndim\t" << corpus.dim() << '\n';
    } else if (*run) {
      const ExperimentConfig cfg = resolve_config(run_config, run_over);
      const Corpus corpus = load_experiment_corpus(cfg);
      const ExperimentResult result = run_experiment(corpus, cfg);
      write_experiment_outputs(result, cfg.output_dir);
      print_results(results_header(), results_rows(result));
    } else if (*sweep) {
      const ExperimentConfig cfg = resolve_config(sweep_config, sweep_over);
      const Corpus corpus = load_experiment_corpus(cfg);
      const SweepAxis axis = parse_sweep_axis(sweep_axis);
      const SweepResult result = run_sweep(corpus, cfg, axis, sweep_values, sweep_seeds);
      write_sweep_outputs(result, cfg.output_dir);
      std::string rows;
      std::size_t r = 0;
      for (const double v : result.values) {
        for (std::size_t s = 0; s < result.seeds.size(); ++s) {
          char value[32];
          std::snprintf(value, sizeof value, "%g", v);
          rows += results_rows(result.runs[r++], std::string(to_string(axis)) + "\t" + value + "\t");
        }
      }
      print_results("axis\tvalue\t" + results_header(), rows);
    } else if (*exp) {
      ExperimentConfig cfg;
      cfg.corpus_paths = exp_corpus;
      const Corpus corpus = load_experiment_corpus(cfg);
      const auto households = load_manifest(exp_manifest);
      const auto it = std::find_if(households.begin(), households.end(),
                                   [&](const Household& h) { return h.id == exp_household; });
      if (it == households.end()) {
        throw NotFoundError("household " + std::to_string(exp_household) + " is not in '" + exp_manifest + "'");
      }
      current_household = exp_household;
      export_adapted(load_model(exp_model), corpus, *it, exp_out);
    } else if (*eer_cmd) {
      std::vector<std::vector<Trial>> per_household;
      std::map<std::size_t, std::size_t> slot;
      for (const auto& f : eer_files) {
        for (auto& t : read_trial_file(f)) {
          auto [it, inserted] = slot.try_emplace(t.household_id, per_household.size());
          if (inserted) per_household.emplace_back();
          per_household[it->second].push_back(std::move(t));
        }
      }
      if (per_household.empty()) throw EmptyInputError("no trials in the given dump(s)");
      std::vector<Trial> pooled;
      for (const auto& h : per_household) pooled.insert(pooled.end(), h.begin(), h.end());
      const EerResult pooled_eer = eer(pooled);
      std::printf("eer_pooled\t%.6f\nthreshold\t%.17g\neer_mean\t%.6f\nhouseholds\t%zu\ntrials\t%zu\n",
                  pooled_eer.eer, pooled_eer.threshold,
                  aggregate_eer(per_household, Aggregation::mean_per_household), per_household.size(),
                  pooled.size());
      if (eer_per_household) {
        std::printf("household_id\teer\tthreshold\n");
        for (const auto& [id, index] : slot) {
          current_household = id;
          const EerResult e = eer(per_household[index]);
          std::printf("%zu\t%.6f\t%.17g\n", id, e.eer, e.threshold);
        }
      }
    }
  } catch (const Error& e) {
    std::cerr << "hhscore: error in " << e.module();
    if (current_household) std::cerr << " (household " << *current_household << ")";
    std::cerr << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "hhscore: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
