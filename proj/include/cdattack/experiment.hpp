#pragma once

// Experiment harness: one scenario per seed (graph, target set, clean
// detectors), every method and budget evaluated against a surrogate that is
// retrained from scratch on the attacked graph.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cdattack/attack.hpp"
#include "cdattack/eval.hpp"
#include "cdattack/perturb.hpp"

namespace cdattack {

enum class TargetPartition {
  /// Planted SBM blocks; only valid for generated graphs.
  planted,
  /// Spectral + k-means partition of the clean graph.
  spectral,
};

struct RunConfig {
  /// Edge file; empty means generate an SBM.
  std::string graph_path;
  std::string features_path;
  SbmConfig sbm;
  /// Each run seed regenerates the SBM with sbm.seed + seed.
  bool sbm_per_seed = true;

  std::vector<std::size_t> deltas{10};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<std::string> methods{"CD-ATTACK", "DICE", "MBA", "RTA"};

  TargetPartition target_partition = TargetPartition::spectral;
  Index targets_top = 5;
  Index targets_random = 5;
  std::optional<int> target_community;

  double dice_delete_ratio = 0.5;
  /// The attack's detector block doubles as the victim configuration.
  AttackConfig attack;
  std::string out_dir;
  int workers = 1;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);
/// Throws ConfigError on an invalid combination of fields.
void validate(const RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);

/// Everything a method sees or is scored against, fixed per seed.
struct Scenario {
  std::uint64_t seed = 0;
  Graph graph;
  std::vector<int> partition;
  std::vector<NodeId> targets;
  std::vector<std::string> warnings;
  /// Victim surrogate trained on the clean graph, and its labels.
  std::optional<Detector> victim;
  Assignment clean;
  /// PPNP-mode surrogate trained on the clean graph, for the global perturbation loss.
  std::optional<Detector> global_encoder;
};

Scenario prepare_scenario(const RunConfig& config, std::uint64_t seed);

struct GeneratedEdits {
  EditSet edits;
  std::vector<std::string> warnings;
  std::optional<AttackResult> attack;
};

/// Method name is one of CD-ATTACK, DICE, MBA, RTA (case-insensitive).
GeneratedEdits generate_edits(const RunConfig& config, const Scenario& scenario, const std::string& method,
                              std::size_t delta);

struct MethodReport {
  std::string method;
  std::size_t delta = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<std::string> warnings;

  HidingScore clean;
  HidingScore attacked;
  HidingScore transfer;
  double hide_clean = 0.0;
  double hide = 0.0;
  PerturbReport perturb;
  EditSet edits;
  double wall_seconds = 0.0;
};

/// Retrains the victim on the attacked graph and scores it.
MethodReport evaluate_edits(const RunConfig& config, const Scenario& scenario, const std::string& method,
                            std::size_t delta, const EditSet& edits);

/// generate_edits + evaluate_edits, with failures captured in the report.
MethodReport run_method(const RunConfig& config, const Scenario& scenario, const std::string& method,
                        std::size_t delta);

nlohmann::json report_json(const RunConfig& config, const MethodReport& report);

struct ExperimentResult {
  std::vector<MethodReport> runs;
  std::string summary_csv;
  bool all_ok = true;
};

/// Mean and sample standard deviation per (method, Δ) over successful runs.
std::string summary_csv(const std::vector<MethodReport>& runs, const std::vector<std::string>& methods,
                        const std::vector<std::size_t>& deltas);

/// Runs every seed × method × Δ. With config.out_dir set, writes one report
/// per run plus summary.csv there.
ExperimentResult run_experiment(const RunConfig& config);

/// Canonical method spelling; throws ConfigError for unknown names.
std::string canonical_method(const std::string& name);

}  // namespace cdattack
