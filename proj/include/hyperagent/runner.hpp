#pragma once

// Experiment orchestration: config parsing, seed fan-out over a worker pool,
// per-run and aggregate CSV emission, resumable manifests.

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hyperagent/agents.hpp"
#include "hyperagent/envs.hpp"
#include "hyperagent/hbe1.hpp"

namespace hyperagent {

struct EnvSpec {
  std::string kind = "finite_linear";  // finite_linear | sphere_linear | neural | quadratic | moderation
  Eigen::Index d = 10;
  Eigen::Index n_actions = 100;
  std::optional<double> noise_std;  // defaults: 1 for linear envs, 0.1 for nonlinear
  double prior_variance = 10.0;
  std::optional<double> theta_norm;
  std::string embeddings;  // HBE1 path, moderation only
  bool shuffle = false;
  bool reveal_blocked = false;
};

enum class AgentType { kHyperAgent, kSgdHyperAgent, kThompson, kGreedy, kEnsemblePlus };

struct AgentSpec {
  AgentType type = AgentType::kHyperAgent;
  AgentConfig config;
  double variance_scale = 1.0;  // ts only
  std::string label;            // resolved label, unique within an experiment
};

struct ExperimentConfig {
  EnvSpec env;
  std::vector<AgentSpec> agents;
  std::size_t horizon = 1000;
  std::size_t n_seeds = 1;
  std::uint64_t master_seed = 0;
  std::string output_dir = "results";
  bool plot = true;

  /// Throws ConfigError on the first violated invariant.
  void validate() const;
};

/// Unknown keys and wrongly typed values raise ConfigError.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

std::uint64_t run_seed(std::uint64_t master_seed, std::size_t seed_index);
/// Keyed by label so results do not depend on the agent's position in the config.
std::uint64_t agent_seed(std::uint64_t run_seed, const std::string& label);

std::unique_ptr<BanditEnv> make_env(const EnvSpec& spec, std::uint64_t seed, Rng& env_rng,
                                    std::shared_ptr<const EmbeddingDataset> embeddings = nullptr);
std::unique_ptr<Agent> make_agent(const AgentSpec& spec, const BanditEnv& env, Rng& agent_rng);

/// One (agent, seed) run, fully determined by the config.
RegretTrace run_single(const ExperimentConfig& cfg, std::size_t agent_index, std::size_t seed_index,
                       std::shared_ptr<const EmbeddingDataset> embeddings = nullptr);

struct AggregateCurve {
  std::string agent;
  std::vector<double> mean_cum;
  std::vector<double> se;
  std::vector<double> p10;
  std::vector<double> p90;
};

struct AggregateResult {
  std::vector<AggregateCurve> curves;  // first-appearance order of labels
};

/// Linear interpolation between order statistics (the "type 7" estimator).
double percentile(std::vector<double> values, double q);

/// Pointwise mean, standard error and 10th/90th percentiles of cumulative
/// regret per agent label. Mismatched horizons raise InputError.
AggregateResult aggregate(const std::vector<RegretTrace>& traces);

struct ModerationCurve {
  std::string agent;
  std::vector<double> accuracy;  // mean running fraction of hate posts blocked
  std::vector<double> effort;    // mean cumulative number of published posts
};

struct ModerationSummary {
  std::string agent;
  std::uint64_t seed = 0;
  double accuracy = 0.0;  // fraction of hate posts blocked over the final window (1 if none)
  double effort = 0.0;    // publish fraction over the final window
};

/// Final window is the last fifth of the run (at least one step).
ModerationSummary moderation_summary(const RegretTrace& trace);
std::vector<ModerationCurve> moderation_curves(const std::vector<RegretTrace>& traces);

void write_run_csv(std::ostream& out, const RegretTrace& trace);
void write_aggregate_csv(std::ostream& out, const AggregateResult& result);
void write_moderation_curves_csv(std::ostream& out, const std::vector<ModerationCurve>& curves);
AggregateResult read_aggregate_csv(const std::filesystem::path& path);
std::vector<ModerationCurve> read_moderation_curves_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal form.
std::string format_double(double value);

/// Raised after a run failed; the manifest on disk lists the completed runs.
class RunFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  unsigned jobs = 1;
  bool resume = true;  // skip (agent, seed) pairs listed in an existing manifest
};

struct ExperimentResult {
  std::vector<RegretTrace> traces;  // ordered by (agent, seed)
  AggregateResult aggregate;
  std::vector<std::filesystem::path> files;
};

/// Output layout under cfg.output_dir:
///   experiment.json, manifest.csv, aggregate.csv, runs/<agent>_seed<k>.csv,
///   and for moderation moderation.csv, moderation_curves.csv and per-run
///   action sidecars. Plots are rendered when cfg.plot is set.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

}  // namespace hyperagent
