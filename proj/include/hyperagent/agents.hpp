#pragma once

// Decision policies sharing one act/observe interface: linear HyperAgent via
// index sampling, exact Thompson sampling and greedy.

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hyperagent/distributions.hpp"
#include "hyperagent/envs.hpp"
#include "hyperagent/linear_core.hpp"
#include "hyperagent/random.hpp"

namespace hyperagent {

struct BetaMode {
  enum class Kind { kFixed, kTheoretical };
  Kind kind = Kind::kFixed;
  double value = 1.0;  // beta itself when fixed, delta when theoretical

  static BetaMode fixed(double beta) { return {Kind::kFixed, beta}; }
  static BetaMode theoretical(double delta) { return {Kind::kTheoretical, delta}; }
};

enum class OptimizerKind { kSgd, kAdam };

/// Hyperparameters of a HyperAgent. The SGD-only fields are ignored by the
/// closed-form linear path.
struct AgentConfig {
  DistributionKind reference_kind = DistributionKind::gaussian();
  DistributionKind update_kind = DistributionKind::gaussian();
  DistributionKind perturbation_kind = DistributionKind::sphere();
  Eigen::Index M = 8;
  double sigma = 1.0;
  double lambda = 1.0;
  std::size_t update_steps = 1;  // B
  std::size_t buffer_capacity = 100000;
  std::size_t xi_batch = 16;  // |Xi~|
  bool exact_expectation = false;
  BetaMode beta_mode = BetaMode::fixed(1.0);

  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double prior_scale = 1.0;
  std::vector<Eigen::Index> hidden = {50, 50, 50};

  /// Reject features with norm above one in the closed-form update.
  bool enforce_unit_ball = true;

  /// Throws ParameterError on the first violated invariant.
  void validate() const;
  /// True when training uses the exact expectation over the update support.
  bool uses_exact_expectation() const;
};

/// "hyperagent:<ref>-<upd>-<pert>:M=<M>"
std::string hyperagent_label(const AgentConfig& cfg);
/// "ensemble+:M=<M>"
std::string ensemble_plus_label(Eigen::Index M);

/// Reference and update both Coord; Coord perturbation as well, the
/// "Coord-Coord" configuration of ensemble sampling.
AgentConfig ensemble_plus_config(Eigen::Index M);

struct RegretTrace {
  std::vector<double> per_step_regret;
  std::vector<double> cumulative;
  std::vector<std::int64_t> actions;
  std::uint64_t seed = 0;
  std::string agent_label;

  std::size_t horizon() const { return per_step_regret.size(); }
};

/// beta from the configured mode, evaluated on the current statistics.
double resolve_beta(const PosteriorStated& state, const BetaMode& mode);

/// One reference index zeta shared by every action; returns the lowest-index
/// argmax of <phi_a, beta A zeta + mu> over the rows of `features`.
Eigen::Index hyperagent_act(const PosteriorStated& state, const Eigen::MatrixXd& features,
                            const AgentConfig& cfg, Rng& rng);

/// Draws z from the perturbation distribution and applies the closed-form update.
void hyperagent_observe(PosteriorStated& state, const Eigen::VectorXd& phi, double y,
                        const AgentConfig& cfg, Rng& rng);

/// theta~ ~ N(mean, scale^2 cov) through a Cholesky factor of cov.
Eigen::VectorXd exact_ts_sample(const PosteriorStated& state, double variance_scale, Rng& rng);
Eigen::Index exact_ts_act(const PosteriorStated& state, const Eigen::MatrixXd& features,
                          double variance_scale, Rng& rng);

Eigen::Index greedy_act(const PosteriorStated& state, const Eigen::MatrixXd& features);

class Agent {
 public:
  virtual ~Agent() = default;
  virtual const std::string& label() const = 0;
  virtual Action act(const ActionSet& set, Rng& rng) = 0;
  virtual void observe(const ActionSet& set, const Action& action, double reward, Rng& rng) = 0;
};

class LinearHyperAgent final : public Agent {
 public:
  LinearHyperAgent(AgentConfig cfg, Eigen::Index feature_dim, Rng& rng, std::string label = {});

  const std::string& label() const override { return label_; }
  Action act(const ActionSet& set, Rng& rng) override;
  void observe(const ActionSet& set, const Action& action, double reward, Rng& rng) override;

  const PosteriorStated& state() const { return state_; }
  const AgentConfig& config() const { return cfg_; }

 private:
  AgentConfig cfg_;
  PosteriorStated state_;
  std::string label_;
};

/// Exact Gaussian Thompson sampling on the same ridge statistics.
class ThompsonAgent final : public Agent {
 public:
  ThompsonAgent(double lambda, double variance_scale, Eigen::Index feature_dim,
                bool enforce_unit_ball = true, std::string label = "ts");

  const std::string& label() const override { return label_; }
  Action act(const ActionSet& set, Rng& rng) override;
  void observe(const ActionSet& set, const Action& action, double reward, Rng& rng) override;

  const PosteriorStated& state() const { return state_; }

 private:
  PosteriorStated state_;
  double variance_scale_;
  FeatureCheck check_;
  std::string label_;
};

class GreedyAgent final : public Agent {
 public:
  GreedyAgent(double lambda, Eigen::Index feature_dim, bool enforce_unit_ball = true,
              std::string label = "greedy");

  const std::string& label() const override { return label_; }
  Action act(const ActionSet& set, Rng& rng) override;
  void observe(const ActionSet& set, const Action& action, double reward, Rng& rng) override;

  const PosteriorStated& state() const { return state_; }

 private:
  PosteriorStated state_;
  FeatureCheck check_;
  std::string label_;
};

/// Runs act -> reward -> observe for `horizon` steps. `env_rng` drives the
/// environment (action sets, reward noise); `agent_rng` drives the agent.
RegretTrace run_episode(Agent& agent, BanditEnv& env, std::size_t horizon, Rng& env_rng,
                        Rng& agent_rng, std::uint64_t seed_label = 0);

}  // namespace hyperagent
