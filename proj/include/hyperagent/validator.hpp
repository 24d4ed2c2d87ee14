#pragma once

// Statistical certification: good-event tracking for the incremental factor,
// isotropy and anti-concentration Monte Carlo for the index distributions,
// and optimism / reasonableness frequencies of theory-mode linear runs.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hyperagent/agents.hpp"
#include "hyperagent/distributions.hpp"
#include "hyperagent/envs.hpp"
#include "hyperagent/linear_core.hpp"
#include "hyperagent/random.hpp"

namespace hyperagent {

inline constexpr double kDefaultGoodEventEpsilon = 0.5;

struct GoodEventCheck {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  bool pass = false;
};

/// Extreme eigenvalues of Sigma^{-1/2} A A^T Sigma^{-1/2}; passes when both
/// lie in [1 - epsilon, 1 + epsilon].
GoodEventCheck good_event_check(const PosteriorStated& state,
                                double epsilon = kDefaultGoodEventEpsilon);

struct GoodEventReport {
  std::vector<double> per_step_lambda_min;
  std::vector<double> per_step_lambda_max;
  std::vector<std::size_t> violation_steps;
  double epsilon = kDefaultGoodEventEpsilon;

  bool all_pass() const { return violation_steps.empty(); }
};

/// Runs a linear HyperAgent for `horizon` steps and checks the good event
/// after every update (step t = 1..horizon is stored at index t - 1).
GoodEventReport track_good_event(LinearHyperAgent& agent, BanditEnv& env, std::size_t horizon,
                                 Rng& env_rng, Rng& agent_rng,
                                 double epsilon = kDefaultGoodEventEpsilon);

struct GoodEventSweepConfig {
  Eigen::Index d = 10;
  Eigen::Index n_actions = 100;
  std::size_t horizon = 1000;
  std::size_t n_seeds = 100;
  double lambda = 1.0;
  DistributionKind perturbation = DistributionKind::sphere();
  double epsilon = kDefaultGoodEventEpsilon;
  std::uint64_t master_seed = 2024;
};

/// Fraction of seeds whose run keeps the good event at every step, on the
/// finite linear bandit with a Gaussian-reference HyperAgent of index dim M.
double good_event_pass_rate(const GoodEventSweepConfig& cfg, Eigen::Index M);

/// Frequency of <zeta, v> >= 1 over n reference draws. v must be unit norm.
double anti_concentration_test(const DistributionKind& kind, Eigen::Index M,
                               const Eigen::VectorXd& v, std::size_t n_samples, Rng& rng);

/// Frequency of X > 1/2 + 1/(2 sqrt(d)) for X ~ Beta((d-1)/2, (d-1)/2).
double beta_tail_check(int d_param, std::size_t n_samples, Rng& rng);

struct IsotropyResult {
  double max_abs_deviation = 0.0;   // max |C_ij - delta_ij|
  double max_standard_errors = 0.0;  // max |C_ij - delta_ij| / se_ij
  double max_abs_mean = 0.0;
  double max_mean_standard_errors = 0.0;
};

/// Monte-Carlo second-moment check over n reference draws; standard errors
/// are estimated per entry from the same draws.
IsotropyResult isotropy_monte_carlo(const DistributionKind& kind, Eigen::Index M,
                                    std::size_t n_samples, Rng& rng);

/// Support-weighted mean and covariance for finite-support kinds.
std::optional<IsotropyResult> isotropy_exact(const DistributionKind& kind, Eigen::Index M);

/// Largest gap between the empirical CDF of <zeta, e_1> / sqrt(M) for Sphere
/// draws and the CDF of 2 Beta((M-1)/2, (M-1)/2) - 1, over `quantiles` points.
double sphere_projection_ks(Eigen::Index M, std::size_t n_samples, std::size_t quantiles, Rng& rng);

/// Per-step record of a theory-mode run.
struct TheoryStep {
  double chosen_index_value = 0.0;  // f~_t(A_t) with inflation beta_t
  ConfidenceBound<double> chosen_bounds{0.0, 0.0};
  double optimistic_max = 0.0;  // max_a <phi_a, 2 beta_t A zeta + mu>
  double optimal_value = 0.0;   // max_a f*(a)
};

/// Runs a linear HyperAgent with theoretical beta_t (cfg.beta_mode must be
/// theoretical) on a finite linear env, recording confidence bounds with the
/// given rho and the doubled-beta optimism event for the same index draw.
std::vector<TheoryStep> run_theory_episode(const AgentConfig& cfg, BanditEnv& env,
                                           std::size_t horizon, double rho, Rng& env_rng,
                                           Rng& agent_rng);

/// Fraction of steps with optimistic_max >= optimal_value (ties count).
double optimism_frequency(const std::vector<TheoryStep>& log);
/// Fraction of steps with the chosen index value, clipped to [-1, 1] like the
/// bounds themselves, inside [L_t, U_t].
double reasonableness_frequency(const std::vector<TheoryStep>& log);

struct CertificationRow {
  std::string check_name;
  std::string params;
  std::uint64_t n = 0;
  double empirical = 0.0;
  double bound = 0.0;
  double sigma_band = 0.0;
  bool pass = false;
};

void write_certification_csv(std::ostream& out, const std::vector<CertificationRow>& rows);

enum class CertificationSuite { kDistributions, kGoodEvent, kAntiConcentration };

CertificationSuite parse_certification_suite(const std::string& name);

struct CertificationOptions {
  std::uint64_t seed = 7;
  std::size_t n_samples = 1000000;
  std::size_t good_event_seeds = 100;
};

std::vector<CertificationRow> run_certification(CertificationSuite suite,
                                                const CertificationOptions& options = {});

}  // namespace hyperagent
