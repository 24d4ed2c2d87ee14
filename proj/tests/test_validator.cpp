#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

#include "hyperagent/errors.hpp"
#include "hyperagent/validator.hpp"
#include "support.hpp"

using namespace hyperagent;

namespace {

struct TheorySummary {
  double optimism = 0.0;
  double reasonableness = 0.0;
};

TheorySummary theory_runs(const DistributionKind& kind, Eigen::Index M, std::size_t seeds,
                          std::size_t horizon, double delta, std::uint64_t master) {
  AgentConfig cfg;
  cfg.M = M;
  cfg.lambda = 1.0;
  cfg.reference_kind = kind;
  cfg.perturbation_kind = DistributionKind::sphere();
  cfg.beta_mode = BetaMode::theoretical(delta);
  LinearEnvOptions env_options;
  env_options.theta_norm = 1.0;
  const Eigen::Index n_actions = 20;
  const double rho = rho_coefficient(kind, M, delta, n_actions);
  TheorySummary out;
  for (std::size_t s = 0; s < seeds; ++s) {
    Rng env_rng(derive_seed(master, 2 * s)), agent_rng(derive_seed(master, 2 * s + 1));
    FiniteLinearEnv env(5, n_actions, env_rng, env_options);
    const auto log = run_theory_episode(cfg, env, horizon, rho, env_rng, agent_rng);
    out.optimism += optimism_frequency(log);
    out.reasonableness += reasonableness_frequency(log);
  }
  out.optimism /= double(seeds);
  out.reasonableness /= double(seeds);
  return out;
}

}  // namespace

TEST_SUITE("validator") {

TEST_CASE("good event check on exact and empty factors") {
  Rng rng(1);
  const Eigen::Index d = 4;
  const Eigen::MatrixXd B = test_support::random_matrix(d, d, rng);
  auto s = init_with_prior<double>(Eigen::MatrixXd::Zero(d, d), 1.0);
  s.precision = B * B.transpose() + Eigen::MatrixXd::Identity(d, d);
  s.covariance = s.precision.inverse();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.covariance);
  s.factor = eig.operatorSqrt();
  const auto exact = good_event_check(s);
  CHECK(exact.lambda_min == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(exact.lambda_max == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(exact.pass);

  s.factor.setZero();
  const auto empty = good_event_check(s);
  CHECK(std::abs(empty.lambda_min) < 1e-12);
  CHECK(std::abs(empty.lambda_max) < 1e-12);
  CHECK_FALSE(empty.pass);

  s.factor = 1.3 * eig.operatorSqrt();
  CHECK(good_event_check(s, 0.5).lambda_max == doctest::Approx(1.69).epsilon(1e-10));
  CHECK_FALSE(good_event_check(s, 0.5).pass);
  CHECK(good_event_check(s, 0.7).pass);

  s.covariance = -Eigen::MatrixXd::Identity(d, d);
  CHECK_THROWS_AS(good_event_check(s), NumericalError);
}

TEST_CASE("good event report marks every violating step") {
  AgentConfig cfg;
  cfg.M = 16;
  Rng env_rng(2), agent_rng(3);
  FiniteLinearEnv env(4, 10, env_rng);
  LinearHyperAgent agent(cfg, 4, agent_rng);
  const auto report = track_good_event(agent, env, 100, env_rng, agent_rng);
  REQUIRE(report.per_step_lambda_min.size() == 100);
  std::size_t expected = 0;
  for (std::size_t t = 0; t < 100; ++t) {
    const bool bad = report.per_step_lambda_min[t] < 0.5 || report.per_step_lambda_max[t] > 1.5;
    if (bad) {
      REQUIRE(expected < report.violation_steps.size());
      CHECK(report.violation_steps[expected] == t + 1);
      ++expected;
    }
  }
  CHECK(expected == report.violation_steps.size());
}

TEST_CASE("good event pass rate grows with M on a short sweep") {
  GoodEventSweepConfig cfg;
  cfg.n_seeds = 20;
  cfg.horizon = 200;
  const double small = good_event_pass_rate(cfg, 16);
  const double large = good_event_pass_rate(cfg, 512);
  CHECK(small <= large);
  CHECK(large >= 0.9);
}

TEST_CASE("beta tail frequencies") {
  Rng rng(4);
  const double floor = *optimism_floor(DistributionKind::sphere(), 2);
  const double n = 1e6;
  for (const int d : {3, 10, 100}) {
    const double f = beta_tail_check(d, 1000000, rng);
    CHECK(f > 0.0);
    CHECK(f < 0.5);
    CHECK(f >= floor - 3 * test_support::bernoulli_se(floor, n));
  }
  CHECK_THROWS_AS(beta_tail_check(1, 10, rng), ParameterError);
}

TEST_CASE("optimism counts ties and respects the coordinate floor") {
  TheoryStep tie;
  tie.optimistic_max = 0.4;
  tie.optimal_value = 0.4;
  CHECK(optimism_frequency({tie, tie}) == 1.0);
  CHECK_THROWS_AS(optimism_frequency({}), InputError);

  const auto coord = theory_runs(DistributionKind::coord(), 2, 40, 200, 0.1, 5);
  CHECK(coord.optimism >= 0.25 - 3 * test_support::bernoulli_se(0.25, 40 * 200));
}

TEST_CASE("theory mode frequencies") {
  const double delta = 0.1;
  const auto gauss = theory_runs(DistributionKind::gaussian(), 128, 100, 500, delta, 6);
  CHECK(gauss.reasonableness >= 1.0 - delta - 0.02);
  for (const auto& kind : {DistributionKind::gaussian(), DistributionKind::sphere(),
                           DistributionKind::cube(), DistributionKind::coord()}) {
    const auto r = theory_runs(kind, 16, 20, 200, delta, 7);
    CHECK(r.optimism >= *optimism_floor(kind, 16) - 0.02);
  }
  AgentConfig fixed;
  Rng a(1), b(2);
  FiniteLinearEnv env(3, 4, a);
  CHECK_THROWS_AS(run_theory_episode(fixed, env, 5, 1.0, a, b), ParameterError);
}

TEST_CASE("certification suites and csv") {
  CHECK(parse_certification_suite("distributions") == CertificationSuite::kDistributions);
  CHECK(parse_certification_suite("goodevent") == CertificationSuite::kGoodEvent);
  CHECK(parse_certification_suite("anticoncentration") == CertificationSuite::kAntiConcentration);
  CHECK_THROWS_AS(parse_certification_suite("nope"), ConfigError);

  CertificationOptions options;
  options.n_samples = 20000;
  const auto rows = run_certification(CertificationSuite::kAntiConcentration, options);
  REQUIRE_FALSE(rows.empty());
  std::ostringstream out;
  write_certification_csv(out, rows);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "check_name,params,n,empirical,bound,sigma_band,pass");
  std::size_t count = 0;
  while (std::getline(in, line)) {
    ++count;
    CHECK((line.ends_with(",true") || line.ends_with(",false")));
  }
  CHECK(count == rows.size());
  for (const auto& r : rows) CHECK(r.n == 20000);
}

}
