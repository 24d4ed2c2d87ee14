#include "hyperagent/validator.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

#include "hyperagent/errors.hpp"

namespace hyperagent {

GoodEventCheck good_event_check(const PosteriorStated& state, double epsilon) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> cov_eig(state.covariance);
  if (cov_eig.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
  const Eigen::VectorXd& w = cov_eig.eigenvalues();
  if (w.minCoeff() <= 0.0) throw NumericalError("covariance is numerically indefinite");
  const Eigen::MatrixXd& V = cov_eig.eigenvectors();
  const Eigen::MatrixXd inv_sqrt = V * w.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose();
  const Eigen::MatrixXd whitened = inv_sqrt * state.factor;
  Eigen::MatrixXd sandwich = whitened * whitened.transpose();
  sandwich = (sandwich + sandwich.transpose()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sandwich, Eigen::EigenvaluesOnly);
  GoodEventCheck out;
  out.lambda_min = eig.eigenvalues().minCoeff();
  out.lambda_max = eig.eigenvalues().maxCoeff();
  out.pass = out.lambda_min >= 1.0 - epsilon && out.lambda_max <= 1.0 + epsilon;
  return out;
}

GoodEventReport track_good_event(LinearHyperAgent& agent, BanditEnv& env, std::size_t horizon,
                                 Rng& env_rng, Rng& agent_rng, double epsilon) {
  GoodEventReport report;
  report.epsilon = epsilon;
  report.per_step_lambda_min.reserve(horizon);
  report.per_step_lambda_max.reserve(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    const ActionSet& set = env.begin_step(t, env_rng);
    const Action action = agent.act(set, agent_rng);
    agent.observe(set, action, env.reward(action, env_rng), agent_rng);
    const GoodEventCheck check = good_event_check(agent.state(), epsilon);
    report.per_step_lambda_min.push_back(check.lambda_min);
    report.per_step_lambda_max.push_back(check.lambda_max);
    if (!check.pass) report.violation_steps.push_back(t + 1);
  }
  return report;
}

double good_event_pass_rate(const GoodEventSweepConfig& cfg, Eigen::Index M) {
  std::size_t passes = 0;
  for (std::size_t seed = 0; seed < cfg.n_seeds; ++seed) {
    Rng env_rng(derive_seed(cfg.master_seed, 2 * seed));
    Rng agent_rng(derive_seed(cfg.master_seed, 2 * seed + 1));
    FiniteLinearEnv env(cfg.d, cfg.n_actions, env_rng);
    AgentConfig agent_cfg;
    agent_cfg.M = M;
    agent_cfg.lambda = cfg.lambda;
    agent_cfg.reference_kind = DistributionKind::gaussian();
    agent_cfg.perturbation_kind = cfg.perturbation;
    agent_cfg.enforce_unit_ball = env.feature_norm_bound() <= 1.0;
    LinearHyperAgent agent(agent_cfg, cfg.d, agent_rng);
    const bool prior_ok = good_event_check(agent.state(), cfg.epsilon).pass;
    const GoodEventReport report =
        track_good_event(agent, env, cfg.horizon, env_rng, agent_rng, cfg.epsilon);
    if (prior_ok && report.all_pass()) ++passes;
  }
  return static_cast<double>(passes) / static_cast<double>(cfg.n_seeds);
}

double anti_concentration_test(const DistributionKind& kind, Eigen::Index M,
                               const Eigen::VectorXd& v, std::size_t n_samples, Rng& rng) {
  if (v.size() != M) throw InputError("direction has wrong dimension");
  if (std::abs(v.norm() - 1.0) > 1e-9) throw InputError("direction must be a unit vector");
  if (n_samples < 1) throw InputError("need at least one sample");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    if (sample_reference<double>(kind, M, rng).dot(v) >= 1.0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n_samples);
}

double beta_tail_check(int d_param, std::size_t n_samples, Rng& rng) {
  if (d_param < 2) throw ParameterError("beta_tail_check needs d >= 2");
  const double shape = (d_param - 1) / 2.0;
  std::gamma_distribution<double> gamma(shape, 1.0);
  const double threshold = 0.5 + 1.0 / (2.0 * std::sqrt(static_cast<double>(d_param)));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double g1 = gamma(rng);
    const double g2 = gamma(rng);
    if (g1 / (g1 + g2) > threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n_samples);
}

IsotropyResult isotropy_monte_carlo(const DistributionKind& kind, Eigen::Index M,
                                    std::size_t n_samples, Rng& rng) {
  constexpr Eigen::Index kBlock = 4096;
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(M, M);
  Eigen::MatrixXd fourth = Eigen::MatrixXd::Zero(M, M);
  Eigen::VectorXd first = Eigen::VectorXd::Zero(M);
  Eigen::VectorXd first_sq = Eigen::VectorXd::Zero(M);
  Eigen::MatrixXd block(M, kBlock);
  std::size_t done = 0;
  while (done < n_samples) {
    const auto cols = static_cast<Eigen::Index>(std::min<std::size_t>(kBlock, n_samples - done));
    for (Eigen::Index j = 0; j < cols; ++j) block.col(j) = sample_reference<double>(kind, M, rng);
    const auto x = block.leftCols(cols);
    second.noalias() += x * x.transpose();
    const Eigen::MatrixXd sq = x.cwiseAbs2();
    fourth.noalias() += sq * sq.transpose();
    first += x.rowwise().sum();
    first_sq += sq.rowwise().sum();
    done += static_cast<std::size_t>(cols);
  }
  const double n = static_cast<double>(n_samples);
  const Eigen::MatrixXd cov = second / n;
  IsotropyResult out;
  for (Eigen::Index i = 0; i < M; ++i) {
    for (Eigen::Index j = 0; j < M; ++j) {
      const double dev = std::abs(cov(i, j) - (i == j ? 1.0 : 0.0));
      const double var = std::max(fourth(i, j) / n - cov(i, j) * cov(i, j), 0.0);
      const double se = std::sqrt(var / n);
      out.max_abs_deviation = std::max(out.max_abs_deviation, dev);
      out.max_standard_errors = std::max(out.max_standard_errors, dev / std::max(se, 1e-12));
    }
    const double mean = first[i] / n;
    const double se_mean = std::sqrt(std::max(first_sq[i] / n - mean * mean, 0.0) / n);
    out.max_abs_mean = std::max(out.max_abs_mean, std::abs(mean));
    out.max_mean_standard_errors =
        std::max(out.max_mean_standard_errors, std::abs(mean) / std::max(se_mean, 1e-12));
  }
  return out;
}

std::optional<IsotropyResult> isotropy_exact(const DistributionKind& kind, Eigen::Index M) {
  const auto support = finite_support<double>(kind, M);
  if (!support) return std::nullopt;
  const Eigen::MatrixXd& atoms = support->atoms;
  const Eigen::MatrixXd cov = atoms * support->weights.asDiagonal() * atoms.transpose();
  const Eigen::VectorXd mean = atoms * support->weights;
  IsotropyResult out;
  out.max_abs_deviation = (cov - Eigen::MatrixXd::Identity(M, M)).cwiseAbs().maxCoeff();
  out.max_abs_mean = mean.cwiseAbs().maxCoeff();
  return out;
}

double sphere_projection_ks(Eigen::Index M, std::size_t n_samples, std::size_t quantiles, Rng& rng) {
  if (M < 2) throw ParameterError("sphere projection law needs M >= 2");
  std::vector<double> u(n_samples);
  const double root_m = std::sqrt(static_cast<double>(M));
  for (auto& value : u) value = sample_reference<double>(DistributionKind::sphere(), M, rng)[0] / root_m;
  std::sort(u.begin(), u.end());
  const double shape = (static_cast<double>(M) - 1.0) / 2.0;
  double worst = 0.0;
  for (std::size_t q = 1; q <= quantiles; ++q) {
    const double p = static_cast<double>(q) / static_cast<double>(quantiles + 1);
    const double x = boost::math::ibeta_inv(shape, shape, p) * 2.0 - 1.0;
    const auto below = static_cast<double>(std::upper_bound(u.begin(), u.end(), x) - u.begin());
    worst = std::max(worst, std::abs(below / static_cast<double>(n_samples) - p));
  }
  return worst;
}

std::vector<TheoryStep> run_theory_episode(const AgentConfig& cfg, BanditEnv& env,
                                           std::size_t horizon, double rho, Rng& env_rng,
                                           Rng& agent_rng) {
  if (cfg.beta_mode.kind != BetaMode::Kind::kTheoretical) {
    throw ParameterError("theory runs need the theoretical beta mode");
  }
  cfg.validate();
  const double delta = cfg.beta_mode.value;
  PosteriorStated state =
      init<double>(env.feature_dim(), cfg.M, cfg.lambda, cfg.perturbation_kind, agent_rng);
  const FeatureCheck check = cfg.enforce_unit_ball ? FeatureCheck::kUnitBall : FeatureCheck::kNone;
  std::vector<TheoryStep> log;
  log.reserve(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    const ActionSet& set = env.begin_step(t, env_rng);
    if (set.compact_sphere) throw UnsupportedError("theory runs need a finite action set");
    const double beta_t = beta(state, delta);
    const Eigen::VectorXd zeta = sample_reference<double>(cfg.reference_kind, cfg.M, agent_rng);
    const Eigen::VectorXd spread = state.factor * zeta;
    const Eigen::VectorXd values = set.features * (beta_t * spread + state.mean);
    Action action;
    action.index = argmax_first(values);
    action.feature = set.features.row(action.index).transpose();

    TheoryStep step;
    step.chosen_index_value = values[action.index];
    step.chosen_bounds = confidence_bounds(state, action.feature, beta_t, rho);
    step.optimistic_max = (set.features * (2.0 * beta_t * spread + state.mean)).maxCoeff();
    step.optimal_value = env.optimal_value();
    log.push_back(step);

    const double y = env.reward(action, env_rng);
    const auto z = sample_perturbation<double>(cfg.perturbation_kind, cfg.M, agent_rng);
    update(state, action.feature, y, z.z, check);
  }
  return log;
}

double optimism_frequency(const std::vector<TheoryStep>& log) {
  if (log.empty()) throw InputError("empty run log");
  const auto hits = std::count_if(log.begin(), log.end(), [](const TheoryStep& s) {
    return s.optimistic_max >= s.optimal_value;
  });
  return static_cast<double>(hits) / static_cast<double>(log.size());
}

double reasonableness_frequency(const std::vector<TheoryStep>& log) {
  if (log.empty()) throw InputError("empty run log");
  const auto hits = std::count_if(log.begin(), log.end(), [](const TheoryStep& s) {
    const double v = std::clamp(s.chosen_index_value, -1.0, 1.0);
    return v >= s.chosen_bounds.lower && v <= s.chosen_bounds.upper;
  });
  return static_cast<double>(hits) / static_cast<double>(log.size());
}

// ---------------------------------------------------------------------------

namespace {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

CertificationRow floor_row(const std::string& name, const std::string& params, std::size_t n,
                           double empirical, double floor) {
  const double sigma = std::sqrt(floor * (1.0 - floor) / static_cast<double>(n));
  return {name, params, n, empirical, floor, 5.0 * sigma, empirical >= floor - 5.0 * sigma};
}

}  // namespace

void write_certification_csv(std::ostream& out, const std::vector<CertificationRow>& rows) {
  out << "check_name,params,n,empirical,bound,sigma_band,pass\n";
  for (const auto& r : rows) {
    out << csv_quote(r.check_name) << ',' << csv_quote(r.params) << ',' << r.n << ','
        << format_double(r.empirical) << ',' << format_double(r.bound) << ','
        << format_double(r.sigma_band) << ',' << (r.pass ? "true" : "false") << '\n';
  }
}

CertificationSuite parse_certification_suite(const std::string& name) {
  if (name == "distributions") return CertificationSuite::kDistributions;
  if (name == "goodevent") return CertificationSuite::kGoodEvent;
  if (name == "anticoncentration") return CertificationSuite::kAntiConcentration;
  throw ConfigError("unknown certification suite '" + name +
                    "' (expected distributions, goodevent or anticoncentration)");
}

std::vector<CertificationRow> run_certification(CertificationSuite suite,
                                                const CertificationOptions& options) {
  std::vector<CertificationRow> rows;
  Rng rng(options.seed);
  const std::size_t n = options.n_samples;
  switch (suite) {
    case CertificationSuite::kDistributions: {
      constexpr Eigen::Index kM = 16;
      for (const auto& kind : {DistributionKind::gaussian(), DistributionKind::sphere(),
                               DistributionKind::cube(), DistributionKind::coord(),
                               DistributionKind::sparse(4)}) {
        const std::string params = "kind=" + to_string(kind) + ";M=" + std::to_string(kM);
        const IsotropyResult mc = isotropy_monte_carlo(kind, kM, n, rng);
        rows.push_back({"isotropy_covariance", params, n, mc.max_standard_errors, 5.0, 0.0,
                        mc.max_standard_errors <= 5.0});
        rows.push_back({"isotropy_mean", params, n, mc.max_mean_standard_errors, 5.0, 0.0,
                        mc.max_mean_standard_errors <= 5.0});
        if (const auto exact = isotropy_exact(kind, kM)) {
          rows.push_back({"isotropy_exact_covariance", params, 0, exact->max_abs_deviation, 1e-12,
                          0.0, exact->max_abs_deviation <= 1e-12});
          rows.push_back({"isotropy_exact_mean", params, 0, exact->max_abs_mean, 1e-12, 0.0,
                          exact->max_abs_mean <= 1e-12});
        }
      }
      const double ks = sphere_projection_ks(kM, n, 10, rng);
      rows.push_back({"sphere_projection_beta_cdf", "M=16;quantiles=10", n, ks, 0.005, 0.0,
                      ks <= 0.005});
      break;
    }
    case CertificationSuite::kAntiConcentration: {
      constexpr Eigen::Index kM = 16;
      std::normal_distribution<double> normal;
      Eigen::VectorXd v(kM);
      for (Eigen::Index i = 0; i < kM; ++i) v[i] = normal(rng);
      v.normalize();
      for (const auto& kind : {DistributionKind::gaussian(), DistributionKind::sphere(),
                               DistributionKind::cube()}) {
        const double freq = anti_concentration_test(kind, kM, v, n, rng);
        rows.push_back(floor_row("anti_concentration",
                                 "kind=" + to_string(kind) + ";M=16;v=random", n, freq,
                                 *optimism_floor(kind, kM)));
      }
      for (const Eigen::Index m : {Eigen::Index{2}, Eigen::Index{8}, Eigen::Index{32}}) {
        const double freq = anti_concentration_test(DistributionKind::coord(), m,
                                                    Eigen::VectorXd::Unit(m, 0), n, rng);
        rows.push_back(floor_row("anti_concentration", "kind=coord;M=" + std::to_string(m) + ";v=e1",
                                 n, freq, *optimism_floor(DistributionKind::coord(), m)));
      }
      const double sphere_floor = *optimism_floor(DistributionKind::sphere(), 2);
      for (const int d : {2, 10, 100}) {
        rows.push_back(floor_row("beta_tail", "d=" + std::to_string(d), n,
                                 beta_tail_check(d, n, rng), sphere_floor));
      }
      break;
    }
    case CertificationSuite::kGoodEvent: {
      GoodEventSweepConfig cfg;
      cfg.n_seeds = options.good_event_seeds;
      cfg.master_seed = options.seed;
      double previous = -1.0;
      for (const Eigen::Index m : {Eigen::Index{32}, Eigen::Index{64}, Eigen::Index{128},
                                   Eigen::Index{256}}) {
        const double rate = good_event_pass_rate(cfg, m);
        const double bound = m == 256 ? 0.9 : std::max(previous, 0.0);
        const bool pass = rate >= previous && (m != 256 || rate >= 0.9);
        rows.push_back({"good_event_pass_rate",
                        "d=10;T=1000;pert=sphere;M=" + std::to_string(m), cfg.n_seeds, rate, bound,
                        0.0, pass});
        previous = rate;
      }
      break;
    }
  }
  return rows;
}

}  // namespace hyperagent
