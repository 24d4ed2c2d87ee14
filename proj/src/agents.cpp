#include "hyperagent/agents.hpp"

#include <Eigen/Cholesky>

#include <cmath>

#include "hyperagent/errors.hpp"

namespace hyperagent {

void AgentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ParameterError("agent config: " + msg); };
  if (M < 1) fail("M must be >= 1");
  if (!(lambda > 0.0)) fail("lambda must be positive");
  if (!(sigma >= 0.0)) fail("sigma must be >= 0");
  if (buffer_capacity < 1) fail("buffer_capacity must be >= 1");
  if (xi_batch < 1) fail("xi_batch must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(prior_scale >= 0.0)) fail("prior_scale must be >= 0");
  for (const auto width : hidden) {
    if (width < 1) fail("hidden layer widths must be >= 1");
  }
  for (const auto& kind : {reference_kind, update_kind, perturbation_kind}) {
    if (kind.family == DistributionFamily::kSparse && (kind.sparsity < 1 || kind.sparsity > M)) {
      fail("sparse:" + std::to_string(kind.sparsity) + " needs 1 <= s <= M");
    }
  }
  if (beta_mode.kind == BetaMode::Kind::kFixed && !(beta_mode.value >= 0.0)) {
    fail("fixed beta must be >= 0");
  }
  if (beta_mode.kind == BetaMode::Kind::kTheoretical &&
      !(beta_mode.value > 0.0 && beta_mode.value < 1.0)) {
    fail("theoretical beta needs delta in (0, 1)");
  }
}

bool AgentConfig::uses_exact_expectation() const {
  return exact_expectation && finite_support(update_kind, M).has_value();
}

std::string hyperagent_label(const AgentConfig& cfg) {
  return "hyperagent:" + to_string(cfg.reference_kind) + "-" + to_string(cfg.update_kind) + "-" +
         to_string(cfg.perturbation_kind) + ":M=" + std::to_string(cfg.M);
}

std::string ensemble_plus_label(Eigen::Index M) { return "ensemble+:M=" + std::to_string(M); }

AgentConfig ensemble_plus_config(Eigen::Index M) {
  if (M < 1) throw ParameterError("ensemble+ needs M >= 1");
  AgentConfig cfg;
  cfg.M = M;
  cfg.reference_kind = DistributionKind::coord();
  cfg.update_kind = DistributionKind::coord();
  cfg.perturbation_kind = DistributionKind::coord();
  return cfg;
}

double resolve_beta(const PosteriorStated& state, const BetaMode& mode) {
  return mode.kind == BetaMode::Kind::kFixed ? mode.value : beta(state, mode.value);
}

Eigen::Index hyperagent_act(const PosteriorStated& state, const Eigen::MatrixXd& features,
                            const AgentConfig& cfg, Rng& rng) {
  if (features.rows() == 0) throw InputError("empty action set");
  if (features.cols() != state.feature_dim()) throw InputError("feature dimension mismatch");
  const Eigen::VectorXd zeta = sample_reference<double>(cfg.reference_kind, state.index_dim(), rng);
  const Eigen::VectorXd scores = index_scores(state, zeta, resolve_beta(state, cfg.beta_mode));
  return argmax_first(features * scores);
}

void hyperagent_observe(PosteriorStated& state, const Eigen::VectorXd& phi, double y,
                        const AgentConfig& cfg, Rng& rng) {
  const auto z = sample_perturbation<double>(cfg.perturbation_kind, state.index_dim(), rng);
  update(state, phi, y, z.z, cfg.enforce_unit_ball ? FeatureCheck::kUnitBall : FeatureCheck::kNone);
}

Eigen::VectorXd exact_ts_sample(const PosteriorStated& state, double variance_scale, Rng& rng) {
  const Eigen::Index d = state.feature_dim();
  if (variance_scale == 0.0) return state.mean;
  Eigen::LLT<Eigen::MatrixXd> llt(state.covariance);
  if (llt.info() != Eigen::Success) throw NumericalError("posterior covariance is not positive definite");
  std::normal_distribution<double> normal;
  Eigen::VectorXd g(d);
  for (Eigen::Index i = 0; i < d; ++i) g[i] = normal(rng);
  const Eigen::VectorXd lg = llt.matrixL() * g;
  return state.mean + variance_scale * lg;
}

Eigen::Index exact_ts_act(const PosteriorStated& state, const Eigen::MatrixXd& features,
                          double variance_scale, Rng& rng) {
  if (features.rows() == 0) throw InputError("empty action set");
  return argmax_first(features * exact_ts_sample(state, variance_scale, rng));
}

Eigen::Index greedy_act(const PosteriorStated& state, const Eigen::MatrixXd& features) {
  if (features.rows() == 0) throw InputError("empty action set");
  return argmax_first(features * state.mean);
}

// ---------------------------------------------------------------------------

LinearHyperAgent::LinearHyperAgent(AgentConfig cfg, Eigen::Index feature_dim, Rng& rng,
                                   std::string label)
    : cfg_(std::move(cfg)), label_(std::move(label)) {
  cfg_.validate();
  if (label_.empty()) label_ = hyperagent_label(cfg_);
  state_ = init<double>(feature_dim, cfg_.M, cfg_.lambda, cfg_.perturbation_kind, rng);
}

Action LinearHyperAgent::act(const ActionSet& set, Rng& rng) {
  if (set.compact_sphere) {
    const Eigen::VectorXd zeta = sample_reference<double>(cfg_.reference_kind, cfg_.M, rng);
    return choose_linear(set, index_scores(state_, zeta, resolve_beta(state_, cfg_.beta_mode)));
  }
  Action a;
  a.index = hyperagent_act(state_, set.features, cfg_, rng);
  a.feature = set.features.row(a.index).transpose();
  return a;
}

void LinearHyperAgent::observe(const ActionSet&, const Action& action, double reward, Rng& rng) {
  hyperagent_observe(state_, action.feature, reward, cfg_, rng);
}

namespace {

PosteriorStated statistics_only_state(double lambda, Eigen::Index d) {
  return init_with_prior<double>(Eigen::MatrixXd::Zero(d, 1), lambda);
}

}  // namespace

ThompsonAgent::ThompsonAgent(double lambda, double variance_scale, Eigen::Index feature_dim,
                             bool enforce_unit_ball, std::string label)
    : state_(statistics_only_state(lambda, feature_dim)),
      variance_scale_(variance_scale),
      check_(enforce_unit_ball ? FeatureCheck::kUnitBall : FeatureCheck::kNone),
      label_(std::move(label)) {
  if (!(variance_scale >= 0.0)) throw ParameterError("variance scale must be >= 0");
}

Action ThompsonAgent::act(const ActionSet& set, Rng& rng) {
  const Eigen::VectorXd theta = exact_ts_sample(state_, variance_scale_, rng);
  return choose_linear(set, theta);
}

void ThompsonAgent::observe(const ActionSet&, const Action& action, double reward, Rng&) {
  update(state_, action.feature, reward, Eigen::VectorXd::Zero(1), check_);
}

GreedyAgent::GreedyAgent(double lambda, Eigen::Index feature_dim, bool enforce_unit_ball,
                         std::string label)
    : state_(statistics_only_state(lambda, feature_dim)),
      check_(enforce_unit_ball ? FeatureCheck::kUnitBall : FeatureCheck::kNone),
      label_(std::move(label)) {}

Action GreedyAgent::act(const ActionSet& set, Rng&) { return choose_linear(set, state_.mean); }

void GreedyAgent::observe(const ActionSet&, const Action& action, double reward, Rng&) {
  update(state_, action.feature, reward, Eigen::VectorXd::Zero(1), check_);
}

// ---------------------------------------------------------------------------

RegretTrace run_episode(Agent& agent, BanditEnv& env, std::size_t horizon, Rng& env_rng,
                        Rng& agent_rng, std::uint64_t seed_label) {
  RegretTrace trace;
  trace.agent_label = agent.label();
  trace.seed = seed_label;
  trace.per_step_regret.reserve(horizon);
  trace.cumulative.reserve(horizon);
  trace.actions.reserve(horizon);
  double total = 0.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    const ActionSet& set = env.begin_step(t, env_rng);
    const Action action = agent.act(set, agent_rng);
    const double y = env.reward(action, env_rng);
    const double regret = regret_step(env, action);
    agent.observe(set, action, y, agent_rng);
    for (const Feedback& extra : env.counterfactual_feedback(action)) {
      agent.observe(set, extra.action, extra.reward, agent_rng);
    }
    total += regret;
    trace.per_step_regret.push_back(regret);
    trace.cumulative.push_back(total);
    trace.actions.push_back(action.index);
  }
  return trace;
}

}  // namespace hyperagent
