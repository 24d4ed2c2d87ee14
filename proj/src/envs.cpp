#include "hyperagent/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hyperagent/errors.hpp"

namespace hyperagent {

Eigen::Index argmax_first(const Eigen::Ref<const Eigen::VectorXd>& values) {
  if (values.size() == 0) throw InputError("argmax over an empty action set");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

SphereArgmax best_on_sphere(const Eigen::Ref<const Eigen::VectorXd>& scores) {
  SphereArgmax out;
  const double norm = scores.norm();
  if (norm == 0.0 || !std::isfinite(norm)) {
    out.feature = Eigen::VectorXd::Unit(scores.size(), 0);
    out.degenerate = true;
  } else {
    out.feature = scores / norm;
  }
  return out;
}

Action choose_linear(const ActionSet& set, const Eigen::Ref<const Eigen::VectorXd>& scores) {
  if (scores.size() != set.dim) throw InputError("score vector has wrong dimension");
  Action a;
  if (set.compact_sphere) {
    a.index = 0;
    a.feature = best_on_sphere(scores).feature;
    return a;
  }
  if (set.size() == 0) throw InputError("empty action set");
  const Eigen::VectorXd values = set.features * scores;
  a.index = argmax_first(values);
  a.feature = set.features.row(a.index).transpose();
  return a;
}

double regret_step(const BanditEnv& env, const Action& chosen) {
  return env.optimal_value() - env.mean_reward(chosen);
}

namespace {

double max_row_norm(const Eigen::MatrixXd& m) {
  return m.rows() == 0 ? 0.0 : m.rowwise().norm().maxCoeff();
}

Eigen::VectorXd sample_theta(Eigen::Index d, Rng& rng, const LinearEnvOptions& options) {
  std::normal_distribution<double> normal(0.0, std::sqrt(options.prior_variance));
  Eigen::VectorXd theta(d);
  for (Eigen::Index i = 0; i < d; ++i) theta[i] = normal(rng);
  if (options.theta_norm) {
    const double norm = theta.norm();
    if (norm > 0.0) theta *= *options.theta_norm / norm;
  }
  return theta;
}

}  // namespace

// ---------------------------------------------------------------------------

FiniteLinearEnv::FiniteLinearEnv(Eigen::Index d, Eigen::Index n_actions, Rng& rng,
                                 LinearEnvOptions options)
    : noise_std_(options.noise_std) {
  if (d < 1 || n_actions < 1) throw ParameterError("finite_linear_env needs d, n_actions >= 1");
  const double half_width = 1.0 / std::sqrt(5.0);
  std::uniform_real_distribution<double> uniform(-half_width, half_width);
  set_.dim = d;
  set_.features.resize(n_actions, d);
  for (Eigen::Index a = 0; a < n_actions; ++a)
    for (Eigen::Index j = 0; j < d; ++j) set_.features(a, j) = uniform(rng);
  theta_ = sample_theta(d, rng, options);
  optimal_ = (set_.features * theta_).maxCoeff();
}

FiniteLinearEnv::FiniteLinearEnv(Eigen::MatrixXd features, Eigen::VectorXd theta, double noise_std)
    : theta_(std::move(theta)), noise_std_(noise_std) {
  if (features.rows() < 1 || features.cols() != theta_.size()) {
    throw ParameterError("feature matrix and theta are inconsistent");
  }
  set_.dim = features.cols();
  set_.features = std::move(features);
  optimal_ = (set_.features * theta_).maxCoeff();
}

double FiniteLinearEnv::feature_norm_bound() const { return max_row_norm(set_.features); }

double FiniteLinearEnv::mean_reward(const Action& action) const {
  return set_.features.row(action.index).dot(theta_);
}

double FiniteLinearEnv::reward(const Action& action, Rng& rng) const {
  std::normal_distribution<double> noise(0.0, noise_std_);
  return mean_reward(action) + noise(rng);
}

// ---------------------------------------------------------------------------

SphereLinearEnv::SphereLinearEnv(Eigen::Index d, Rng& rng, LinearEnvOptions options)
    : noise_std_(options.noise_std) {
  if (d < 2) throw ParameterError("sphere_linear_env needs d >= 2");
  set_.dim = d;
  set_.compact_sphere = true;
  theta_ = sample_theta(d, rng, options);
}

SphereLinearEnv::SphereLinearEnv(Eigen::VectorXd theta, double noise_std)
    : theta_(std::move(theta)), noise_std_(noise_std) {
  if (theta_.size() < 2) throw ParameterError("sphere_linear_env needs d >= 2");
  set_.dim = theta_.size();
  set_.compact_sphere = true;
}

double SphereLinearEnv::mean_reward(const Action& action) const {
  if (action.feature.size() != theta_.size()) throw InputError("action feature has wrong dimension");
  return action.feature.dot(theta_);
}

double SphereLinearEnv::reward(const Action& action, Rng& rng) const {
  std::normal_distribution<double> noise(0.0, noise_std_);
  return mean_reward(action) + noise(rng);
}

// ---------------------------------------------------------------------------

void TabulatedEnv::set_table(Eigen::MatrixXd features, Eigen::VectorXd means, double noise_std) {
  if (features.rows() < 1 || features.rows() != means.size()) {
    throw ParameterError("action table is inconsistent");
  }
  set_.dim = features.cols();
  set_.features = std::move(features);
  means_ = std::move(means);
  noise_std_ = noise_std;
  optimal_ = means_.maxCoeff();
}

double TabulatedEnv::feature_norm_bound() const { return max_row_norm(set_.features); }

double TabulatedEnv::mean_reward(const Action& action) const {
  if (action.index < 0 || action.index >= means_.size()) throw InputError("action index out of range");
  return means_[action.index];
}

double TabulatedEnv::reward(const Action& action, Rng& rng) const {
  std::normal_distribution<double> noise(0.0, noise_std_);
  return mean_reward(action) + noise(rng);
}

Eigen::MatrixXd sample_sphere_actions(Eigen::Index n_actions, Eigen::Index d, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd out(n_actions, d);
  for (Eigen::Index a = 0; a < n_actions; ++a) {
    double norm = 0.0;
    do {
      for (Eigen::Index j = 0; j < d; ++j) out(a, j) = normal(rng);
      norm = out.row(a).norm();
    } while (norm == 0.0);
    out.row(a) /= norm;
  }
  return out;
}

NeuralEnv::NeuralEnv(Rng& rng, NonlinearEnvOptions options) {
  net_ = make_mlp(options.d, {50, 50, 50, 1}, /*relu_output=*/false, rng);
  Eigen::MatrixXd features = sample_sphere_actions(options.n_actions, options.d, rng);
  const Eigen::VectorXd means = net_.forward(Eigen::MatrixXd(features.transpose())).row(0).transpose();
  set_table(std::move(features), means, options.noise_std);
}

NeuralEnv::NeuralEnv(Mlp reward_net, Eigen::MatrixXd features, double noise_std)
    : net_(std::move(reward_net)) {
  if (net_.output_dim() != 1) throw ParameterError("reward network must have a scalar output");
  const Eigen::VectorXd means = net_.forward(Eigen::MatrixXd(features.transpose())).row(0).transpose();
  set_table(std::move(features), means, noise_std);
}

QuadraticEnv::QuadraticEnv(Rng& rng, NonlinearEnvOptions options) {
  std::normal_distribution<double> normal;
  theta_.resize(options.d, options.d);
  for (Eigen::Index i = 0; i < options.d; ++i)
    for (Eigen::Index j = 0; j < options.d; ++j) theta_(i, j) = normal(rng);
  Eigen::MatrixXd features = sample_sphere_actions(options.n_actions, options.d, rng);
  Eigen::VectorXd means(features.rows());
  for (Eigen::Index a = 0; a < features.rows(); ++a) means[a] = value(theta_, features.row(a).transpose());
  set_table(std::move(features), std::move(means), options.noise_std);
}

QuadraticEnv::QuadraticEnv(Eigen::MatrixXd theta, Eigen::MatrixXd features, double noise_std)
    : theta_(std::move(theta)) {
  if (theta_.rows() != features.cols()) throw ParameterError("Theta and features disagree on d");
  Eigen::VectorXd means(features.rows());
  for (Eigen::Index a = 0; a < features.rows(); ++a) means[a] = value(theta_, features.row(a).transpose());
  set_table(std::move(features), std::move(means), noise_std);
}

double QuadraticEnv::value(const Eigen::MatrixXd& theta, const Eigen::Ref<const Eigen::VectorXd>& a) {
  return 1e-2 * (theta.transpose() * a).squaredNorm();
}

// ---------------------------------------------------------------------------

ModerationEnv::ModerationEnv(EmbeddingDataset data, ModerationOptions options)
    : ModerationEnv(std::make_shared<const EmbeddingDataset>(std::move(data)), options) {}

ModerationEnv::ModerationEnv(std::shared_ptr<const EmbeddingDataset> data, ModerationOptions options)
    : data_(std::move(data)), options_(options) {
  if (!data_ || data_->dim == 0) throw DataError("embedding dimension must be positive");
  order_.resize(data_->size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (options_.shuffle) {
    Rng shuffle_rng(options_.shuffle_seed);
    std::shuffle(order_.begin(), order_.end(), shuffle_rng);
  }
  const Eigen::Index k = static_cast<Eigen::Index>(data_->dim) + 1;
  set_.dim = 2 * k;
  set_.features = Eigen::MatrixXd::Zero(2, 2 * k);
}

ModerationEnv ModerationEnv::from_file(const std::string& path, ModerationOptions options) {
  return ModerationEnv(load_hbe1(path), options);
}

const ActionSet& ModerationEnv::begin_step(std::size_t t, Rng&) {
  if (t >= order_.size()) {
    throw InputError("moderation stream exhausted at step " + std::to_string(t) + " of " +
                     std::to_string(order_.size()));
  }
  current_ = t;
  const float* row = data_->row(order_[t]);
  const Eigen::Index d = data_->dim;
  Eigen::VectorXd x(d);
  for (Eigen::Index j = 0; j < d; ++j) x[j] = static_cast<double>(row[j]);
  Eigen::VectorXd augmented(d + 1);
  augmented << x, 1.0;
  augmented /= augmented.norm();
  set_.features.setZero();
  set_.features.row(kPublish).head(d + 1) = augmented.transpose();
  set_.features.row(kBlock).tail(d + 1) = augmented.transpose();
  set_.context = std::move(x);
  return set_;
}

double ModerationEnv::mean_reward(const Action& action) const {
  if (action.index == kBlock) return kBlockReward;
  if (action.index != kPublish) throw InputError("moderation action must be publish or block");
  return current_label() == kLabelFree ? kPublishFreeReward : kPublishHateReward;
}

double ModerationEnv::optimal_value() const {
  return current_label() == kLabelFree ? kPublishFreeReward : kBlockReward;
}

std::vector<Feedback> ModerationEnv::counterfactual_feedback(const Action& action) const {
  if (!options_.reveal_blocked || action.index != kBlock) return {};
  Feedback f;
  f.action.index = kPublish;
  f.action.feature = set_.features.row(kPublish).transpose();
  f.reward = mean_reward(f.action);
  return {f};
}

}  // namespace hyperagent
