#pragma once

// Bandit environments with known ground truth f* and exact regret accounting.

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hyperagent/hbe1.hpp"
#include "hyperagent/mlp.hpp"
#include "hyperagent/random.hpp"

namespace hyperagent {

/// The actions available at one step. Finite sets list one feature per row.
/// A compact set (the unit sphere) has no rows; agents pick a feature
/// directly through `best_on_sphere`.
struct ActionSet {
  Eigen::MatrixXd features;                // n_actions x d
  std::optional<Eigen::VectorXd> context;  // raw context, for per-action-head models
  bool compact_sphere = false;
  Eigen::Index dim = 0;

  Eigen::Index size() const { return features.rows(); }
};

struct Action {
  Eigen::Index index = 0;  // row of ActionSet::features; 0 for compact sets
  Eigen::VectorXd feature;
};

/// Extra (action, reward) pair the learner sees besides its own reward.
struct Feedback {
  Action action;
  double reward = 0.0;
};

/// Lowest-index argmax.
Eigen::Index argmax_first(const Eigen::Ref<const Eigen::VectorXd>& values);

struct SphereArgmax {
  Eigen::VectorXd feature;
  bool degenerate = false;
};

/// argmax over the unit sphere of <x, v> is v / ||v||; zero v yields e_1.
SphereArgmax best_on_sphere(const Eigen::Ref<const Eigen::VectorXd>& scores);

/// Picks the action maximizing <feature, scores>.
Action choose_linear(const ActionSet& set, const Eigen::Ref<const Eigen::VectorXd>& scores);

class BanditEnv {
 public:
  virtual ~BanditEnv() = default;

  virtual std::string name() const = 0;
  virtual Eigen::Index feature_dim() const = 0;
  /// Upper bound on ||phi|| over every feature the env can emit.
  virtual double feature_norm_bound() const = 0;
  /// Absent for a compact action set.
  virtual std::optional<std::uint64_t> action_count() const = 0;
  /// Number of steps the env can serve, absent if unbounded.
  virtual std::optional<std::size_t> max_steps() const { return std::nullopt; }

  /// Prepares and returns the step-t action set. t counts from 0.
  virtual const ActionSet& begin_step(std::size_t t, Rng& rng) = 0;
  /// Noiseless f*(action) for the current step.
  virtual double mean_reward(const Action& action) const = 0;
  /// Realized reward f*(action) + noise.
  virtual double reward(const Action& action, Rng& rng) const = 0;
  /// max_a f*(a) over the current step's set.
  virtual double optimal_value() const = 0;

  /// theta* for linear-realizable envs.
  virtual std::optional<Eigen::VectorXd> linear_parameter() const { return std::nullopt; }
  virtual std::vector<Feedback> counterfactual_feedback(const Action&) const { return {}; }
};

/// optimal_value - f*(chosen); never uses the realized reward.
double regret_step(const BanditEnv& env, const Action& chosen);

struct LinearEnvOptions {
  double noise_std = 1.0;
  double prior_variance = 10.0;
  /// Rescale theta* to this Euclidean norm after drawing it.
  std::optional<double> theta_norm;
};

/// Fixed set of features uniform in [-1/sqrt(5), 1/sqrt(5)]^d,
/// theta* ~ N(0, prior_variance I), Gaussian reward noise.
class FiniteLinearEnv final : public BanditEnv {
 public:
  FiniteLinearEnv(Eigen::Index d, Eigen::Index n_actions, Rng& rng, LinearEnvOptions options = {});
  FiniteLinearEnv(Eigen::MatrixXd features, Eigen::VectorXd theta, double noise_std);

  std::string name() const override { return "finite_linear"; }
  Eigen::Index feature_dim() const override { return set_.dim; }
  double feature_norm_bound() const override;
  std::optional<std::uint64_t> action_count() const override {
    return static_cast<std::uint64_t>(set_.size());
  }
  const ActionSet& begin_step(std::size_t, Rng&) override { return set_; }
  double mean_reward(const Action& action) const override;
  double reward(const Action& action, Rng& rng) const override;
  double optimal_value() const override { return optimal_; }
  std::optional<Eigen::VectorXd> linear_parameter() const override { return theta_; }

  const ActionSet& actions() const { return set_; }

 private:
  ActionSet set_;
  Eigen::VectorXd theta_;
  double noise_std_;
  double optimal_;
};

/// Compact action set S^{d-1}; optimal value ||theta*||.
class SphereLinearEnv final : public BanditEnv {
 public:
  SphereLinearEnv(Eigen::Index d, Rng& rng, LinearEnvOptions options = {});
  SphereLinearEnv(Eigen::VectorXd theta, double noise_std);

  std::string name() const override { return "sphere_linear"; }
  Eigen::Index feature_dim() const override { return set_.dim; }
  double feature_norm_bound() const override { return 1.0; }
  std::optional<std::uint64_t> action_count() const override { return std::nullopt; }
  const ActionSet& begin_step(std::size_t, Rng&) override { return set_; }
  double mean_reward(const Action& action) const override;
  double reward(const Action& action, Rng& rng) const override;
  double optimal_value() const override { return theta_.norm(); }
  std::optional<Eigen::VectorXd> linear_parameter() const override { return theta_; }

 private:
  ActionSet set_;
  Eigen::VectorXd theta_;
  double noise_std_;
};

/// Fixed finite action set with an arbitrary deterministic mean-reward table.
/// Base for the nonlinear envs, whose f* values are precomputed per action.
class TabulatedEnv : public BanditEnv {
 public:
  Eigen::Index feature_dim() const override { return set_.dim; }
  double feature_norm_bound() const override;
  std::optional<std::uint64_t> action_count() const override {
    return static_cast<std::uint64_t>(set_.size());
  }
  const ActionSet& begin_step(std::size_t, Rng&) override { return set_; }
  double mean_reward(const Action& action) const override;
  double reward(const Action& action, Rng& rng) const override;
  double optimal_value() const override { return optimal_; }

  const Eigen::VectorXd& mean_rewards() const { return means_; }

 protected:
  void set_table(Eigen::MatrixXd features, Eigen::VectorXd means, double noise_std);

 private:
  ActionSet set_;
  Eigen::VectorXd means_;
  double noise_std_ = 0.0;
  double optimal_ = 0.0;
};

struct NonlinearEnvOptions {
  Eigen::Index d = 100;
  Eigen::Index n_actions = 1000;
  double noise_std = 0.1;
};

/// Draws n_actions features uniformly on the unit sphere in R^d.
Eigen::MatrixXd sample_sphere_actions(Eigen::Index n_actions, Eigen::Index d, Rng& rng);

/// f*(a) given by a fixed random ReLU network with three 50-unit hidden layers.
class NeuralEnv final : public TabulatedEnv {
 public:
  NeuralEnv(Rng& rng, NonlinearEnvOptions options = {});
  NeuralEnv(Mlp reward_net, Eigen::MatrixXd features, double noise_std);

  std::string name() const override { return "neural"; }
  const Mlp& reward_net() const { return net_; }

 private:
  Mlp net_;
};

/// f*(a) = 1e-2 * a^T Theta Theta^T a with Theta entries N(0, 1).
class QuadraticEnv final : public TabulatedEnv {
 public:
  QuadraticEnv(Rng& rng, NonlinearEnvOptions options = {});
  QuadraticEnv(Eigen::MatrixXd theta, Eigen::MatrixXd features, double noise_std);

  std::string name() const override { return "quadratic"; }
  const Eigen::MatrixXd& theta() const { return theta_; }
  static double value(const Eigen::MatrixXd& theta, const Eigen::Ref<const Eigen::VectorXd>& a);

 private:
  Eigen::MatrixXd theta_;
};

struct ModerationOptions {
  bool shuffle = false;
  std::uint64_t shuffle_seed = 0;
  /// Reveal the label of blocked posts (counterfactual publish reward).
  bool reveal_blocked = false;
};

inline constexpr Eigen::Index kPublish = 0;
inline constexpr Eigen::Index kBlock = 1;
inline constexpr double kBlockReward = 0.5;
inline constexpr double kPublishFreeReward = 1.0;
inline constexpr double kPublishHateReward = -0.5;

/// Content moderation over precomputed embeddings. Each step serves one post
/// with two actions: publish (index 0) and block (index 1). Action features
/// are block-disjoint copies of the normalized embedding with a bias term:
///   x~ = [x; 1] / ||[x; 1]||,  phi(publish) = [x~; 0],  phi(block) = [0; x~].
/// The raw embedding is exposed as the step context.
class ModerationEnv final : public BanditEnv {
 public:
  explicit ModerationEnv(std::shared_ptr<const EmbeddingDataset> data, ModerationOptions options = {});
  explicit ModerationEnv(EmbeddingDataset data, ModerationOptions options = {});

  static ModerationEnv from_file(const std::string& path, ModerationOptions options = {});

  std::string name() const override { return "moderation"; }
  Eigen::Index feature_dim() const override { return 2 * (static_cast<Eigen::Index>(data_->dim) + 1); }
  double feature_norm_bound() const override { return 1.0; }
  std::optional<std::uint64_t> action_count() const override { return 2; }
  std::optional<std::size_t> max_steps() const override { return order_.size(); }

  const ActionSet& begin_step(std::size_t t, Rng& rng) override;
  double mean_reward(const Action& action) const override;
  double reward(const Action& action, Rng&) const override { return mean_reward(action); }
  double optimal_value() const override;
  std::vector<Feedback> counterfactual_feedback(const Action& action) const override;

  std::uint8_t current_label() const { return data_->labels[order_[current_]]; }
  std::size_t post_count() const { return data_->size(); }
  std::uint32_t embedding_dim() const { return data_->dim; }

 private:
  std::shared_ptr<const EmbeddingDataset> data_;
  ModerationOptions options_;
  std::vector<std::size_t> order_;
  std::size_t current_ = 0;
  ActionSet set_;
};

}  // namespace hyperagent
