#pragma once

// Nonlinear HyperAgent: a last-layer linear hypermodel
//   f(x, zeta)[a] = <phi_w(x), (A^a + s A_prior^a) zeta + (b^a + s b_prior^a)>
// over a trainable ReLU feature extractor phi_w, trained by minibatch
// gradient descent on the perturbed, index-averaged squared loss
//   (1/|D~|) sum_{s in D~} E_xi (f(x_s, xi)[a_s] - y_s - sigma z_s^T xi)^2
//     + (lambda / |D|) (||A||_F^2 + ||b||^2).

#include <Eigen/Core>

#include <cstdint>
#include <deque>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "hyperagent/agents.hpp"
#include "hyperagent/distributions.hpp"
#include "hyperagent/mlp.hpp"
#include "hyperagent/random.hpp"

namespace hyperagent {

struct Hypermodel {
  Mlp extractor;
  std::vector<Eigen::MatrixXd> head_A;  // d_feat x M, learnable
  std::vector<Eigen::VectorXd> head_b;  // d_feat, learnable
  std::vector<Eigen::MatrixXd> prior_A;  // frozen
  std::vector<Eigen::VectorXd> prior_b;  // frozen
  double prior_scale = 1.0;

  Eigen::Index input_dim() const { return extractor.input_dim; }
  Eigen::Index feature_dim() const { return extractor.output_dim(); }
  Eigen::Index index_dim() const { return head_A.empty() ? 0 : head_A.front().cols(); }
  std::size_t head_count() const { return head_A.size(); }

  /// A^a + s A_prior^a and b^a + s b_prior^a.
  Eigen::MatrixXd effective_A(std::size_t head) const;
  Eigen::VectorXd effective_b(std::size_t head) const;
};

/// Learnable heads start at zero; prior heads get unit-norm Sphere rows and a
/// zero bias; the extractor is He-initialized.
Hypermodel make_hypermodel(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden,
                           std::size_t n_heads, Eigen::Index M, double prior_scale, Rng& rng);

/// Values for every head at one input.
Eigen::VectorXd forward(const Hypermodel& model, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& zeta);
/// Values of a single head for each column of `inputs`.
Eigen::VectorXd forward_batch(const Hypermodel& model, const Eigen::MatrixXd& inputs,
                              const Eigen::VectorXd& zeta, std::size_t head);

struct Transition {
  Eigen::VectorXd input;
  std::size_t head = 0;
  double y = 0.0;
  Eigen::VectorXd z;  // drawn once at observation time
};

/// FIFO buffer of transitions with their stored perturbations.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void add(Transition t);
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }
  const Transition& operator[](std::size_t i) const { return entries_[i]; }

  /// Whole buffer when it holds at most `n` entries, else `n` uniform draws
  /// with replacement.
  std::vector<Transition> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Transition> entries_;
};

/// Loss with explicit index atoms (columns of `xi`) and their weights.
double weighted_loss(const Hypermodel& model, const std::vector<Transition>& batch,
                     const Eigen::MatrixXd& xi, const Eigen::VectorXd& weights, double sigma,
                     double lambda, std::size_t total_buffer_size);

/// Monte-Carlo objective: uniform weights over the sampled indices.
double sampled_loss(const Hypermodel& model, const std::vector<Transition>& batch,
                    const Eigen::MatrixXd& xi_samples, double sigma, double lambda,
                    std::size_t total_buffer_size);

/// Exact expectation over the finite support of `update_kind`.
/// Throws UnsupportedError for kinds without an enumerable support.
double exact_loss(const Hypermodel& model, const std::vector<Transition>& batch,
                  const DistributionKind& update_kind, double sigma, double lambda,
                  std::size_t total_buffer_size);

/// Same shapes as the learnable parameters of a Hypermodel.
struct HypermodelGradient {
  std::vector<DenseLayer> extractor;
  std::vector<Eigen::MatrixXd> head_A;
  std::vector<Eigen::VectorXd> head_b;
};

struct LossAndGradient {
  double loss = 0.0;
  HypermodelGradient gradient;
};

LossAndGradient loss_and_gradient(const Hypermodel& model, const std::vector<Transition>& batch,
                                  const Eigen::MatrixXd& xi, const Eigen::VectorXd& weights,
                                  double sigma, double lambda, std::size_t total_buffer_size);

/// Learnable parameters flattened as: extractor layers (weight column-major,
/// then bias), then every head's A (column-major) and b.
Eigen::VectorXd flatten_learnable(const Hypermodel& model);
void assign_learnable(Hypermodel& model, const Eigen::VectorXd& flat);
Eigen::VectorXd flatten(const HypermodelGradient& gradient);

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kSgd;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  std::uint64_t steps = 0;
};

OptimizerState make_optimizer(const AgentConfig& cfg);

/// B = cfg.update_steps gradient steps on minibatches from `buffer`; uses the
/// exact expectation when cfg asks for it and the update kind allows it.
/// Returns the loss of the last step (0 when B = 0). Throws TrainingError on
/// a non-finite loss.
double sgd_step(Hypermodel& model, const ReplayBuffer& buffer, const AgentConfig& cfg,
                OptimizerState& optimizer, Rng& rng);

/// Versioned checkpoint of named f32 tensors:
///   "HAMC" | u32 version | u32 tensor_count |
///   per tensor: u32 name_len | name | u32 rank | u64 dims[rank] | f32 data (row-major)
void write_checkpoint(std::ostream& out, const Hypermodel& model);
Hypermodel read_checkpoint(std::istream& in);

/// HyperAgent trained by SGD. With a step context and one head per action the
/// context is the model input; otherwise each action feature is fed through a
/// single head.
class SgdHyperAgent final : public Agent {
 public:
  SgdHyperAgent(AgentConfig cfg, Eigen::Index input_dim, std::size_t n_heads, Rng& rng,
                std::string label = {});

  const std::string& label() const override { return label_; }
  Action act(const ActionSet& set, Rng& rng) override;
  void observe(const ActionSet& set, const Action& action, double reward, Rng& rng) override;

  const Hypermodel& model() const { return model_; }
  const ReplayBuffer& buffer() const { return buffer_; }

 private:
  bool uses_context(const ActionSet& set) const;

  AgentConfig cfg_;
  Hypermodel model_;
  ReplayBuffer buffer_;
  OptimizerState optimizer_;
  std::string label_;
};

}  // namespace hyperagent
