#pragma once

#include <Eigen/Core>

#include <vector>

#include "hyperagent/random.hpp"

namespace hyperagent {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Fully connected ReLU network. Hidden layers always apply ReLU; the last
/// layer applies it only when `relu_output` is set. No layers means identity.
struct Mlp {
  std::vector<DenseLayer> layers;
  bool relu_output = true;
  Eigen::Index input_dim = 0;

  Eigen::Index output_dim() const {
    return layers.empty() ? input_dim : layers.back().weight.rows();
  }

  /// Columns of `inputs` are samples.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;

  std::size_t parameter_count() const;
};

/// He-normal weights, zero biases. `sizes` lists the output width of each layer.
Mlp make_mlp(Eigen::Index input_dim, const std::vector<Eigen::Index>& sizes, bool relu_output,
             Rng& rng);

}  // namespace hyperagent
