#include "hyperagent/mlp.hpp"

#include <cmath>

namespace hyperagent {

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& inputs) const {
  Eigen::MatrixXd h = inputs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd next = layers[l].weight * h;
    next.colwise() += layers[l].bias;
    if (l + 1 < layers.size() || relu_output) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
  Eigen::VectorXd h = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::VectorXd next = layers[l].weight * h + layers[l].bias;
    if (l + 1 < layers.size() || relu_output) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
  return n;
}

Mlp make_mlp(Eigen::Index input_dim, const std::vector<Eigen::Index>& sizes, bool relu_output,
             Rng& rng) {
  Mlp net;
  net.input_dim = input_dim;
  net.relu_output = relu_output;
  Eigen::Index fan_in = input_dim;
  std::normal_distribution<double> normal;
  for (const Eigen::Index width : sizes) {
    DenseLayer layer;
    layer.weight.resize(width, fan_in);
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (Eigen::Index r = 0; r < width; ++r)
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weight(r, c) = scale * normal(rng);
    layer.bias = Eigen::VectorXd::Zero(width);
    net.layers.push_back(std::move(layer));
    fan_in = width;
  }
  return net;
}

}  // namespace hyperagent
