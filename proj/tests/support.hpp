#pragma once

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "hyperagent/random.hpp"

namespace test_support {

inline double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

/// Standard error of a Bernoulli frequency.
inline double bernoulli_se(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

inline Eigen::VectorXd random_unit(Eigen::Index d, hyperagent::Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = normal(rng);
  return v / v.norm();
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, hyperagent::Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal(rng);
  return m;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hyperagent_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test_support
