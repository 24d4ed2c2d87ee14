#pragma once

// Closed-form incremental posterior approximation for a linear hypermodel
//   f(a, zeta) = <phi(a), beta * A zeta + mu>.
// With a zero-mean isotropic update distribution the training objective has
// a closed-form minimizer that can be maintained with rank-one updates:
//   prec_t   = prec_{t-1} + phi phi^T
//   cov_t    = Sherman-Morrison(cov_{t-1}, phi)
//   mu_t     = cov_t (prec_{t-1} mu_{t-1} + phi y)
//   A_t      = cov_t (prec_{t-1} A_{t-1} + phi z^T)

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hyperagent/distributions.hpp"
#include "hyperagent/errors.hpp"

namespace hyperagent {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Sufficient statistics of the linear agent. `precision` and `covariance`
/// are kept redundantly; `covariance` is refreshed from `precision` every
/// `kRefactorInterval` updates.
template <typename Scalar>
struct PosteriorState {
  Mat<Scalar> precision;   // Sigma_t^{-1}, d x d
  Mat<Scalar> covariance;  // Sigma_t, d x d
  Mat<Scalar> factor;      // A_t, d x M
  Vec<Scalar> mean;        // mu_t
  std::uint64_t step = 0;
  Scalar lambda = 1;

  Eigen::Index feature_dim() const { return precision.rows(); }
  Eigen::Index index_dim() const { return factor.cols(); }
};

using PosteriorStated = PosteriorState<double>;

inline constexpr std::uint64_t kRefactorInterval = 1000;

/// Whether `update` enforces ||phi|| <= 1.
enum class FeatureCheck { kUnitBall, kNone };

template <typename Scalar>
struct ConfidenceBound {
  Scalar lower;
  Scalar upper;
};

/// Prior state from an explicit Z0 (d x M): A_0 = Z0 / sqrt(lambda).
template <typename Scalar>
PosteriorState<Scalar> init_with_prior(const Mat<Scalar>& z0, Scalar lambda) {
  if (!(lambda > 0)) throw ParameterError("lambda must be positive");
  if (z0.rows() < 1 || z0.cols() < 1) throw ParameterError("Z0 must be at least 1 x 1");
  const Eigen::Index d = z0.rows();
  PosteriorState<Scalar> s;
  s.lambda = lambda;
  s.precision = Mat<Scalar>::Identity(d, d) * lambda;
  s.covariance = Mat<Scalar>::Identity(d, d) / lambda;
  s.mean = Vec<Scalar>::Zero(d);
  s.factor = z0 / std::sqrt(lambda);
  s.step = 0;
  return s;
}

/// Draws Z0 with i.i.d. rows from the perturbation distribution.
template <typename Scalar, typename Generator>
Mat<Scalar> sample_prior_perturbations(Eigen::Index d, Eigen::Index M,
                                       const DistributionKind& perturbation, Generator& rng) {
  Mat<Scalar> z0(d, M);
  for (Eigen::Index i = 0; i < d; ++i) {
    z0.row(i) = sample_perturbation<Scalar>(perturbation, M, rng).z.transpose();
  }
  return z0;
}

template <typename Scalar = double, typename Generator>
PosteriorState<Scalar> init(Eigen::Index d, Eigen::Index M, Scalar lambda,
                            const DistributionKind& perturbation, Generator& rng) {
  if (d < 1 || M < 1) throw ParameterError("d and M must be >= 1");
  if (!(lambda > 0)) throw ParameterError("lambda must be positive");
  return init_with_prior<Scalar>(sample_prior_perturbations<Scalar>(d, M, perturbation, rng),
                                 lambda);
}

/// Recomputes covariance from precision by Cholesky solve and symmetrizes both.
template <typename Scalar>
void refactorize(PosteriorState<Scalar>& s) {
  s.precision = ((s.precision + s.precision.transpose()) / Scalar(2)).eval();
  Eigen::LLT<Mat<Scalar>> llt(s.precision);
  if (llt.info() != Eigen::Success) throw NumericalError("precision lost positive definiteness");
  s.covariance = llt.solve(Mat<Scalar>::Identity(s.feature_dim(), s.feature_dim()));
  s.covariance = ((s.covariance + s.covariance.transpose()) / Scalar(2)).eval();
}

/// One observation (phi, y, z). O(d^2 + dM) per call.
///
/// The gain form below is algebraically the recursion in the header comment:
/// with k = cov_t phi = cov_{t-1} phi / (1 + phi^T cov_{t-1} phi),
///   mu_t = mu_{t-1} + k (y - phi^T mu_{t-1}),  A_t = A_{t-1} + k (z - A_{t-1}^T phi)^T.
template <typename Scalar, typename PhiT, typename ZT>
void update(PosteriorState<Scalar>& s, const Eigen::MatrixBase<PhiT>& phi, Scalar y,
            const Eigen::MatrixBase<ZT>& z, FeatureCheck check = FeatureCheck::kUnitBall) {
  if (phi.size() != s.feature_dim()) {
    throw InputError("feature has dimension " + std::to_string(phi.size()) + ", expected " +
                     std::to_string(s.feature_dim()));
  }
  if (z.size() != s.index_dim()) {
    throw InputError("perturbation has dimension " + std::to_string(z.size()) + ", expected " +
                     std::to_string(s.index_dim()));
  }
  if (!std::isfinite(static_cast<double>(y))) throw InputError("reward is not finite");
  if (check == FeatureCheck::kUnitBall && phi.norm() > Scalar(1) + Scalar(1e-9)) {
    throw ContractViolation("feature norm " + std::to_string(static_cast<double>(phi.norm())) +
                            " exceeds the unit ball");
  }

  const Vec<Scalar> cov_phi = s.covariance * phi;
  const Scalar denom = Scalar(1) + phi.dot(cov_phi);
  const Vec<Scalar> gain = cov_phi / denom;

  s.precision.noalias() += phi * phi.transpose();
  s.covariance.noalias() -= gain * cov_phi.transpose();
  const Scalar innovation = y - phi.dot(s.mean);
  s.mean.noalias() += gain * innovation;
  const Vec<Scalar> residual = z - s.factor.transpose() * phi;
  s.factor.noalias() += gain * residual.transpose();
  ++s.step;

  if (s.step % kRefactorInterval == 0) refactorize(s);
}

template <typename Scalar>
struct Observation {
  Vec<Scalar> phi;
  Scalar y;
  Vec<Scalar> z;
};

template <typename Scalar>
struct BatchSolution {
  Vec<Scalar> mean;
  Mat<Scalar> covariance;
  Mat<Scalar> factor;
};

/// Direct dense evaluation of the stationary point after all observations:
///   Sigma = (lambda I + sum phi phi^T)^{-1}
///   mu    = Sigma sum phi y
///   A     = Sigma (sqrt(lambda) Z0 + sum phi z^T)
/// Test oracle only; it shares no code with `update`.
template <typename Scalar>
BatchSolution<Scalar> ridge_oracle(const std::vector<Observation<Scalar>>& observations,
                                   const Mat<Scalar>& z0, Scalar lambda) {
  if (!(lambda > 0)) throw ParameterError("lambda must be positive");
  const Eigen::Index d = z0.rows();
  Mat<Scalar> gram = Mat<Scalar>::Identity(d, d) * lambda;
  Vec<Scalar> moment = Vec<Scalar>::Zero(d);
  Mat<Scalar> cross = z0 * std::sqrt(lambda);
  for (const auto& o : observations) {
    gram += o.phi * o.phi.transpose();
    moment += o.phi * o.y;
    cross += o.phi * o.z.transpose();
  }
  Eigen::LDLT<Mat<Scalar>> solver(gram);
  BatchSolution<Scalar> out;
  out.covariance = solver.solve(Mat<Scalar>::Identity(d, d));
  out.mean = solver.solve(moment);
  out.factor = solver.solve(cross);
  return out;
}

/// Confidence-ellipsoid inflation
///   sqrt(lambda) + sqrt(2 log(1/delta) + log det(prec) - d log(lambda)).
template <typename Scalar>
Scalar beta(const PosteriorState<Scalar>& s, Scalar delta) {
  if (!(delta > 0 && delta < 1)) throw ParameterError("delta must lie in (0, 1)");
  Eigen::LLT<Mat<Scalar>> llt(s.precision);
  if (llt.info() != Eigen::Success) throw NumericalError("precision is not positive definite");
  const Scalar log_det = Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
  const Scalar radicand = Scalar(2) * std::log(Scalar(1) / delta) + log_det -
                          static_cast<Scalar>(s.feature_dim()) * std::log(s.lambda);
  return std::sqrt(s.lambda) + std::sqrt(std::max(radicand, Scalar(0)));
}

/// beta * A zeta + mu: the linear score whose inner product with a feature is
/// that action's index value.
template <typename Scalar, typename ZetaT>
Vec<Scalar> index_scores(const PosteriorState<Scalar>& s, const Eigen::MatrixBase<ZetaT>& zeta,
                         Scalar beta_value) {
  if (zeta.size() != s.index_dim()) throw InputError("index has wrong dimension");
  return beta_value * (s.factor * zeta) + s.mean;
}

template <typename Scalar, typename PhiT, typename ZetaT>
Scalar index_value(const PosteriorState<Scalar>& s, const Eigen::MatrixBase<PhiT>& phi,
                   const Eigen::MatrixBase<ZetaT>& zeta, Scalar beta_value) {
  if (phi.size() != s.feature_dim()) throw InputError("feature has wrong dimension");
  return phi.dot(index_scores(s, zeta, beta_value));
}

template <typename Scalar, typename PhiT>
ConfidenceBound<Scalar> confidence_bounds(const PosteriorState<Scalar>& s,
                                          const Eigen::MatrixBase<PhiT>& phi, Scalar beta_value,
                                          Scalar rho) {
  if (rho < 0) throw ParameterError("rho must be non-negative");
  if (phi.size() != s.feature_dim()) throw InputError("feature has wrong dimension");
  const Scalar center = s.mean.dot(phi);
  const Scalar quad = std::max(phi.dot(s.covariance * phi), Scalar(0));
  const Scalar width = beta_value * rho * std::sqrt(quad);
  return {std::max(center - width, Scalar(-1)), std::min(center + width, Scalar(1))};
}

/// Smallest integer M satisfying the index-dimension requirement of the
/// incremental good-event lemma:
///   320 (d log((1 + (48/s_min) sqrt(s_max^2 + T)) / delta) + log(1 + T / s_min^2)).
/// delta = 1 is accepted (the log(1/delta) contribution is then zero).
std::uint64_t min_index_dim(std::uint64_t d, std::uint64_t T, double s_min_sq, double s_max_sq,
                            double delta);

}  // namespace hyperagent
