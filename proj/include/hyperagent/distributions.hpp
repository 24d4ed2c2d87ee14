#pragma once

// Isotropic index distributions over R^M used for the reference (zeta),
// update (xi) and perturbation (z) roles of a hypermodel agent.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "hyperagent/errors.hpp"

namespace hyperagent {

enum class DistributionFamily { kGaussian, kSphere, kCube, kCoord, kSparse };

struct DistributionKind {
  DistributionFamily family = DistributionFamily::kGaussian;
  int sparsity = 0;  // only meaningful for kSparse

  static constexpr DistributionKind gaussian() { return {DistributionFamily::kGaussian, 0}; }
  static constexpr DistributionKind sphere() { return {DistributionFamily::kSphere, 0}; }
  static constexpr DistributionKind cube() { return {DistributionFamily::kCube, 0}; }
  static constexpr DistributionKind coord() { return {DistributionFamily::kCoord, 0}; }
  static constexpr DistributionKind sparse(int s) { return {DistributionFamily::kSparse, s}; }

  friend bool operator==(const DistributionKind&, const DistributionKind&) = default;
};

template <typename Scalar>
using IndexVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// "gaussian", "sphere", "cube", "coord", "sparse:<s>".
std::string to_string(const DistributionKind& kind);
DistributionKind parse_distribution_kind(std::string_view text);

namespace detail {

inline void check_dimension(const DistributionKind& kind, Eigen::Index M) {
  if (M < 1) throw ParameterError("index dimension M must be >= 1, got " + std::to_string(M));
  if (kind.family == DistributionFamily::kSparse && (kind.sparsity < 1 || kind.sparsity > M)) {
    throw ParameterError("sparse distribution needs 1 <= s <= M (s=" +
                         std::to_string(kind.sparsity) + ", M=" + std::to_string(M) + ")");
  }
}

template <typename Scalar, typename Generator>
Scalar random_sign(Generator& rng) {
  return (rng() & 1U) ? Scalar(1) : Scalar(-1);
}

}  // namespace detail

/// One draw at reference scaling. Every family is zero-mean and isotropic
/// (E[X X^T] = I); every family except Gaussian has norm exactly sqrt(M).
template <typename Scalar = double, typename Generator>
IndexVector<Scalar> sample_reference(const DistributionKind& kind, Eigen::Index M, Generator& rng) {
  detail::check_dimension(kind, M);
  const Scalar root_m = std::sqrt(static_cast<Scalar>(M));
  IndexVector<Scalar> out(M);
  switch (kind.family) {
    case DistributionFamily::kGaussian: {
      std::normal_distribution<Scalar> normal;
      for (Eigen::Index i = 0; i < M; ++i) out[i] = normal(rng);
      return out;
    }
    case DistributionFamily::kSphere: {
      std::normal_distribution<Scalar> normal;
      Scalar norm = 0;
      do {
        for (Eigen::Index i = 0; i < M; ++i) out[i] = normal(rng);
        norm = out.norm();
      } while (norm == Scalar(0));
      out *= root_m / norm;
      return out;
    }
    case DistributionFamily::kCube: {
      for (Eigen::Index i = 0; i < M; ++i) out[i] = detail::random_sign<Scalar>(rng);
      return out;
    }
    case DistributionFamily::kCoord: {
      std::uniform_int_distribution<std::int64_t> pick(0, 2 * static_cast<std::int64_t>(M) - 1);
      const std::int64_t k = pick(rng);
      out.setZero();
      out[k / 2] = (k % 2 == 0) ? root_m : -root_m;
      return out;
    }
    case DistributionFamily::kSparse: {
      // Partial Fisher-Yates: the first s slots form a uniform s-subset.
      std::vector<Eigen::Index> idx(static_cast<std::size_t>(M));
      std::iota(idx.begin(), idx.end(), Eigen::Index{0});
      const auto s = static_cast<std::size_t>(kind.sparsity);
      for (std::size_t i = 0; i < s; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
      }
      const Scalar scale = std::sqrt(static_cast<Scalar>(M) / static_cast<Scalar>(kind.sparsity));
      out.setZero();
      for (std::size_t i = 0; i < s; ++i) out[idx[i]] = scale * detail::random_sign<Scalar>(rng);
      return out;
    }
  }
  throw ParameterError("unknown distribution family");
}

/// Perturbation draw: reference sample scaled by 1/sqrt(M). Only Sphere and
/// Cube give the unit-norm, sqrt(1/M)-sub-Gaussian vectors the good-event
/// analysis assumes; other kinds are returned with `compliant == false`.
template <typename Scalar>
struct PerturbationSample {
  IndexVector<Scalar> z;
  bool compliant = false;
};

inline bool is_perturbation_compliant(const DistributionKind& kind) {
  return kind.family == DistributionFamily::kSphere || kind.family == DistributionFamily::kCube;
}

template <typename Scalar = double, typename Generator>
PerturbationSample<Scalar> sample_perturbation(const DistributionKind& kind, Eigen::Index M,
                                               Generator& rng) {
  PerturbationSample<Scalar> out;
  out.z = sample_reference<Scalar>(kind, M, rng);
  out.z /= std::sqrt(static_cast<Scalar>(M));
  out.compliant = is_perturbation_compliant(kind);
  return out;
}

/// Atoms stored column-wise (M x K) with matching probabilities.
template <typename Scalar>
struct FiniteSupport {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> atoms;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;

  Eigen::Index size() const { return atoms.cols(); }
};

inline constexpr std::uint64_t kMaxSupportAtoms = std::uint64_t{1} << 20;
inline constexpr Eigen::Index kMaxCubeSupportDim = 20;

namespace detail {

inline std::optional<std::uint64_t> sparse_support_size(Eigen::Index M, int s) {
  // C(M, s) * 2^s. C(M, i) grows monotonically for i <= min(s, M - s), so the
  // running product can be capped safely.
  if (s > 20) return std::nullopt;
  const Eigen::Index k = std::min<Eigen::Index>(s, M - s);
  unsigned __int128 binom = 1;
  for (Eigen::Index i = 0; i < k; ++i) {
    binom = binom * static_cast<unsigned __int128>(M - i) / static_cast<unsigned __int128>(i + 1);
    if (binom > kMaxSupportAtoms) return std::nullopt;
  }
  const unsigned __int128 count = binom << s;
  if (count > kMaxSupportAtoms) return std::nullopt;
  return static_cast<std::uint64_t>(count);
}

}  // namespace detail

/// Exact enumeration for the discrete families, absent when the support is
/// continuous or larger than 2^20 atoms.
template <typename Scalar = double>
std::optional<FiniteSupport<Scalar>> finite_support(const DistributionKind& kind, Eigen::Index M) {
  detail::check_dimension(kind, M);
  const Scalar root_m = std::sqrt(static_cast<Scalar>(M));
  FiniteSupport<Scalar> out;
  switch (kind.family) {
    case DistributionFamily::kGaussian:
    case DistributionFamily::kSphere:
      return std::nullopt;
    case DistributionFamily::kCoord: {
      out.atoms = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(M, 2 * M);
      for (Eigen::Index i = 0; i < M; ++i) {
        out.atoms(i, 2 * i) = root_m;
        out.atoms(i, 2 * i + 1) = -root_m;
      }
      out.weights.setConstant(2 * M, Scalar(1) / static_cast<Scalar>(2 * M));
      return out;
    }
    case DistributionFamily::kCube: {
      if (M > kMaxCubeSupportDim) return std::nullopt;
      const Eigen::Index count = Eigen::Index{1} << M;
      out.atoms.resize(M, count);
      for (Eigen::Index k = 0; k < count; ++k) {
        for (Eigen::Index i = 0; i < M; ++i) out.atoms(i, k) = ((k >> i) & 1) ? Scalar(-1) : Scalar(1);
      }
      out.weights.setConstant(count, Scalar(1) / static_cast<Scalar>(count));
      return out;
    }
    case DistributionFamily::kSparse: {
      const auto count = detail::sparse_support_size(M, kind.sparsity);
      if (!count) return std::nullopt;
      const int s = kind.sparsity;
      const Scalar scale = std::sqrt(static_cast<Scalar>(M) / static_cast<Scalar>(s));
      out.atoms = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(
          M, static_cast<Eigen::Index>(*count));
      // Walk s-subsets in lexicographic order, then all sign patterns.
      std::vector<Eigen::Index> subset(static_cast<std::size_t>(s));
      std::iota(subset.begin(), subset.end(), Eigen::Index{0});
      Eigen::Index col = 0;
      while (true) {
        for (std::uint32_t signs = 0; signs < (1U << s); ++signs) {
          for (int j = 0; j < s; ++j) {
            out.atoms(subset[j], col) = ((signs >> j) & 1U) ? -scale : scale;
          }
          ++col;
        }
        int j = s - 1;
        while (j >= 0 && subset[j] == M - s + j) --j;
        if (j < 0) break;
        ++subset[j];
        for (int k = j + 1; k < s; ++k) subset[k] = subset[k - 1] + 1;
      }
      out.weights.setConstant(col, Scalar(1) / static_cast<Scalar>(col));
      return out;
    }
  }
  return std::nullopt;
}

/// Lower bound p on P(<zeta, v> >= 1) for any unit v. Absent for Sparse and
/// for Sphere with M < 2.
inline std::optional<double> optimism_floor(const DistributionKind& kind, Eigen::Index M) {
  switch (kind.family) {
    case DistributionFamily::kGaussian:
      return 1.0 / (4.0 * std::sqrt(std::numbers::e * std::numbers::pi));
    case DistributionFamily::kSphere:
      if (M < 2) return std::nullopt;
      return 0.5 - std::exp(1.0 / 12.0) / std::sqrt(2.0 * std::numbers::pi);
    case DistributionFamily::kCube:
      return 7.0 / 32.0;
    case DistributionFamily::kCoord:
      if (M < 1) return std::nullopt;
      return 1.0 / (2.0 * static_cast<double>(M));
    case DistributionFamily::kSparse:
      return std::nullopt;
  }
  return std::nullopt;
}

/// Confidence-width multiplier rho(P_zeta). `n_actions` absent means an
/// infinite (compact) action set, which drops the per-action bound.
inline double rho_coefficient(const DistributionKind& kind, Eigen::Index M, double delta,
                              std::optional<std::uint64_t> n_actions) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ParameterError("delta must lie in (0, 1), got " + std::to_string(delta));
  }
  if (M < 1) throw ParameterError("index dimension M must be >= 1");
  if (n_actions && *n_actions == 0) throw ParameterError("n_actions must be positive");
  const double m = static_cast<double>(M);
  const double rho1 = std::sqrt(2.0 * m * std::log(2.0 * m / delta));
  const double rho2 = std::sqrt(m);
  const std::optional<double> rho3 =
      n_actions ? std::optional<double>(std::sqrt(std::log(2.0 * static_cast<double>(*n_actions) / delta)))
                : std::nullopt;
  switch (kind.family) {
    case DistributionFamily::kGaussian:
      return rho3 ? std::min(rho1, *rho3) : rho1;
    case DistributionFamily::kSphere:
    case DistributionFamily::kCube:
      return rho3 ? std::min(rho2, *rho3) : rho2;
    case DistributionFamily::kCoord:
    case DistributionFamily::kSparse:
      return rho2;
  }
  return rho2;
}

}  // namespace hyperagent
