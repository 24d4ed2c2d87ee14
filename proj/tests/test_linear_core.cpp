#include <doctest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstring>
#include <sstream>

#include "hyperagent/linear_core.hpp"
#include "hyperagent/snapshot.hpp"
#include "support.hpp"

using namespace hyperagent;
using test_support::random_matrix;
using test_support::random_unit;

namespace {

Eigen::VectorXd random_in_ball(Eigen::Index d, Rng& rng) {
  std::uniform_real_distribution<double> radius(0.0, 1.0);
  return random_unit(d, rng) * radius(rng);
}

struct Sequence {
  Eigen::MatrixXd z0;
  std::vector<Observation<double>> obs;
};

Sequence random_sequence(Eigen::Index d, Eigen::Index M, std::size_t T, Rng& rng) {
  Sequence s;
  s.z0 = random_matrix(d, M, rng) / std::sqrt(static_cast<double>(M));
  std::normal_distribution<double> normal;
  for (std::size_t t = 0; t < T; ++t) {
    s.obs.push_back({random_in_ball(d, rng), normal(rng), random_unit(M, rng)});
  }
  return s;
}

// Independent high-precision evaluation of the index-dimension requirement.
double eq_bound_hp(double d, double T, double s_min_sq, double s_max_sq, double delta) {
  using hp = boost::multiprecision::cpp_bin_float_50;
  const hp s_min = sqrt(hp(s_min_sq));
  const hp inner = (hp(1) + hp(48) / s_min * sqrt(hp(s_max_sq) + hp(T))) / hp(delta);
  const hp rhs = hp(320) * (hp(d) * log(inner) + log(hp(1) + hp(T) / hp(s_min_sq)));
  return static_cast<double>(ceil(rhs));
}

}  // namespace

TEST_SUITE("linear_core") {

TEST_CASE("init prior") {
  Rng rng(1);
  const auto s = init<double>(2, 2, 1.0, DistributionKind::sphere(), rng);
  CHECK(s.mean.isZero(0));
  CHECK(s.covariance.isApprox(Eigen::MatrixXd::Identity(2, 2)));
  CHECK(s.precision.isApprox(Eigen::MatrixXd::Identity(2, 2)));
  CHECK(s.step == 0);

  const auto s4 = init<double>(1, 4, 4.0, DistributionKind::sphere(), rng);
  CHECK(s4.factor.row(0).norm() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(s4.covariance(0, 0) == 0.25);
  CHECK(s4.precision(0, 0) == 4.0);

  CHECK_THROWS_AS(init<double>(2, 2, 0.0, DistributionKind::sphere(), rng), ParameterError);
  CHECK_THROWS_AS(init<double>(2, 2, -1.0, DistributionKind::sphere(), rng), ParameterError);
  CHECK_THROWS_AS(init<double>(0, 2, 1.0, DistributionKind::sphere(), rng), ParameterError);
}

TEST_CASE("prior factor satisfies the t=0 sandwich at M=256") {
  int pass = 0;
  for (int seed = 0; seed < 200; ++seed) {
    Rng rng(derive_seed(77, seed));
    const auto s = init<double>(10, 256, 1.0, DistributionKind::sphere(), rng);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.factor * s.factor.transpose());
    if (eig.eigenvalues().minCoeff() >= 0.5 && eig.eigenvalues().maxCoeff() <= 1.5) ++pass;
  }
  CHECK(pass >= 190);
}

TEST_CASE("one-step ridge with unit prior") {
  auto s = init_with_prior<double>(Eigen::MatrixXd::Zero(2, 1), 1.0);
  update(s, Eigen::Vector2d(1, 0), 1.0, Eigen::VectorXd::Zero(1));
  CHECK(s.mean.isApprox(Eigen::Vector2d(0.5, 0.0)));
  CHECK(s.covariance.isApprox(Eigen::Vector2d(0.5, 1.0).asDiagonal().toDenseMatrix()));
  CHECK(s.step == 1);

  const auto oracle = ridge_oracle<double>({{Eigen::Vector2d(1, 0), 1.0, Eigen::VectorXd::Zero(1)}},
                                           Eigen::MatrixXd::Zero(2, 1), 1.0);
  CHECK(oracle.mean.isApprox(Eigen::Vector2d(0.5, 0.0)));
}

TEST_CASE("zero feature leaves statistics unchanged") {
  Rng rng(2);
  auto s = init<double>(4, 3, 2.0, DistributionKind::cube(), rng);
  for (int i = 0; i < 5; ++i) update(s, random_in_ball(4, rng), 0.3, random_unit(3, rng));
  const auto before = s;
  update(s, Eigen::VectorXd::Zero(4), 5.0, random_unit(3, rng));
  CHECK((s.mean.array() == before.mean.array()).all());
  CHECK((s.covariance.array() == before.covariance.array()).all());
  CHECK((s.factor.array() == before.factor.array()).all());
  CHECK((s.precision.array() == before.precision.array()).all());
  CHECK(s.step == before.step + 1);
}

TEST_CASE("ridge oracle on the empty log is the prior") {
  Rng rng(3);
  const Eigen::MatrixXd z0 = random_matrix(3, 5, rng);
  const auto out = ridge_oracle<double>({}, z0, 4.0);
  CHECK(out.mean.isZero(0));
  CHECK(out.covariance.isApprox(Eigen::MatrixXd::Identity(3, 3) / 4.0));
  CHECK(out.factor.isApprox(z0 / 2.0));
}

TEST_CASE("50 random updates match the batch solution") {
  Rng rng(4);
  const auto seq = random_sequence(5, 6, 50, rng);
  const double lambda = 0.7;
  auto s = init_with_prior<double>(seq.z0, lambda);
  for (const auto& o : seq.obs) update(s, o.phi, o.y, o.z);
  // Direct inverse, not the oracle's LDLT, as a second reference.
  Eigen::MatrixXd gram = lambda * Eigen::MatrixXd::Identity(5, 5);
  Eigen::VectorXd moment = Eigen::VectorXd::Zero(5);
  Eigen::MatrixXd cross = std::sqrt(lambda) * seq.z0;
  for (const auto& o : seq.obs) {
    gram += o.phi * o.phi.transpose();
    moment += o.phi * o.y;
    cross += o.phi * o.z.transpose();
  }
  const Eigen::MatrixXd cov = gram.inverse();
  CHECK((s.mean - cov * moment).norm() < 1e-8);
  CHECK((s.factor - cov * cross).norm() < 1e-8);
  CHECK((s.covariance - cov).norm() < 1e-8);
}

TEST_CASE("iterated updates equal the oracle on random sequences") {
  Rng rng(5);
  std::uniform_int_distribution<int> dim(1, 20), len(0, 200), mdim(1, 16);
  for (int rep = 0; rep < 30; ++rep) {
    const Eigen::Index d = dim(rng), M = mdim(rng);
    const auto seq = random_sequence(d, M, static_cast<std::size_t>(len(rng)), rng);
    auto s = init_with_prior<double>(seq.z0, 1.3);
    for (const auto& o : seq.obs) update(s, o.phi, o.y, o.z);
    const auto oracle = ridge_oracle<double>(seq.obs, seq.z0, 1.3);
    CHECK((s.mean - oracle.mean).norm() < 1e-8);
    CHECK((s.covariance - oracle.covariance).norm() < 1e-8);
    CHECK((s.factor - oracle.factor).norm() < 1e-8);
  }
}

TEST_CASE("precision is the exact Gram matrix and stays consistent with covariance") {
  Rng rng(6);
  const double lambda = 0.5;
  auto s = init<double>(6, 4, lambda, DistributionKind::sphere(), rng);
  Eigen::MatrixXd gram = lambda * Eigen::MatrixXd::Identity(6, 6);
  const Eigen::VectorXd probe = random_unit(6, rng);
  double last_quad = probe.dot(s.covariance * probe);
  double last_beta = beta(s, 0.1);
  for (int t = 0; t < 300; ++t) {
    const Eigen::VectorXd phi = random_in_ball(6, rng);
    update(s, phi, 0.1, random_unit(4, rng));
    gram += phi * phi.transpose();
    CHECK((s.precision - gram).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s.covariance * s.precision - Eigen::MatrixXd::Identity(6, 6)).norm() < 1e-8);
    const double quad = probe.dot(s.covariance * probe);
    CHECK(quad <= last_quad + 1e-14);
    last_quad = quad;
    const double b = beta(s, 0.1);
    CHECK(b >= last_beta - 1e-12);
    last_beta = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.precision);
  CHECK(eig.eigenvalues().minCoeff() >= lambda - 1e-12);
}

TEST_CASE("Sherman-Morrison drift over 1e5 updates") {
  Rng rng(7);
  auto s = init<double>(5, 2, 1.0, DistributionKind::sphere(), rng);
  for (int t = 0; t < 100000; ++t) update(s, random_in_ball(5, rng), 0.0, random_unit(2, rng));
  CHECK((s.covariance * s.precision - Eigen::MatrixXd::Identity(5, 5)).norm() < 1e-6);
}

TEST_CASE("update errors") {
  Rng rng(8);
  auto s = init<double>(3, 2, 1.0, DistributionKind::sphere(), rng);
  const Eigen::VectorXd z = random_unit(2, rng);
  CHECK_THROWS_AS(update(s, Eigen::Vector3d(1, 1, 0), 0.0, z), ContractViolation);
  CHECK_NOTHROW(update(s, Eigen::Vector3d(1, 1, 0), 0.0, z, FeatureCheck::kNone));
  CHECK_NOTHROW(update(s, Eigen::Vector3d(1.0 + 5e-10, 0, 0), 0.0, z));
  CHECK_THROWS_AS(update(s, Eigen::Vector3d(0.1, 0, 0), std::nan(""), z), InputError);
  CHECK_THROWS_AS(update(s, Eigen::Vector3d(0.1, 0, 0), static_cast<double>(INFINITY), z), InputError);
  CHECK_THROWS_AS(update(s, Eigen::Vector2d(0.1, 0), 0.0, z), InputError);
  CHECK_THROWS_AS(update(s, Eigen::Vector3d(0.1, 0, 0), 0.0, Eigen::Vector3d(1, 0, 0)), InputError);
}

TEST_CASE("beta examples") {
  Rng rng(9);
  auto s = init<double>(3, 2, 1.0, DistributionKind::sphere(), rng);
  CHECK(beta(s, std::exp(-2.0)) == doctest::Approx(3.0).epsilon(1e-14));
  const auto s4 = init<double>(7, 2, 4.0, DistributionKind::sphere(), rng);
  CHECK(beta(s4, std::exp(-1.0)) == doctest::Approx(2.0 + std::sqrt(2.0)).epsilon(1e-14));
  update(s, Eigen::Vector3d(1, 0, 0), 0.0, random_unit(2, rng));
  CHECK(beta(s, std::exp(-1.0)) == doctest::Approx(1.0 + std::sqrt(2.0 + std::log(2.0))).epsilon(1e-14));
  CHECK_THROWS_AS(beta(s, 0.0), ParameterError);
  CHECK_THROWS_AS(beta(s, 1.0), ParameterError);
}

TEST_CASE("index values") {
  Rng rng(10);
  auto s = init<double>(4, 3, 1.0, DistributionKind::sphere(), rng);
  for (int i = 0; i < 10; ++i) update(s, random_in_ball(4, rng), 0.5, random_unit(3, rng));
  const Eigen::VectorXd phi = random_in_ball(4, rng);
  const Eigen::VectorXd zeta = random_matrix(3, 1, rng);
  CHECK(index_value(s, phi, Eigen::VectorXd::Zero(3), 1.7) == doctest::Approx(phi.dot(s.mean)));
  CHECK(index_value(s, phi, zeta, 0.0) == doctest::Approx(phi.dot(s.mean)));

  auto unit = init_with_prior<double>(Eigen::MatrixXd::Identity(2, 2), 1.0);
  CHECK(index_value(unit, Eigen::Vector2d(1, 0), Eigen::Vector2d(3, 4), 2.0) == 6.0);
  CHECK_THROWS_AS(index_value(unit, Eigen::Vector3d(1, 0, 0), Eigen::Vector2d(3, 4), 2.0), InputError);
  CHECK_THROWS_AS(index_value(unit, Eigen::Vector2d(1, 0), Eigen::Vector3d(3, 4, 0), 2.0), InputError);
}

TEST_CASE("confidence bounds") {
  auto s = init_with_prior<double>(Eigen::MatrixXd::Zero(2, 1), 1.0);
  update(s, Eigen::Vector2d(0.8, 0), 0.5, Eigen::VectorXd::Zero(1));
  const Eigen::Vector2d phi(0.6, 0.3);
  const double center = s.mean.dot(phi);
  const auto zero_width = confidence_bounds(s, phi, 3.0, 0.0);
  CHECK(zero_width.lower == center);
  CHECK(zero_width.upper == center);
  const auto at_zero = confidence_bounds(s, Eigen::Vector2d(0, 0), 3.0, 2.0);
  CHECK(at_zero.lower == 0.0);
  CHECK(at_zero.upper == 0.0);
  const auto prior = init_with_prior<double>(Eigen::MatrixXd::Zero(2, 1), 1.0);
  const auto wide = confidence_bounds(prior, Eigen::Vector2d(1, 0), 1.0, 2.0);
  CHECK(wide.lower == -1.0);
  CHECK(wide.upper == 1.0);
  CHECK_THROWS_AS(confidence_bounds(prior, Eigen::Vector2d(1, 0), 1.0, -1.0), ParameterError);
}

TEST_CASE("index dimension bound") {
  // 320 (log(1 + 48 sqrt 2) + log 2) = 1576.18..., so the ceiling is 1577.
  CHECK(eq_bound_hp(1, 1, 1, 1, 1) == 1577.0);
  CHECK(min_index_dim(1, 1, 1.0, 1.0, 1.0) == 1577);
  CHECK(min_index_dim(1, 1, 1.0, 1.0, 0.4) > min_index_dim(1, 1, 1.0, 1.0, 0.8));
  CHECK(min_index_dim(3, 50, 2.0, 5.0, 0.1) > min_index_dim(3, 50, 2.0, 5.0, 0.2));
  CHECK(static_cast<double>(min_index_dim(10, 1000, 1.0, 1.0, 0.05)) ==
        eq_bound_hp(10, 1000, 1.0, 1.0, 0.05));
  CHECK(static_cast<double>(min_index_dim(7, 12345, 0.3, 4.0, 0.01)) ==
        eq_bound_hp(7, 12345, 0.3, 4.0, 0.01));
  CHECK_THROWS_AS(min_index_dim(0, 1, 1.0, 1.0, 0.5), ParameterError);
  CHECK_THROWS_AS(min_index_dim(1, 0, 1.0, 1.0, 0.5), ParameterError);
  CHECK_THROWS_AS(min_index_dim(1, 1, 0.0, 1.0, 0.5), ParameterError);
  CHECK_THROWS_AS(min_index_dim(1, 1, 1.0, -1.0, 0.5), ParameterError);
  CHECK_THROWS_AS(min_index_dim(1, 1, 1.0, 1.0, 0.0), ParameterError);
  CHECK_THROWS_AS(min_index_dim(1, 1, 1.0, 1.0, 1.5), ParameterError);
}

TEST_CASE("snapshot round trip is bit exact") {
  Rng rng(11);
  auto s = init<double>(4, 5, 0.3, DistributionKind::cube(), rng);
  for (int i = 0; i < 17; ++i) update(s, random_in_ball(4, rng), 0.2 * i, random_unit(5, rng));
  std::stringstream buf;
  write_snapshot(buf, s);
  CHECK(buf.str().size() == 4 + 4 + 8 + 8 + 8 * (16 + 16 + 20 + 4));
  const auto back = read_snapshot(buf);
  CHECK(back.step == s.step);
  CHECK(back.lambda == s.lambda);
  CHECK((back.precision.array() == s.precision.array()).all());
  CHECK((back.covariance.array() == s.covariance.array()).all());
  CHECK((back.factor.array() == s.factor.array()).all());
  CHECK((back.mean.array() == s.mean.array()).all());

  // Header fields are little-endian at fixed offsets.
  const std::string bytes = [&] { std::stringstream b; write_snapshot(b, s); return b.str(); }();
  CHECK(static_cast<unsigned char>(bytes[0]) == 4);
  CHECK(static_cast<unsigned char>(bytes[4]) == 5);
  CHECK(static_cast<unsigned char>(bytes[8]) == 17);
  auto f64_at = [&](std::size_t offset) {
    double v;
    std::memcpy(&v, bytes.data() + offset, 8);
    return v;
  };
  const std::size_t factor_offset = 24 + 8 * 32;
  CHECK(f64_at(factor_offset) == s.factor(0, 0));
  CHECK(f64_at(factor_offset + 8) == s.factor(0, 1));
  CHECK(f64_at(factor_offset + 8 * 5) == s.factor(1, 0));

  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_snapshot(truncated), FormatError);
}

}
