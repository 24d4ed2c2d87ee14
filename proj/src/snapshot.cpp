#include "hyperagent/snapshot.hpp"

#include <fstream>
#include <limits>

#include "hyperagent/binary_io.hpp"

namespace hyperagent {
namespace {

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) binary::write_le<double>(out, m(r, c));
}

Eigen::MatrixXd read_matrix(binary::Reader& in, Eigen::Index rows, Eigen::Index cols,
                            const char* what) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = in.read<double>(what);
  return m;
}

}  // namespace

void write_snapshot(std::ostream& out, const PosteriorStated& s) {
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  if (s.feature_dim() > kMax || s.index_dim() > kMax) {
    throw ParameterError("state dimensions do not fit the snapshot header");
  }
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.feature_dim()));
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.index_dim()));
  binary::write_le<std::uint64_t>(out, s.step);
  binary::write_le<double>(out, s.lambda);
  write_matrix(out, s.precision);
  write_matrix(out, s.covariance);
  write_matrix(out, s.factor);
  write_matrix(out, s.mean);
}

PosteriorStated read_snapshot(std::istream& in) {
  binary::Reader reader(in);
  PosteriorStated s;
  const auto d = static_cast<Eigen::Index>(reader.read<std::uint32_t>("d"));
  const auto m = static_cast<Eigen::Index>(reader.read<std::uint32_t>("M"));
  if (d < 1 || m < 1) throw FormatError("snapshot dimensions must be positive", 0);
  s.step = reader.read<std::uint64_t>("t");
  s.lambda = reader.read<double>("lambda");
  if (!(s.lambda > 0.0)) throw FormatError("snapshot lambda must be positive", 16);
  s.precision = read_matrix(reader, d, d, "precision");
  s.covariance = read_matrix(reader, d, d, "covariance");
  s.factor = read_matrix(reader, d, m, "factor");
  s.mean = read_matrix(reader, d, 1, "mean");
  return s;
}

void save_snapshot(const std::string& path, const PosteriorStated& state) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_snapshot(out, state);
  if (!out) throw std::runtime_error("failed writing " + path);
}

PosteriorStated load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_snapshot(in);
}

}  // namespace hyperagent
