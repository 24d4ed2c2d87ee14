#include "hyperagent/distributions.hpp"

#include <charconv>

namespace hyperagent {

std::string to_string(const DistributionKind& kind) {
  switch (kind.family) {
    case DistributionFamily::kGaussian:
      return "gaussian";
    case DistributionFamily::kSphere:
      return "sphere";
    case DistributionFamily::kCube:
      return "cube";
    case DistributionFamily::kCoord:
      return "coord";
    case DistributionFamily::kSparse:
      return "sparse:" + std::to_string(kind.sparsity);
  }
  return "unknown";
}

DistributionKind parse_distribution_kind(std::string_view text) {
  if (text == "gaussian") return DistributionKind::gaussian();
  if (text == "sphere") return DistributionKind::sphere();
  if (text == "cube") return DistributionKind::cube();
  if (text == "coord") return DistributionKind::coord();
  constexpr std::string_view kSparsePrefix = "sparse:";
  if (text.starts_with(kSparsePrefix)) {
    const std::string_view digits = text.substr(kSparsePrefix.size());
    int s = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), s);
    if (ec == std::errc{} && ptr == digits.data() + digits.size() && s >= 1) {
      return DistributionKind::sparse(s);
    }
  }
  throw ParameterError("unknown distribution kind '" + std::string(text) +
                       "' (expected gaussian, sphere, cube, coord or sparse:<s>)");
}

}  // namespace hyperagent
