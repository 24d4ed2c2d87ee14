#include "hyperagent/linear_core.hpp"

#include <cmath>
#include <limits>

namespace hyperagent {

std::uint64_t min_index_dim(std::uint64_t d, std::uint64_t T, double s_min_sq, double s_max_sq,
                            double delta) {
  if (d < 1) throw ParameterError("d must be >= 1");
  if (T < 1) throw ParameterError("T must be >= 1");
  if (!(s_min_sq > 0.0) || !(s_max_sq > 0.0)) throw ParameterError("s_min^2 and s_max^2 must be positive");
  if (!(delta > 0.0 && delta <= 1.0)) throw ParameterError("delta must lie in (0, 1]");
  const long double s_min = std::sqrt(static_cast<long double>(s_min_sq));
  const long double t = static_cast<long double>(T);
  const long double inner =
      (1.0L + (48.0L / s_min) * std::sqrt(static_cast<long double>(s_max_sq) + t)) /
      static_cast<long double>(delta);
  const long double rhs = 320.0L * (static_cast<long double>(d) * std::log(inner) +
                                    std::log(1.0L + t / static_cast<long double>(s_min_sq)));
  if (rhs >= static_cast<long double>(std::numeric_limits<std::uint64_t>::max())) {
    throw ParameterError("index dimension bound overflows 64 bits");
  }
  return static_cast<std::uint64_t>(std::ceil(rhs));
}

}  // namespace hyperagent
