#pragma once

// Checkpoint of a linear posterior: little-endian header
//   u32 d, u32 M, u64 t, f64 lambda
// followed by row-major f64 arrays precision (d*d), covariance (d*d),
// factor (d*M) and mean (d).

#include <istream>
#include <ostream>
#include <string>

#include "hyperagent/linear_core.hpp"

namespace hyperagent {

void write_snapshot(std::ostream& out, const PosteriorStated& state);
PosteriorStated read_snapshot(std::istream& in);

void save_snapshot(const std::string& path, const PosteriorStated& state);
PosteriorStated load_snapshot(const std::string& path);

}  // namespace hyperagent
