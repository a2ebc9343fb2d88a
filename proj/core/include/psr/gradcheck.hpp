#pragma once

#include <cstdint>
#include <vector>

namespace psr {

/// One finite-difference comparison: max |analytic - fd| over the checked
/// coordinates, relative to the largest fd magnitude.
struct GradCheckEntry {
  const char* name = "";
  int resolution = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;

  bool ok() const { return max_rel_error < tolerance; }
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;

  bool ok() const {
    for (const auto& e : entries) {
      if (!e.ok()) return false;
    }
    return !entries.empty();
  }
  double worst_rel_error() const;
};

/// Central finite-difference verification of every backward path at
/// resolutions 8 and 16: trilinear sampling, rasterization, the full
/// forward/backward solve, and the Chamfer gradient.
GradCheckReport run_gradcheck(std::uint64_t seed);

}  // namespace psr
