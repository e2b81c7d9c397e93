#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cfsdcn {

// Finite-difference verification of the analytical backward passes, run in
// double precision. Each case draws random inputs and parameters, reduces the
// output to a scalar with a fixed random weighting, and compares the tape's
// gradient against central differences.
//
// Error per tensor:  max_i |g_i - d_i| / max(max_i |d_i|, abs_floor)
// over the probed coordinates i (all of them for small tensors).

struct GradcheckOptions {
  int seeds = 20;                 // accepted draws per case
  int max_attempts = 200;         // including lattice rejections
  double step = 1e-5;
  double tolerance = 1e-4;
  double abs_floor = 1e-3;
  /// Draws whose bilinear sampling points come closer than this to the
  /// integer lattice (where the interpolant has kinks) are redrawn.
  double min_lattice_margin = 2e-4;
  int coords_per_tensor = 16;
  std::uint64_t seed = 1;
};

struct GradcheckResult {
  std::string name;
  int seeds_checked = 0;
  int seeds_rejected = 0;
  double max_error = 0;
  std::string worst_tensor;
  double seconds = 0;
  bool passed = false;
};

/// conv2d, depthwise, pointwise, softmax_group, deform, cfsab, cfsdcb, model.
const std::vector<std::string>& gradcheck_cases();

/// Throws std::invalid_argument for an unknown case name.
GradcheckResult run_gradcheck(const std::string& name, const GradcheckOptions& options = {});

}  // namespace cfsdcn
