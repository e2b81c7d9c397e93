#pragma once

#include <cstdint>
#include <vector>

#include "cfsdcn/array.hpp"
#include "cfsdcn/optics.hpp"

namespace cfsdcn {

/// Procedural scene: a smoothly shaded background plus overlapping discs,
/// ellipses and rectangles with hard edges. Every region carries a smooth
/// spectrum (baseline plus one or two Gaussian bumps over the band axis).
/// Values lie in [0, 1].
HsiCube synthesize_scene(int h, int w, int bands, std::uint64_t seed);

/// `count` scenes with seeds mix_seed(seed, i).
std::vector<HsiCube> synthesize_dataset(int count, int h, int w, int bands, std::uint64_t seed);

HsiCube crop_cube(const HsiCube& cube, int y, int x, int h, int w);
/// Counter-clockwise rotation by k * 90 degrees; odd k needs a square cube.
HsiCube rotate90(const HsiCube& cube, int k);
HsiCube flip_horizontal(const HsiCube& cube);
HsiCube flip_vertical(const HsiCube& cube);

/// One simulated observation of a cube.
struct Observation {
  Measurement measurement;
  Mask3D mask3d;
  Array4<float> input;  // (1, 2N, H, W) network input
};

/// Simulates `cube` through `mask` (cropped top-left to the cube size) and
/// builds the network input. `noise_seed` drives the configured noise model.
Observation observe(const HsiCube& cube, const Mask2D& mask, const CassiConfig& cassi,
                    std::uint64_t noise_seed);

struct BatchOptions {
  int crop = 64;
  int count = 5;
  bool rotate = true;
  bool flip = true;
};

struct Batch {
  Array4<float> input;   // (count, 2N, crop, crop)
  Array4<float> target;  // (count, N, crop, crop)
};

/// Per sample: pick a scene and a crop position, augment, then simulate.
/// Fully determined by (scenes, mask, cassi, options, seed). Throws
/// ShapeError if a scene or the mask is smaller than the crop.
Batch make_batch(const std::vector<HsiCube>& scenes, const Mask2D& mask, const CassiConfig& cassi,
                 const BatchOptions& options, std::uint64_t seed);

/// Array4 (1, N, H, W) <-> HsiCube.
Array4<float> cube_to_array(const HsiCube& cube);
HsiCube array_to_cube(const Array4<float>& a, int n = 0);

}  // namespace cfsdcn
