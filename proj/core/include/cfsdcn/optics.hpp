#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfsdcn/array.hpp"

namespace cfsdcn {

/// Hyperspectral scene, band-major then row-major: data[(b*h + y)*w + x].
struct HsiCube {
  int h = 0;
  int w = 0;
  int bands = 0;
  std::vector<float> data;
  std::vector<double> wavelengths;  // nm, optional

  HsiCube() = default;
  HsiCube(int h, int w, int bands, float fill = 0.0f);

  float& at(int b, int y, int x) { return data[(static_cast<std::size_t>(b) * h + y) * w + x]; }
  const float& at(int b, int y, int x) const {
    return data[(static_cast<std::size_t>(b) * h + y) * w + x];
  }
  float* band(int b) { return data.data() + static_cast<std::size_t>(b) * h * w; }
  const float* band(int b) const { return data.data() + static_cast<std::size_t>(b) * h * w; }
};

/// Coded-aperture transmittance, row-major h x w, values in [0, 1].
struct Mask2D {
  int h = 0;
  int w = 0;
  std::vector<float> data;

  Mask2D() = default;
  Mask2D(int h, int w, float fill = 0.0f);
  float& at(int y, int x) { return data[static_cast<std::size_t>(y) * w + x]; }
  const float& at(int y, int x) const { return data[static_cast<std::size_t>(y) * w + x]; }
};

/// Band n (0-based) lands `step * n` columns to the right on the detector,
/// so band 0 is the unshifted reference.
struct DispersionSpec {
  int step = 2;
  int bands = 28;

  int shift(int band) const { return step * band; }
  int measurement_width(int scene_width) const { return scene_width + step * (bands - 1); }
};

struct NoiseSpec {
  enum class Kind { None, Gaussian, Shot };
  Kind kind = Kind::None;
  double sigma = 0.0;  // Gaussian
  int bits = 11;       // Shot

  std::string describe() const;
  static NoiseSpec parse(const std::string& text);
};

/// Detector frame, row-major h x width with width = W + step*(bands-1).
struct Measurement {
  int h = 0;
  int width = 0;
  std::vector<float> data;
  std::string noise = "none";

  Measurement() = default;
  Measurement(int h, int width, float fill = 0.0f);
  float& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  const float& at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// How the per-band 3-D mask is derived from the physical mask.
enum class Mask3DMode { Shift, Replicate };

using Mask3D = HsiCube;

/// Simulation settings shared by training, evaluation and reconstruction.
struct CassiConfig {
  int step = 2;
  Mask3DMode mask3d = Mask3DMode::Shift;
  NoiseSpec noise;

  DispersionSpec dispersion(int bands) const { return {step, bands}; }
};

/// Every band multiplied elementwise by the mask.
HsiCube modulate(const HsiCube& cube, const Mask2D& mask);

/// Places band n at column offset spec.shift(n) on a zero canvas of width
/// W + step*(bands-1).
HsiCube disperse(const HsiCube& modulated, const DispersionSpec& spec);

/// Sums the dispersed bands and adds the configured noise realization.
Measurement integrate(const HsiCube& dispersed, const NoiseSpec& noise, std::uint64_t seed);

/// Band n of the result is columns [shift(n), shift(n) + W) of the measurement.
HsiCube shift_back(const Measurement& y, const DispersionSpec& spec);

/// Shift mode: band n is M* shifted right by shift(n) columns (the detector
/// footprint of that band) and cropped back to h x w, so column j holds
/// M*(i, j - shift(n)) or 0 when j < shift(n). Replicate mode copies M*
/// into every band.
Mask3D build_mask3d(const Mask2D& mask, const DispersionSpec& spec,
                    Mask3DMode mode = Mask3DMode::Shift);

/// Scales y so its peak maps to 2^bits - 1, draws Poisson counts per pixel
/// and scales back. Throws std::invalid_argument on negative input.
Measurement apply_shot_noise(const Measurement& y, int bits, std::uint64_t seed);

Measurement apply_gaussian_noise(const Measurement& y, double sigma, std::uint64_t seed);

/// modulate -> disperse -> integrate.
Measurement simulate(const HsiCube& cube, const Mask2D& mask, const DispersionSpec& spec,
                     const NoiseSpec& noise = {}, std::uint64_t seed = 0);

/// Reproducible Bernoulli(density) binary mask.
Mask2D generate_mask(int h, int w, double density, std::uint64_t seed);

/// Top-left h x w window of a larger mask.
Mask2D crop_mask(const Mask2D& mask, int h, int w);

}  // namespace cfsdcn
