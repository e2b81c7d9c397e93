#include "cfsdcn/optics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "cfsdcn/random.hpp"

namespace cfsdcn {

HsiCube::HsiCube(int h_, int w_, int bands_, float fill) : h(h_), w(w_), bands(bands_) {
  if (h < 0 || w < 0 || bands < 0) throw ShapeError("negative cube dimension");
  data.assign(static_cast<std::size_t>(h) * w * bands, fill);
}

Mask2D::Mask2D(int h_, int w_, float fill) : h(h_), w(w_) {
  if (h < 0 || w < 0) throw ShapeError("negative mask dimension");
  data.assign(static_cast<std::size_t>(h) * w, fill);
}

Measurement::Measurement(int h_, int width_, float fill) : h(h_), width(width_) {
  if (h < 0 || width < 0) throw ShapeError("negative measurement dimension");
  data.assign(static_cast<std::size_t>(h) * width, fill);
}

std::string NoiseSpec::describe() const {
  switch (kind) {
    case Kind::None:
      return "none";
    case Kind::Gaussian:
      return "gaussian:" + std::to_string(sigma);
    case Kind::Shot:
      return "shot:" + std::to_string(bits);
  }
  return "none";
}

NoiseSpec NoiseSpec::parse(const std::string& text) {
  NoiseSpec spec;
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (head == "none" || head.empty()) {
    spec.kind = Kind::None;
  } else if (head == "gaussian") {
    spec.kind = Kind::Gaussian;
    spec.sigma = arg.empty() ? 0.01 : std::stod(arg);
    if (spec.sigma < 0) throw std::invalid_argument("gaussian sigma must be >= 0");
  } else if (head == "shot") {
    spec.kind = Kind::Shot;
    spec.bits = arg.empty() ? 11 : std::stoi(arg);
    if (spec.bits < 1 || spec.bits > 30) throw std::invalid_argument("shot bits out of range");
  } else {
    throw std::invalid_argument("unknown noise model '" + text +
                                "' (expected none, gaussian[:sigma] or shot[:bits])");
  }
  return spec;
}

HsiCube modulate(const HsiCube& cube, const Mask2D& mask) {
  if (cube.h != mask.h || cube.w != mask.w) {
    throw ShapeError("modulate: cube " + std::to_string(cube.h) + "x" + std::to_string(cube.w) +
                     " vs mask " + std::to_string(mask.h) + "x" + std::to_string(mask.w));
  }
  HsiCube out = cube;
  const std::size_t plane = static_cast<std::size_t>(cube.h) * cube.w;
  for (int b = 0; b < cube.bands; ++b) {
    float* dst = out.band(b);
    for (std::size_t i = 0; i < plane; ++i) dst[i] *= mask.data[i];
  }
  return out;
}

HsiCube disperse(const HsiCube& modulated, const DispersionSpec& spec) {
  if (spec.bands != modulated.bands) {
    throw ShapeError("disperse: spec has " + std::to_string(spec.bands) + " bands, cube has " +
                     std::to_string(modulated.bands));
  }
  if (spec.step < 0) throw std::invalid_argument("disperse: dispersion step must be >= 0");
  const int width = spec.measurement_width(modulated.w);
  HsiCube out(modulated.h, width, modulated.bands);
  out.wavelengths = modulated.wavelengths;
  for (int b = 0; b < modulated.bands; ++b) {
    const int offset = spec.shift(b);
    for (int y = 0; y < modulated.h; ++y) {
      std::copy_n(&modulated.at(b, y, 0), modulated.w, &out.at(b, y, offset));
    }
  }
  return out;
}

Measurement apply_gaussian_noise(const Measurement& y, double sigma, std::uint64_t seed) {
  Measurement out = y;
  Rng rng(seed);
  for (float& v : out.data) v += static_cast<float>(sigma * rng.normal());
  out.noise = "gaussian:" + std::to_string(sigma);
  return out;
}

Measurement apply_shot_noise(const Measurement& y, int bits, std::uint64_t seed) {
  Measurement out = y;
  out.noise = "shot:" + std::to_string(bits);
  float peak = 0.0f;
  for (float v : y.data) {
    if (v < 0.0f) throw std::invalid_argument("apply_shot_noise: measurement has negative values");
    peak = std::max(peak, v);
  }
  if (peak == 0.0f) return out;
  const double levels = std::ldexp(1.0, bits) - 1.0;
  const double to_counts = levels / peak;
  Rng rng(seed);
  for (float& v : out.data) {
    const double rate = v * to_counts;
    if (rate <= 0.0) {
      v = 0.0f;
      continue;
    }
    std::poisson_distribution<long long> poisson(rate);
    v = static_cast<float>(static_cast<double>(poisson(rng.engine())) / to_counts);
  }
  return out;
}

Measurement integrate(const HsiCube& dispersed, const NoiseSpec& noise, std::uint64_t seed) {
  Measurement y(dispersed.h, dispersed.w);
  const std::size_t plane = static_cast<std::size_t>(dispersed.h) * dispersed.w;
  for (int b = 0; b < dispersed.bands; ++b) {
    const float* src = dispersed.band(b);
    for (std::size_t i = 0; i < plane; ++i) y.data[i] += src[i];
  }
  switch (noise.kind) {
    case NoiseSpec::Kind::None:
      return y;
    case NoiseSpec::Kind::Gaussian:
      return apply_gaussian_noise(y, noise.sigma, seed);
    case NoiseSpec::Kind::Shot:
      return apply_shot_noise(y, noise.bits, seed);
  }
  return y;
}

HsiCube shift_back(const Measurement& y, const DispersionSpec& spec) {
  const int scene_w = y.width - spec.step * (spec.bands - 1);
  if (spec.bands < 1 || scene_w < 1) {
    throw ShapeError("shift_back: measurement width " + std::to_string(y.width) +
                     " too small for " + std::to_string(spec.bands) + " bands at step " +
                     std::to_string(spec.step));
  }
  HsiCube out(y.h, scene_w, spec.bands);
  for (int b = 0; b < spec.bands; ++b) {
    const int offset = spec.shift(b);
    for (int r = 0; r < y.h; ++r) std::copy_n(&y.at(r, offset), scene_w, &out.at(b, r, 0));
  }
  return out;
}

Mask3D build_mask3d(const Mask2D& mask, const DispersionSpec& spec, Mask3DMode mode) {
  Mask3D out(mask.h, mask.w, spec.bands);
  for (int b = 0; b < spec.bands; ++b) {
    const int offset = mode == Mask3DMode::Shift ? spec.shift(b) : 0;
    for (int r = 0; r < mask.h; ++r) {
      for (int c = offset; c < mask.w; ++c) out.at(b, r, c) = mask.at(r, c - offset);
    }
  }
  return out;
}

Measurement simulate(const HsiCube& cube, const Mask2D& mask, const DispersionSpec& spec,
                     const NoiseSpec& noise, std::uint64_t seed) {
  return integrate(disperse(modulate(cube, mask), spec), noise, seed);
}

Mask2D generate_mask(int h, int w, double density, std::uint64_t seed) {
  if (h < 1 || w < 1) throw ShapeError("generate_mask: dimensions must be positive");
  if (density < 0.0 || density > 1.0) {
    throw std::invalid_argument("generate_mask: density must lie in [0, 1]");
  }
  Mask2D mask(h, w);
  Rng rng(seed);
  for (float& v : mask.data) v = rng.bernoulli(density) ? 1.0f : 0.0f;
  return mask;
}

Mask2D crop_mask(const Mask2D& mask, int h, int w) {
  if (h > mask.h || w > mask.w) {
    throw ShapeError("mask " + std::to_string(mask.h) + "x" + std::to_string(mask.w) +
                     " smaller than requested " + std::to_string(h) + "x" + std::to_string(w));
  }
  Mask2D out(h, w);
  for (int r = 0; r < h; ++r) std::copy_n(&mask.at(r, 0), w, &out.at(r, 0));
  return out;
}

}  // namespace cfsdcn
