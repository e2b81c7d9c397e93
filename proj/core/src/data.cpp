#include "cfsdcn/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cfsdcn/network.hpp"
#include "cfsdcn/random.hpp"

namespace cfsdcn {

namespace {

std::vector<float> random_spectrum(int bands, Rng& rng) {
  const double base = rng.uniform(0.05, 0.35);
  const int bumps = 1 + static_cast<int>(rng.below(2));
  std::vector<double> centre(bumps), width(bumps), height(bumps);
  for (int i = 0; i < bumps; ++i) {
    centre[i] = rng.uniform(-0.1, 1.1);
    width[i] = rng.uniform(0.12, 0.45);
    height[i] = rng.uniform(0.2, 0.6);
  }
  std::vector<float> s(bands);
  for (int b = 0; b < bands; ++b) {
    const double t = bands == 1 ? 0.5 : static_cast<double>(b) / (bands - 1);
    double v = base;
    for (int i = 0; i < bumps; ++i) {
      const double d = (t - centre[i]) / width[i];
      v += height[i] * std::exp(-0.5 * d * d);
    }
    s[b] = static_cast<float>(v);
  }
  return s;
}

enum class ShapeKind { Disc, Ellipse, Rectangle };

struct Region {
  ShapeKind kind;
  double cy, cx, ry, rx, angle;
  double shade_y, shade_x;  // linear shading gradient
  std::vector<float> spectrum;

  bool contains(double y, double x) const {
    const double dy = y - cy;
    const double dx = x - cx;
    const double u = std::cos(angle) * dx + std::sin(angle) * dy;
    const double v = -std::sin(angle) * dx + std::cos(angle) * dy;
    switch (kind) {
      case ShapeKind::Disc:
        return dx * dx + dy * dy <= rx * rx;
      case ShapeKind::Ellipse:
        return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
      case ShapeKind::Rectangle:
        return std::abs(u) <= rx && std::abs(v) <= ry;
    }
    return false;
  }
};

}  // namespace

HsiCube synthesize_scene(int h, int w, int bands, std::uint64_t seed) {
  if (h < 1 || w < 1 || bands < 1) throw ShapeError("synthesize_scene: dimensions must be positive");
  Rng rng(seed);
  HsiCube cube(h, w, bands);
  const std::vector<float> bg = random_spectrum(bands, rng);
  const double fy = rng.uniform(0.5, 2.0) * 2 * std::numbers::pi / h;
  const double fx = rng.uniform(0.5, 2.0) * 2 * std::numbers::pi / w;
  const double phase = rng.uniform(0, 2 * std::numbers::pi);

  const int count = 4 + static_cast<int>(rng.below(5));
  std::vector<Region> regions;
  const double scale = std::min(h, w);
  for (int i = 0; i < count; ++i) {
    Region r;
    r.kind = static_cast<ShapeKind>(rng.below(3));
    r.cy = rng.uniform(0, h);
    r.cx = rng.uniform(0, w);
    r.rx = rng.uniform(0.08, 0.3) * scale;
    r.ry = rng.uniform(0.08, 0.3) * scale;
    r.angle = rng.uniform(0, std::numbers::pi);
    r.shade_y = rng.uniform(-0.3, 0.3) / h;
    r.shade_x = rng.uniform(-0.3, 0.3) / w;
    r.spectrum = random_spectrum(bands, rng);
    regions.push_back(std::move(r));
  }

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Later regions paint over earlier ones.
      const Region* top = nullptr;
      for (const auto& r : regions) {
        if (r.contains(y + 0.5, x + 0.5)) top = &r;
      }
      double gain;
      const std::vector<float>* spectrum;
      if (top) {
        gain = 1.0 + top->shade_y * (y - top->cy) + top->shade_x * (x - top->cx);
        spectrum = &top->spectrum;
      } else {
        gain = 0.75 + 0.25 * std::sin(fy * y + phase) * std::cos(fx * x);
        spectrum = &bg;
      }
      for (int b = 0; b < bands; ++b) {
        cube.at(b, y, x) = static_cast<float>(std::clamp(gain * (*spectrum)[b], 0.0, 1.0));
      }
    }
  }
  return cube;
}

std::vector<HsiCube> synthesize_dataset(int count, int h, int w, int bands, std::uint64_t seed) {
  std::vector<HsiCube> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(synthesize_scene(h, w, bands, mix_seed(seed, i)));
  return out;
}

HsiCube crop_cube(const HsiCube& cube, int y, int x, int h, int w) {
  if (y < 0 || x < 0 || h < 1 || w < 1 || y + h > cube.h || x + w > cube.w) {
    throw ShapeError("crop " + std::to_string(h) + "x" + std::to_string(w) + " at (" +
                     std::to_string(y) + "," + std::to_string(x) + ") exceeds cube " +
                     std::to_string(cube.h) + "x" + std::to_string(cube.w));
  }
  HsiCube out(h, w, cube.bands);
  out.wavelengths = cube.wavelengths;
  for (int b = 0; b < cube.bands; ++b) {
    for (int r = 0; r < h; ++r) std::copy_n(&cube.at(b, y + r, x), w, &out.at(b, r, 0));
  }
  return out;
}

HsiCube rotate90(const HsiCube& cube, int k) {
  k = ((k % 4) + 4) % 4;
  if (k == 0) return cube;
  if (k % 2 == 1 && cube.h != cube.w) throw ShapeError("rotate90: odd turns need a square cube");
  HsiCube out(k == 2 ? cube.h : cube.w, k == 2 ? cube.w : cube.h, cube.bands);
  out.wavelengths = cube.wavelengths;
  const int h = cube.h;
  const int w = cube.w;
  for (int b = 0; b < cube.bands; ++b) {
    for (int y = 0; y < out.h; ++y) {
      for (int x = 0; x < out.w; ++x) {
        float v;
        if (k == 1) {
          v = cube.at(b, x, w - 1 - y);
        } else if (k == 2) {
          v = cube.at(b, h - 1 - y, w - 1 - x);
        } else {
          v = cube.at(b, h - 1 - x, y);
        }
        out.at(b, y, x) = v;
      }
    }
  }
  return out;
}

HsiCube flip_horizontal(const HsiCube& cube) {
  HsiCube out = cube;
  for (int b = 0; b < cube.bands; ++b) {
    for (int y = 0; y < cube.h; ++y) std::reverse(&out.at(b, y, 0), &out.at(b, y, 0) + cube.w);
  }
  return out;
}

HsiCube flip_vertical(const HsiCube& cube) {
  HsiCube out = cube;
  for (int b = 0; b < cube.bands; ++b) {
    for (int y = 0; y < cube.h; ++y) {
      std::copy_n(&cube.at(b, cube.h - 1 - y, 0), cube.w, &out.at(b, y, 0));
    }
  }
  return out;
}

Observation observe(const HsiCube& cube, const Mask2D& mask, const CassiConfig& cassi,
                    std::uint64_t noise_seed) {
  const Mask2D m = (mask.h == cube.h && mask.w == cube.w) ? mask : crop_mask(mask, cube.h, cube.w);
  const DispersionSpec spec = cassi.dispersion(cube.bands);
  Observation o;
  o.measurement = simulate(cube, m, spec, cassi.noise, noise_seed);
  o.mask3d = build_mask3d(m, spec, cassi.mask3d);
  o.input = build_network_input(o.measurement, o.mask3d, spec);
  return o;
}

Batch make_batch(const std::vector<HsiCube>& scenes, const Mask2D& mask, const CassiConfig& cassi,
                 const BatchOptions& options, std::uint64_t seed) {
  if (scenes.empty()) throw std::invalid_argument("make_batch: no scenes");
  if (options.count < 1) throw std::invalid_argument("make_batch: count must be >= 1");
  const int crop = options.crop;
  if (mask.h < crop || mask.w < crop) {
    throw ShapeError("make_batch: mask " + std::to_string(mask.h) + "x" + std::to_string(mask.w) +
                     " smaller than crop " + std::to_string(crop));
  }
  const int bands = scenes.front().bands;
  for (const auto& s : scenes) {
    if (s.h < crop || s.w < crop) {
      throw ShapeError("make_batch: scene " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                       " smaller than crop " + std::to_string(crop));
    }
    if (s.bands != bands) throw ShapeError("make_batch: scenes disagree on band count");
  }
  Batch batch{Array4<float>(Shape4{options.count, 2 * bands, crop, crop}),
              Array4<float>(Shape4{options.count, bands, crop, crop})};
  Rng rng(seed);
  const std::size_t in_size = static_cast<std::size_t>(2) * bands * crop * crop;
  const std::size_t out_size = static_cast<std::size_t>(bands) * crop * crop;
  for (int i = 0; i < options.count; ++i) {
    const HsiCube& scene = scenes[rng.below(scenes.size())];
    const int y = static_cast<int>(rng.below(scene.h - crop + 1));
    const int x = static_cast<int>(rng.below(scene.w - crop + 1));
    const int turns = static_cast<int>(rng.below(4));
    const bool fh = rng.bernoulli(0.5);
    const bool fv = rng.bernoulli(0.5);
    const std::uint64_t noise_seed = rng.engine()();
    HsiCube sample = crop_cube(scene, y, x, crop, crop);
    if (options.rotate) sample = rotate90(sample, turns);
    if (options.flip && fh) sample = flip_horizontal(sample);
    if (options.flip && fv) sample = flip_vertical(sample);
    const Observation o = observe(sample, mask, cassi, noise_seed);
    std::copy_n(o.input.ptr(), in_size, batch.input.ptr() + i * in_size);
    std::copy_n(sample.data.data(), out_size, batch.target.ptr() + i * out_size);
  }
  return batch;
}

Array4<float> cube_to_array(const HsiCube& cube) {
  return Array4<float>(Shape4{1, cube.bands, cube.h, cube.w}, cube.data);
}

HsiCube array_to_cube(const Array4<float>& a, int n) {
  const Shape4 s = a.shape();
  if (n < 0 || n >= s.n) throw ShapeError("array_to_cube: batch index out of range");
  HsiCube cube(s.h, s.w, s.c);
  std::copy_n(a.ptr() + static_cast<std::size_t>(n) * s.c * s.h * s.w, cube.data.size(),
              cube.data.data());
  return cube;
}

}  // namespace cfsdcn
