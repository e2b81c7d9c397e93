#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfsdcn/optics.hpp"

namespace cfsdcn {

/// Malformed header, missing file or size mismatch.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// HSC on disk: `<stem>.json` sidecar
//   {"h": H, "w": W, "bands": B, "dtype": "f32le",
//    "layout": "band-major,row-major", "data": "<stem>.bin", ...}
// plus `<stem>.bin` holding H*W*B little-endian 32-bit floats.
// Measurements and masks use bands = 1.

struct HscPaths {
  std::filesystem::path sidecar;
  std::filesystem::path binary;
};

/// Accepts `stem`, `stem.json` or `stem.bin`.
HscPaths hsc_paths(const std::filesystem::path& path);

struct HscHeader {
  int h = 0;
  int w = 0;
  int bands = 0;
  std::string kind = "cube";
  std::vector<double> wavelengths;
};

void write_hsc(const std::filesystem::path& path, const HscHeader& header,
               const std::vector<float>& data);
std::vector<float> read_hsc(const std::filesystem::path& path, HscHeader& header);

void write_cube(const std::filesystem::path& path, const HsiCube& cube);
HsiCube read_cube(const std::filesystem::path& path);

void write_mask(const std::filesystem::path& path, const Mask2D& mask);
Mask2D read_mask(const std::filesystem::path& path);

void write_measurement(const std::filesystem::path& path, const Measurement& y);
Measurement read_measurement(const std::filesystem::path& path);

/// Raw little-endian float32 file, band-major row-major, with dims supplied
/// by the caller.
HsiCube read_flat_cube(const std::filesystem::path& path, int h, int w, int bands);

/// Divides by the maximum so the brightest value becomes 1.0; negative
/// inputs are shifted up by the minimum first. A constant zero cube is
/// returned unchanged.
void normalize_unit_range(HsiCube& cube);

/// Loads `path` as "hsc" or "raw" (raw needs h, w, bands). Data with any
/// value outside [0, 1] is normalized with normalize_unit_range; data already
/// in range is returned unchanged.
HsiCube ingest_cube(const std::filesystem::path& path, const std::string& format, int h = 0,
                    int w = 0, int bands = 0);

/// Every HSC sidecar in `dir` that has its binary next to it, sorted by filename.
std::vector<std::filesystem::path> list_hsc(const std::filesystem::path& dir);

}  // namespace cfsdcn
