#include "cfsdcn/hsc_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace cfsdcn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

void encode_f32le(const std::vector<float>& values, std::vector<char>& bytes) {
  bytes.resize(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
}

std::vector<float> decode_f32le(const std::vector<char>& bytes) {
  std::vector<float> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
    }
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

std::vector<char> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

void write_all(const fs::path& path, const std::vector<char>& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to " + path.string());
}

std::vector<float> read_floats(const fs::path& path, std::size_t expected_values) {
  std::vector<char> bytes = read_all(path);
  const std::size_t expected = expected_values * 4;
  if (bytes.size() != expected) {
    throw FormatError("size mismatch in " + path.string() + ": expected " +
                      std::to_string(expected) + " bytes, got " + std::to_string(bytes.size()));
  }
  return decode_f32le(bytes);
}

int positive_field(const json& j, const char* key, const fs::path& where) {
  if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<int>() < 1) {
    throw FormatError(where.string() + ": field '" + key + "' missing or not a positive integer");
  }
  return j[key].get<int>();
}

}  // namespace

HscPaths hsc_paths(const fs::path& path) {
  fs::path stem = path;
  if (stem.extension() == ".json" || stem.extension() == ".bin") stem.replace_extension();
  fs::path sidecar = stem;
  sidecar += ".json";
  fs::path binary = stem;
  binary += ".bin";
  return {sidecar, binary};
}

void write_hsc(const fs::path& path, const HscHeader& header, const std::vector<float>& data) {
  if (data.size() != static_cast<std::size_t>(header.h) * header.w * header.bands) {
    throw FormatError("write_hsc: " + std::to_string(data.size()) + " values for " +
                      std::to_string(header.h) + "x" + std::to_string(header.w) + "x" +
                      std::to_string(header.bands));
  }
  const HscPaths p = hsc_paths(path);
  json j;
  j["h"] = header.h;
  j["w"] = header.w;
  j["bands"] = header.bands;
  j["dtype"] = "f32le";
  j["layout"] = "band-major,row-major";
  j["data"] = p.binary.filename().string();
  j["kind"] = header.kind;
  if (!header.wavelengths.empty()) j["wavelengths"] = header.wavelengths;
  std::vector<char> bytes;
  encode_f32le(data, bytes);
  write_all(p.binary, bytes);
  const std::string text = j.dump(2) + "\n";
  write_all(p.sidecar, std::vector<char>(text.begin(), text.end()));
}

std::vector<float> read_hsc(const fs::path& path, HscHeader& header) {
  const HscPaths p = hsc_paths(path);
  json j;
  {
    std::ifstream in(p.sidecar);
    if (!in) throw FormatError("cannot open " + p.sidecar.string());
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw FormatError("malformed header " + p.sidecar.string() + ": " + e.what());
    }
  }
  if (!j.is_object()) throw FormatError("malformed header " + p.sidecar.string());
  header.h = positive_field(j, "h", p.sidecar);
  header.w = positive_field(j, "w", p.sidecar);
  header.bands = positive_field(j, "bands", p.sidecar);
  if (j.value("dtype", "") != "f32le") {
    throw FormatError(p.sidecar.string() + ": unsupported dtype (expected f32le)");
  }
  if (j.value("layout", "") != "band-major,row-major") {
    throw FormatError(p.sidecar.string() + ": unsupported layout");
  }
  header.kind = j.value("kind", "cube");
  header.wavelengths.clear();
  if (j.contains("wavelengths")) header.wavelengths = j["wavelengths"].get<std::vector<double>>();
  fs::path binary = p.binary;
  if (j.contains("data") && j["data"].is_string()) {
    binary = p.sidecar.parent_path() / j["data"].get<std::string>();
  }
  return read_floats(binary, static_cast<std::size_t>(header.h) * header.w * header.bands);
}

void write_cube(const fs::path& path, const HsiCube& cube) {
  write_hsc(path, {cube.h, cube.w, cube.bands, "cube", cube.wavelengths}, cube.data);
}

HsiCube read_cube(const fs::path& path) {
  HscHeader header;
  HsiCube cube;
  cube.data = read_hsc(path, header);
  cube.h = header.h;
  cube.w = header.w;
  cube.bands = header.bands;
  cube.wavelengths = header.wavelengths;
  return cube;
}

void write_mask(const fs::path& path, const Mask2D& mask) {
  write_hsc(path, {mask.h, mask.w, 1, "mask", {}}, mask.data);
}

Mask2D read_mask(const fs::path& path) {
  HscHeader header;
  Mask2D mask;
  mask.data = read_hsc(path, header);
  if (header.bands != 1) {
    throw FormatError(path.string() + ": a mask must have bands = 1, got " +
                      std::to_string(header.bands));
  }
  mask.h = header.h;
  mask.w = header.w;
  return mask;
}

void write_measurement(const fs::path& path, const Measurement& y) {
  write_hsc(path, {y.h, y.width, 1, "measurement", {}}, y.data);
}

Measurement read_measurement(const fs::path& path) {
  HscHeader header;
  Measurement y;
  y.data = read_hsc(path, header);
  if (header.bands != 1) {
    throw FormatError(path.string() + ": a measurement must have bands = 1, got " +
                      std::to_string(header.bands));
  }
  y.h = header.h;
  y.width = header.w;
  return y;
}

HsiCube read_flat_cube(const fs::path& path, int h, int w, int bands) {
  if (h < 1 || w < 1 || bands < 1) throw FormatError("raw import needs positive h, w, bands");
  HsiCube cube;
  cube.h = h;
  cube.w = w;
  cube.bands = bands;
  cube.data = read_floats(path, static_cast<std::size_t>(h) * w * bands);
  return cube;
}

void normalize_unit_range(HsiCube& cube) {
  if (cube.data.empty()) return;
  const auto [lo, hi] = std::minmax_element(cube.data.begin(), cube.data.end());
  const float offset = *lo < 0.0f ? *lo : 0.0f;
  const float range = *hi - offset;
  if (!(range > 0.0f)) return;
  for (float& v : cube.data) v = (v - offset) / range;
}

HsiCube ingest_cube(const fs::path& path, const std::string& format, int h, int w, int bands) {
  HsiCube cube;
  if (format == "hsc") {
    cube = read_cube(path);
  } else if (format == "raw") {
    cube = read_flat_cube(path, h, w, bands);
  } else {
    throw FormatError("unknown cube format '" + format + "' (expected hsc or raw)");
  }
  for (float v : cube.data) {
    if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite sample");
  }
  // Data already inside [0, 1] is kept bit for bit.
  const bool in_range = std::all_of(cube.data.begin(), cube.data.end(),
                                    [](float v) { return v >= 0.0f && v <= 1.0f; });
  if (!in_range) normalize_unit_range(cube);
  return cube;
}

std::vector<fs::path> list_hsc(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const fs::path& p = entry.path();
    if (entry.is_regular_file() && p.extension() == ".json" &&
        fs::exists(fs::path(p).replace_extension(".bin"))) {
      out.push_back(p);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace cfsdcn
