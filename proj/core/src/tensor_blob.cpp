#include "tensor_blob.hpp"

#include <fstream>

#include "cfsdcn/hsc_io.hpp"

namespace cfsdcn::detail {

namespace fs = std::filesystem;
using nlohmann::json;

void write_blob(const fs::path& path, json header, const std::vector<BlobTensor>& tensors) {
  const HscPaths p = hsc_paths(path);
  if (p.sidecar.has_parent_path()) fs::create_directories(p.sidecar.parent_path());
  json index = json::array();
  std::size_t offset = 0;
  std::ofstream bin(p.binary, std::ios::binary | std::ios::trunc);
  if (!bin) throw FormatError("cannot write " + p.binary.string());
  for (const auto& t : tensors) {
    index.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset},
                     {"count", t.values.size()}});
    for (float v : t.values) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      const char bytes[4] = {static_cast<char>(bits & 0xFF), static_cast<char>((bits >> 8) & 0xFF),
                             static_cast<char>((bits >> 16) & 0xFF),
                             static_cast<char>((bits >> 24) & 0xFF)};
      bin.write(bytes, 4);
    }
    offset += t.values.size();
  }
  if (!bin) throw FormatError("short write to " + p.binary.string());
  header["dtype"] = "f32le";
  header["blob"] = p.binary.filename().string();
  header["tensors"] = std::move(index);
  std::ofstream js(p.sidecar, std::ios::trunc);
  if (!js) throw FormatError("cannot write " + p.sidecar.string());
  js << header.dump(2) << "\n";
}

json read_blob(const fs::path& path, const std::string& expected_format,
               std::vector<BlobTensor>& tensors) {
  const HscPaths p = hsc_paths(path);
  json header;
  {
    std::ifstream in(p.sidecar);
    if (!in) throw FormatError("cannot open " + p.sidecar.string());
    try {
      in >> header;
    } catch (const json::exception& e) {
      throw FormatError("malformed manifest " + p.sidecar.string() + ": " + e.what());
    }
  }
  if (header.value("format", "") != expected_format) {
    throw FormatError(p.sidecar.string() + ": expected format '" + expected_format + "'");
  }
  if (header.value("dtype", "") != "f32le" || !header.contains("tensors")) {
    throw FormatError(p.sidecar.string() + ": missing dtype or tensor index");
  }
  const fs::path blob = p.sidecar.parent_path() / header.value("blob", p.binary.filename().string());
  std::ifstream in(blob, std::ios::binary);
  if (!in) throw FormatError("cannot open " + blob.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
  tensors.clear();
  for (const auto& entry : header["tensors"]) {
    BlobTensor t;
    t.name = entry.at("name").get<std::string>();
    t.shape = entry.at("shape").get<std::vector<int>>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto count = entry.at("count").get<std::size_t>();
    if ((offset + count) * 4 > bytes.size()) {
      throw FormatError(blob.string() + ": tensor '" + t.name + "' runs past the end of the blob (" +
                        std::to_string(bytes.size()) + " bytes)");
    }
    t.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[(offset + i) * 4 + b]))
                << (8 * b);
      }
      t.values[i] = std::bit_cast<float>(bits);
    }
    tensors.push_back(std::move(t));
  }
  return header;
}

}  // namespace cfsdcn::detail
