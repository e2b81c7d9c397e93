#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace cfsdcn::detail {

struct BlobTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> values;
};

// `<stem>.json` carries `header` plus "dtype", "blob" and a "tensors" index;
// `<stem>.bin` holds the float32 values back to back.
void write_blob(const std::filesystem::path& path, nlohmann::json header,
                const std::vector<BlobTensor>& tensors);

/// Returns the header; throws FormatError if "format" differs from
/// `expected_format` or the blob is inconsistent with the index.
nlohmann::json read_blob(const std::filesystem::path& path, const std::string& expected_format,
                         std::vector<BlobTensor>& tensors);

}  // namespace cfsdcn::detail
