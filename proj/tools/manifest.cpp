#include "manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include "cfsdcn/hsc_io.hpp"
#include "cfsdcn_version.hpp"

namespace cfsdcn::cli {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunManifest::RunManifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)), started_(utc_timestamp()) {}

void RunManifest::add_input(const std::filesystem::path& path) { inputs_.push_back(path.string()); }

void RunManifest::add_artifact(const std::filesystem::path& path) {
  artifacts_.push_back(path.string());
}

void RunManifest::add_hsc_artifact(const std::filesystem::path& stem) {
  const HscPaths p = hsc_paths(stem);
  add_artifact(p.sidecar);
  add_artifact(p.binary);
}

void RunManifest::write(const std::filesystem::path& path) {
  add_artifact(path);
  const nlohmann::json doc = {{"command", command_},
                              {"argv", argv_},
                              {"version", CFSDCN_VERSION_TAG},
                              {"started", started_},
                              {"finished", utc_timestamp()},
                              {"config", config_},
                              {"seeds", seeds_},
                              {"inputs", inputs_},
                              {"artifacts", artifacts_},
                              {"details", extra_}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

std::filesystem::path manifest_beside(const std::filesystem::path& output) {
  std::filesystem::path stem = output;
  if (stem.extension() == ".json" || stem.extension() == ".bin") stem.replace_extension();
  stem += ".manifest.json";
  return stem;
}

}  // namespace cfsdcn::cli
