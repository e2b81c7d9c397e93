#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace cfsdcn::cli {

/// Record of one command invocation: the argument vector and configuration
/// are enough to rerun it; `artifacts` lists every file the run wrote.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv);

  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void add_seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
  void add_input(const std::filesystem::path& path);
  void add_artifact(const std::filesystem::path& path);
  void add_hsc_artifact(const std::filesystem::path& stem);
  void set(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }

  /// Writes the manifest and lists it among its own artifacts.
  void write(const std::filesystem::path& path);

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::string started_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json seeds_ = nlohmann::json::object();
  nlohmann::json extra_ = nlohmann::json::object();
  std::vector<std::string> inputs_;
  std::vector<std::string> artifacts_;
};

std::string utc_timestamp();

/// `<stem>.manifest.json` next to an HSC output given as stem, .json or .bin.
std::filesystem::path manifest_beside(const std::filesystem::path& output);

}  // namespace cfsdcn::cli
