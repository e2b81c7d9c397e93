#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cfsdcn::cli {

using Path = std::filesystem::path;
using Argv = std::vector<std::string>;

struct GenMaskArgs {
  int h = 256;
  int w = 256;
  double density = 0.5;
  std::uint64_t seed = 1;
  Path out;
};

struct SimulateArgs {
  Path cube;
  Path mask;
  int step = 2;
  std::string noise = "none";
  std::uint64_t seed = 1;
  Path out;
};

struct ShiftBackArgs {
  Path measurement;
  int bands = 0;
  int step = 2;
  bool scaled = false;  // multiply by 2/N like the network input
  Path out;
};

struct GenDataArgs {
  int count = 10;
  int h = 64;
  int w = 64;
  int bands = 8;
  std::uint64_t seed = 1;
  Path out;
};

struct IngestArgs {
  Path input;
  std::string format = "hsc";
  int h = 0;
  int w = 0;
  int bands = 0;
  Path out;
};

struct InitArgs {
  Path config;
  std::optional<std::uint64_t> seed;
  Path out;
};

struct TrainArgs {
  Path config;
  Path data;
  Path mask;
  Path out;
  Path resume;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_steps;
  bool quiet = false;
};

struct ReconstructArgs {
  Path ckpt;
  Path measurement;
  Path mask;
  Path out;
};

struct EvaluateArgs {
  std::vector<Path> ckpts;
  Path scenes;
  Path mask;
  Path out;
  std::uint64_t seed = 1;
  std::string psnr_mode = "per-band";
  bool baseline = false;
  std::vector<int> spectral_region;  // y, x, h, w
};

struct GradcheckArgs {
  std::vector<std::string> modules;
  int seeds = 20;
  int coords = 16;
  std::uint64_t seed = 1;
};

struct CountArgs {
  Path config;
  std::string variant;
  int h = 256;
  int w = 256;
  int bands = 0;
  bool breakdown = false;
  bool ablation = false;
  bool json = false;
};

void gen_mask(const GenMaskArgs& a, const Argv& argv);
void simulate_cmd(const SimulateArgs& a, const Argv& argv);
void shift_back_cmd(const ShiftBackArgs& a, const Argv& argv);
void gen_data(const GenDataArgs& a, const Argv& argv);
void ingest(const IngestArgs& a, const Argv& argv);
void init_model(const InitArgs& a, const Argv& argv);
void train_cmd(const TrainArgs& a, const Argv& argv);
void reconstruct_cmd(const ReconstructArgs& a, const Argv& argv);
void evaluate_cmd(const EvaluateArgs& a, const Argv& argv);
/// Returns false when any case fails.
bool gradcheck_cmd(const GradcheckArgs& a);
void count_cmd(const CountArgs& a);


}  // namespace cfsdcn::cli
