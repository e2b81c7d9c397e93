#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "cfsdcn/config.hpp"
#include "cfsdcn/data.hpp"
#include "cfsdcn/evaluate.hpp"
#include "cfsdcn/gradcheck.hpp"
#include "cfsdcn/hsc_io.hpp"
#include "cfsdcn/random.hpp"
#include "cfsdcn/train.hpp"
#include "manifest.hpp"

namespace cfsdcn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<NamedCube> load_scenes(const Path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("scene directory " + dir.string() + " not found");
  std::vector<NamedCube> scenes;
  for (const auto& p : list_hsc(dir)) scenes.push_back({p.stem().string(), read_cube(p)});
  if (scenes.empty()) throw FormatError("no HSC scenes in " + dir.string());
  return scenes;
}

json config_json(const RunConfig& c) {
  return {{"text", format_config(c)}};
}

void print_report_line(const MetricReport& r) {
  std::printf("%-12s mean PSNR %.3f dB  mean SSIM %.4f  (%zu scenes)\n", r.method.c_str(),
              r.mean_psnr_db, r.mean_ssim, r.scenes.size());
}

PsnrMode parse_psnr_mode(const std::string& s) {
  if (s == "per-band") return PsnrMode::PerBand;
  if (s == "whole-cube") return PsnrMode::WholeCube;
  throw std::invalid_argument("unknown PSNR mode '" + s + "' (expected per-band or whole-cube)");
}

}  // namespace

void gen_mask(const GenMaskArgs& a, const Argv& argv) {
  RunManifest manifest("gen-mask", argv);
  manifest.add_seed("mask", a.seed);
  manifest.set("mask", {{"h", a.h}, {"w", a.w}, {"density", a.density}});
  write_mask(a.out, generate_mask(a.h, a.w, a.density, a.seed));
  manifest.add_hsc_artifact(a.out);
  manifest.write(manifest_beside(a.out));
}

void simulate_cmd(const SimulateArgs& a, const Argv& argv) {
  RunManifest manifest("simulate", argv);
  const HsiCube cube = read_cube(a.cube);
  Mask2D mask = read_mask(a.mask);
  if (mask.h != cube.h || mask.w != cube.w) mask = crop_mask(mask, cube.h, cube.w);
  const NoiseSpec noise = NoiseSpec::parse(a.noise);
  const Measurement y = simulate(cube, mask, DispersionSpec{a.step, cube.bands}, noise, a.seed);
  write_measurement(a.out, y);
  manifest.add_input(a.cube);
  manifest.add_input(a.mask);
  manifest.add_seed("noise", a.seed);
  manifest.set("cassi", {{"step", a.step}, {"noise", noise.describe()}});
  manifest.add_hsc_artifact(a.out);
  manifest.write(manifest_beside(a.out));
}

void shift_back_cmd(const ShiftBackArgs& a, const Argv& argv) {
  RunManifest manifest("shift-back", argv);
  const Measurement y = read_measurement(a.measurement);
  const DispersionSpec spec{a.step, a.bands};
  write_cube(a.out, a.scaled ? shift_back_baseline(y, spec) : shift_back(y, spec));
  manifest.add_input(a.measurement);
  manifest.set("dispersion", {{"step", a.step}, {"bands", a.bands}, {"scaled", a.scaled}});
  manifest.add_hsc_artifact(a.out);
  manifest.write(manifest_beside(a.out));
}

void gen_data(const GenDataArgs& a, const Argv& argv) {
  RunManifest manifest("gen-data", argv);
  manifest.add_seed("scenes", a.seed);
  manifest.set("scenes", {{"count", a.count}, {"h", a.h}, {"w", a.w}, {"bands", a.bands}});
  fs::create_directories(a.out);
  const auto cubes = synthesize_dataset(a.count, a.h, a.w, a.bands, a.seed);
  for (std::size_t i = 0; i < cubes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03zu", i);
    write_cube(a.out / name, cubes[i]);
    manifest.add_hsc_artifact(a.out / name);
  }
  manifest.write(a.out / "manifest.json");
}

void ingest(const IngestArgs& a, const Argv& argv) {
  RunManifest manifest("ingest", argv);
  write_cube(a.out, ingest_cube(a.input, a.format, a.h, a.w, a.bands));
  manifest.add_input(a.input);
  manifest.set("format", a.format);
  manifest.add_hsc_artifact(a.out);
  manifest.write(manifest_beside(a.out));
}

void init_model(const InitArgs& a, const Argv& argv) {
  RunManifest manifest("init", argv);
  RunConfig config = load_config(a.config);
  if (a.seed) config.model.seed = *a.seed;
  config.validate();
  const CfsdcnModel<float> model(config.model);
  save_checkpoint(a.out, model, config.cassi);
  manifest.set_config(config_json(config));
  manifest.add_seed("model", config.model.seed);
  manifest.add_input(a.config);
  manifest.add_artifact(fs::path(a.out).replace_extension(".json"));
  manifest.add_artifact(fs::path(a.out).replace_extension(".bin"));
  manifest.write(manifest_beside(a.out));
}

void train_cmd(const TrainArgs& a, const Argv& argv) {
  RunManifest manifest("train", argv);
  RunConfig config = load_config(a.config);
  if (a.seed) config.train.seed = *a.seed;
  if (a.max_steps) config.train.max_steps = *a.max_steps;
  config.validate();
  std::vector<HsiCube> scenes;
  for (auto& s : load_scenes(a.data)) scenes.push_back(std::move(s.cube));
  const Mask2D mask = read_mask(a.mask);

  fs::create_directories(a.out);
  std::ofstream(a.out / "config.ini") << format_config(config);
  CfsdcnModel<float> model(config.model);
  TrainOptions options;
  options.out_dir = a.out;
  options.resume_dir = a.resume;
  if (!a.quiet) {
    options.on_epoch = [](int epoch, double loss) {
      std::printf("epoch %d mean loss %.6g\n", epoch, loss);
      std::fflush(stdout);
    };
  }
  const TrainResult result = train_model(model, scenes, mask, config, options);
  std::printf("trained %d epochs, %lld steps\n", result.epochs_completed,
              static_cast<long long>(result.steps));

  manifest.set_config(config_json(config));
  manifest.add_seed("model", config.model.seed);
  manifest.add_seed("train", config.train.seed);
  manifest.add_input(a.config);
  manifest.add_input(a.data);
  manifest.add_input(a.mask);
  if (!a.resume.empty()) manifest.add_input(a.resume);
  manifest.set("steps", result.steps);
  manifest.set("epochs_completed", result.epochs_completed);
  manifest.add_artifact(a.out / "config.ini");
  for (const char* stem : {"checkpoint", "optimizer"}) {
    manifest.add_artifact(a.out / (std::string(stem) + ".json"));
    manifest.add_artifact(a.out / (std::string(stem) + ".bin"));
  }
  manifest.add_artifact(a.out / "loss.csv");
  manifest.write(a.out / "manifest.json");
}

void reconstruct_cmd(const ReconstructArgs& a, const Argv& argv) {
  RunManifest manifest("reconstruct", argv);
  const auto loaded = load_checkpoint<float>(a.ckpt);
  const Measurement y = read_measurement(a.measurement);
  write_cube(a.out, reconstruct(loaded.model, y, read_mask(a.mask), loaded.cassi));
  manifest.add_input(a.ckpt);
  manifest.add_input(a.measurement);
  manifest.add_input(a.mask);
  manifest.add_hsc_artifact(a.out);
  manifest.write(manifest_beside(a.out));
}

void evaluate_cmd(const EvaluateArgs& a, const Argv& argv) {
  if (a.ckpts.empty()) throw std::invalid_argument("evaluate needs at least one --ckpt");
  if (!a.spectral_region.empty() && a.spectral_region.size() != 4) {
    throw std::invalid_argument("--spectral-region takes y,x,h,w");
  }
  RunManifest manifest("evaluate", argv);
  const PsnrMode mode = parse_psnr_mode(a.psnr_mode);
  const auto scenes = load_scenes(a.scenes);
  const Mask2D mask = read_mask(a.mask);
  fs::create_directories(a.out);
  manifest.add_seed("noise", a.seed);
  manifest.add_input(a.scenes);
  manifest.add_input(a.mask);

  std::vector<AblationRow> rows;
  json summaries = json::array();
  std::optional<CassiConfig> first_cassi;
  for (std::size_t i = 0; i < a.ckpts.size(); ++i) {
    const auto loaded = load_checkpoint<float>(a.ckpts[i]);
    if (!first_cassi) first_cassi = loaded.cassi;
    const MetricReport report = evaluate_model(loaded.model, scenes, mask, loaded.cassi, a.seed, mode);
    const std::string stem = a.ckpts.size() == 1 ? "metrics" : "metrics_" + std::to_string(i);
    write_report_csv(a.out / (stem + ".csv"), report);
    write_report_json(a.out / (stem + ".json"), report);
    manifest.add_input(a.ckpts[i]);
    manifest.add_artifact(a.out / (stem + ".csv"));
    manifest.add_artifact(a.out / (stem + ".json"));
    print_report_line(report);
    rows.push_back({loaded.model.config().lcs_kernel, report.params, report.gflops,
                    report.mean_psnr_db, report.mean_ssim});
    summaries.push_back({{"checkpoint", a.ckpts[i].string()}, {"metrics", stem + ".csv"}});

    if (i == 0 && !a.spectral_region.empty()) {
      const auto& r = a.spectral_region;
      for (std::size_t s = 0; s < scenes.size(); ++s) {
        const Observation o = observe(scenes[s].cube, mask, loaded.cassi, mix_seed(a.seed, s));
        const HsiCube x = reconstruct(loaded.model, o.measurement, mask, loaded.cassi);
        const fs::path csv = a.out / "spectral" / (scenes[s].id + ".csv");
        const double corr =
            write_spectral_density_csv(csv, scenes[s].cube, x, r[0], r[1], r[2], r[3]);
        std::printf("spectral %s correlation %.4f\n", scenes[s].id.c_str(), corr);
        manifest.add_artifact(csv);
      }
    }
  }
  write_ablation_csv(a.out / "lcs_ablation.csv", rows);
  manifest.add_artifact(a.out / "lcs_ablation.csv");
  if (a.baseline) {
    const MetricReport base = evaluate_shift_back(scenes, mask, *first_cassi, a.seed, mode);
    write_report_csv(a.out / "baseline.csv", base);
    write_report_json(a.out / "baseline.json", base);
    manifest.add_artifact(a.out / "baseline.csv");
    manifest.add_artifact(a.out / "baseline.json");
    print_report_line(base);
  }
  manifest.set("reports", summaries);
  manifest.write(a.out / "manifest.json");
}

bool gradcheck_cmd(const GradcheckArgs& a) {
  GradcheckOptions options;
  options.seeds = a.seeds;
  options.coords_per_tensor = a.coords;
  options.seed = a.seed;
  const std::vector<std::string>& all = gradcheck_cases();
  const std::vector<std::string> names = a.modules.empty() ? all : a.modules;
  std::printf("%-14s %6s %9s %14s  %-8s %s\n", "module", "seeds", "rejected", "max_rel_error",
              "status", "worst tensor");
  bool ok = true;
  for (const auto& name : names) {
    const GradcheckResult r = run_gradcheck(name, options);
    std::printf("%-14s %6d %9d %14.3e  %-8s %s\n", name.c_str(), r.seeds_checked,
                r.seeds_rejected, r.max_error, r.passed ? "pass" : "FAIL", r.worst_tensor.c_str());
    std::fflush(stdout);
    ok = ok && r.passed;
  }
  return ok;
}

void count_cmd(const CountArgs& a) {
  if (a.config.empty() == a.variant.empty()) {
    throw std::invalid_argument("count needs exactly one of --config or --variant");
  }
  ModelConfig config = a.config.empty() ? ModelConfig::preset(a.variant) : load_config(a.config).model;
  if (a.bands > 0) config.bands = a.bands;
  config.validate();
  const CfsdcnModel<float> model(config);
  const CostLedger ledger = model.cost({1, 2 * config.bands, a.h, a.w});
  const double gflops = static_cast<double>(ledger.flops()) / 1e9;

  json out = {{"variant", config.variant},
              {"input", {{"h", a.h}, {"w", a.w}, {"bands", config.bands}}},
              {"params", model.count_params()},
              {"gflops", gflops}};
  if (a.breakdown) {
    std::map<std::string, std::pair<std::int64_t, std::int64_t>> groups;
    for (const auto& e : ledger.entries()) {
      auto& g = groups[e.name.substr(0, e.name.find('.'))];
      g.first += e.params;
      g.second += e.macs;
    }
    for (const auto& [name, g] : groups) {
      out["breakdown"][name] = {{"params", g.first}, {"gflops", 2.0 * g.second / 1e9}};
    }
  }
  if (a.ablation) {
    ModelConfig plain = config;
    plain.disable_cfsab = true;
    const std::int64_t without = model_params(plain);
    std::int64_t expected = 0;
    for (int l = 0; l < config.depth; ++l) {
      expected += static_cast<std::int64_t>(config.encoder_blocks + config.decoder_blocks) *
                  cfsab_param_count(config.level_channels(l), config.lcs_kernel);
    }
    expected += static_cast<std::int64_t>(config.bottleneck_blocks) *
                cfsab_param_count(config.level_channels(config.depth), config.lcs_kernel);
    out["ablation"] = {{"dcb_only_params", without},
                       {"dcb_cfsab_params", model.count_params()},
                       {"delta", model.count_params() - without},
                       {"expected_delta", expected}};
  }
  if (a.json) {
    std::cout << out.dump(2) << "\n";
    return;
  }
  std::printf("variant %s  input %dx%dx%d\n", config.variant.c_str(), a.h, a.w, config.bands);
  std::printf("params %lld (%.3fM)\n", static_cast<long long>(model.count_params()),
              model.count_params() / 1e6);
  std::printf("gflops %.3f\n", gflops);
  if (a.breakdown) {
    for (const auto& [name, g] : out["breakdown"].items()) {
      std::printf("  %-12s params %10lld  gflops %8.3f\n", name.c_str(),
                  static_cast<long long>(g["params"].get<std::int64_t>()), g["gflops"].get<double>());
    }
  }
  if (a.ablation) {
    const auto& ab = out["ablation"];
    std::printf("ablation dcb-only %lld  dcb+cfsab %lld  delta %lld  expected %lld\n",
                static_cast<long long>(ab["dcb_only_params"].get<std::int64_t>()),
                static_cast<long long>(ab["dcb_cfsab_params"].get<std::int64_t>()),
                static_cast<long long>(ab["delta"].get<std::int64_t>()),
                static_cast<long long>(ab["expected_delta"].get<std::int64_t>()));
  }
}

}  // namespace cfsdcn::cli
