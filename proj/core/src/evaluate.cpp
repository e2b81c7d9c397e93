#include "cfsdcn/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cfsdcn/data.hpp"
#include "cfsdcn/hsc_io.hpp"
#include "cfsdcn/random.hpp"

namespace cfsdcn {

namespace fs = std::filesystem;

namespace {
std::ofstream open_for_write(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void require_scenes(const std::vector<NamedCube>& scenes) {
  if (scenes.empty()) throw std::invalid_argument("evaluate: no scenes");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}
}  // namespace

void MetricReport::finalize() {
  double p = 0;
  double s = 0;
  for (const auto& m : scenes) {
    p += m.psnr_db;
    s += m.ssim;
  }
  const double n = scenes.empty() ? 1.0 : static_cast<double>(scenes.size());
  mean_psnr_db = p / n;
  mean_ssim = s / n;
}

HsiCube reconstruct(const CfsdcnModel<float>& model, const Measurement& y, const Mask2D& mask,
                    const CassiConfig& cassi) {
  const int bands = model.config().bands;
  const DispersionSpec spec = cassi.dispersion(bands);
  const int w = y.width - spec.step * (bands - 1);
  if (w < 1) throw ShapeError("reconstruct: measurement too narrow for the band count");
  const Mask2D m = (mask.h == y.h && mask.w == w) ? mask : crop_mask(mask, y.h, w);
  const Mask3D mask3d = build_mask3d(m, spec, cassi.mask3d);
  NoGradGuard no_grad;
  const Tensor<float> out =
      model.forward(Tensor<float>::leaf(build_network_input(y, mask3d, spec)));
  return array_to_cube(out.value());
}

MetricReport score_reconstructions(const std::vector<NamedCube>& reconstructions,
                                   const std::vector<NamedCube>& references, PsnrMode mode) {
  require_scenes(references);
  if (reconstructions.size() != references.size()) {
    throw std::invalid_argument("evaluate: " + std::to_string(reconstructions.size()) +
                                " reconstructions for " + std::to_string(references.size()) +
                                " scenes");
  }
  MetricReport report;
  report.psnr_mode = mode;
  for (std::size_t i = 0; i < references.size(); ++i) {
    const HsiCube& x = reconstructions[i].cube;
    const HsiCube& ref = references[i].cube;
    report.scenes.push_back({references[i].id, psnr(x, ref, 1.0, mode), ssim(x, ref)});
  }
  report.finalize();
  return report;
}

MetricReport evaluate_model(const CfsdcnModel<float>& model, const std::vector<NamedCube>& scenes,
                            const Mask2D& mask, const CassiConfig& cassi, std::uint64_t seed,
                            PsnrMode mode) {
  require_scenes(scenes);
  std::vector<NamedCube> recon;
  double seconds = 0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Observation o = observe(scenes[i].cube, mask, cassi, mix_seed(seed, i));
    const auto t0 = std::chrono::steady_clock::now();
    recon.push_back({scenes[i].id, reconstruct(model, o.measurement, mask, cassi)});
    seconds += seconds_since(t0);
  }
  MetricReport report = score_reconstructions(recon, scenes, mode);
  report.method = "cfsdcn";
  report.params = model.count_params();
  report.gflops = model_gflops(model.config(), scenes.front().cube.h, scenes.front().cube.w);
  report.seconds = seconds;
  return report;
}

MetricReport evaluate_shift_back(const std::vector<NamedCube>& scenes, const Mask2D& mask,
                                 const CassiConfig& cassi, std::uint64_t seed, PsnrMode mode) {
  require_scenes(scenes);
  std::vector<NamedCube> recon;
  double seconds = 0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Observation o = observe(scenes[i].cube, mask, cassi, mix_seed(seed, i));
    const auto t0 = std::chrono::steady_clock::now();
    recon.push_back({scenes[i].id,
                     shift_back_baseline(o.measurement, cassi.dispersion(scenes[i].cube.bands))});
    seconds += seconds_since(t0);
  }
  MetricReport report = score_reconstructions(recon, scenes, mode);
  report.method = "shift-back";
  report.seconds = seconds;
  return report;
}

void write_report_csv(const fs::path& path, const MetricReport& report) {
  auto out = open_for_write(path);
  out << "scene_id,psnr_db,ssim\n";
  for (const auto& s : report.scenes) {
    out << s.scene_id << "," << fixed(s.psnr_db, 6) << "," << fixed(s.ssim, 8) << "\n";
  }
  out << "mean," << fixed(report.mean_psnr_db, 6) << "," << fixed(report.mean_ssim, 8) << "\n";
}

void write_report_json(const fs::path& path, const MetricReport& report) {
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto& s : report.scenes) {
    scenes.push_back({{"scene_id", s.scene_id}, {"psnr_db", s.psnr_db}, {"ssim", s.ssim}});
  }
  const nlohmann::json doc = {
      {"method", report.method},
      {"psnr_mode", report.psnr_mode == PsnrMode::PerBand ? "per-band" : "whole-cube"},
      {"scenes", std::move(scenes)},
      {"mean_psnr_db", report.mean_psnr_db},
      {"mean_ssim", report.mean_ssim},
      {"params", report.params},
      {"gflops", report.gflops},
      {"seconds", report.seconds}};
  open_for_write(path) << doc.dump(2) << "\n";
}

MetricReport read_report_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "scene_id,psnr_db,ssim") throw FormatError(path.string() + ": unexpected header");
  MetricReport report;
  bool summary = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id, p, s;
    if (!std::getline(row, id, ',') || !std::getline(row, p, ',') || !std::getline(row, s)) {
      throw FormatError(path.string() + ": malformed row '" + line + "'");
    }
    if (id == "mean") {
      report.mean_psnr_db = std::stod(p);
      report.mean_ssim = std::stod(s);
      summary = true;
    } else {
      report.scenes.push_back({id, std::stod(p), std::stod(s)});
    }
  }
  if (!summary) throw FormatError(path.string() + ": missing summary row");
  return report;
}

void write_ablation_csv(const fs::path& path, std::vector<AblationRow> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const AblationRow& a, const AblationRow& b) { return a.lcs_kernel < b.lcs_kernel; });
  auto out = open_for_write(path);
  out << "lcs_kernel,params,gflops,psnr_db,ssim\n";
  for (const auto& r : rows) {
    out << r.lcs_kernel << "," << r.params << "," << fixed(r.gflops, 6) << ","
        << fixed(r.psnr_db, 6) << "," << fixed(r.ssim, 8) << "\n";
  }
}

double write_spectral_density_csv(const fs::path& path, const HsiCube& reference,
                                  const HsiCube& reconstruction, int y, int x, int h, int w) {
  if (reference.bands != reconstruction.bands || reference.h != reconstruction.h ||
      reference.w != reconstruction.w) {
    throw ShapeError("spectral density: reconstruction and reference differ in shape");
  }
  if (y < 0 || x < 0 || h < 1 || w < 1 || y + h > reference.h || x + w > reference.w) {
    throw ShapeError("spectral density: region outside the cube");
  }
  const int bands = reference.bands;
  std::vector<double> a(bands), b(bands);
  for (int n = 0; n < bands; ++n) {
    for (int r = y; r < y + h; ++r) {
      for (int c = x; c < x + w; ++c) {
        a[n] += reference.at(n, r, c);
        b[n] += reconstruction.at(n, r, c);
      }
    }
    a[n] /= static_cast<double>(h) * w;
    b[n] /= static_cast<double>(h) * w;
  }
  auto out = open_for_write(path);
  out << "band,wavelength_nm,reference,reconstruction\n";
  for (int n = 0; n < bands; ++n) {
    const bool has_wl = static_cast<int>(reference.wavelengths.size()) == bands;
    out << n << "," << (has_wl ? fixed(reference.wavelengths[n], 3) : std::string()) << ","
        << fixed(a[n], 8) << "," << fixed(b[n], 8) << "\n";
  }
  double ma = 0, mb = 0;
  for (int n = 0; n < bands; ++n) {
    ma += a[n] / bands;
    mb += b[n] / bands;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (int n = 0; n < bands; ++n) {
    sab += (a[n] - ma) * (b[n] - mb);
    saa += (a[n] - ma) * (a[n] - ma);
    sbb += (b[n] - mb) * (b[n] - mb);
  }
  return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

}  // namespace cfsdcn
