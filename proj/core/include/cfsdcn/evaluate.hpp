#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cfsdcn/metrics.hpp"
#include "cfsdcn/network.hpp"

namespace cfsdcn {

struct NamedCube {
  std::string id;
  HsiCube cube;
};

struct SceneMetrics {
  std::string scene_id;
  double psnr_db = 0;
  double ssim = 0;
};

struct MetricReport {
  std::string method;  // "cfsdcn", "shift-back", ...
  std::vector<SceneMetrics> scenes;
  double mean_psnr_db = 0;  // arithmetic means of the per-scene columns
  double mean_ssim = 0;
  std::int64_t params = 0;
  double gflops = 0;  // at the evaluated scene size
  double seconds = 0;  // wall time spent reconstructing
  PsnrMode psnr_mode = PsnrMode::PerBand;

  /// Recomputes the means from `scenes`.
  void finalize();
};

/// Network reconstruction of one measurement. The mask is cropped top-left
/// to the cube footprint implied by the measurement width.
HsiCube reconstruct(const CfsdcnModel<float>& model, const Measurement& y, const Mask2D& mask,
                    const CassiConfig& cassi);

/// Scores reconstructions against references, in order.
MetricReport score_reconstructions(const std::vector<NamedCube>& reconstructions,
                                   const std::vector<NamedCube>& references,
                                   PsnrMode mode = PsnrMode::PerBand);

/// Simulates each scene (noise seed mix_seed(seed, index)), reconstructs it
/// and scores the result. Throws std::invalid_argument on an empty scene list.
MetricReport evaluate_model(const CfsdcnModel<float>& model, const std::vector<NamedCube>& scenes,
                            const Mask2D& mask, const CassiConfig& cassi, std::uint64_t seed,
                            PsnrMode mode = PsnrMode::PerBand);

/// Same protocol with the scaled shift-back cube as the reconstruction.
MetricReport evaluate_shift_back(const std::vector<NamedCube>& scenes, const Mask2D& mask,
                                 const CassiConfig& cassi, std::uint64_t seed,
                                 PsnrMode mode = PsnrMode::PerBand);

/// scene_id,psnr_db,ssim rows followed by one `mean` summary row.
void write_report_csv(const std::filesystem::path& path, const MetricReport& report);
void write_report_json(const std::filesystem::path& path, const MetricReport& report);
MetricReport read_report_csv(const std::filesystem::path& path);

struct AblationRow {
  int lcs_kernel = 0;
  std::int64_t params = 0;
  double gflops = 0;
  double psnr_db = 0;
  double ssim = 0;
};

/// lcs_kernel,params,gflops,psnr_db,ssim; rows sorted by kernel size.
void write_ablation_csv(const std::filesystem::path& path, std::vector<AblationRow> rows);

/// Mean spectrum over a rectangular region of the reference and of the
/// reconstruction, one row per band: band,wavelength_nm,reference,reconstruction.
/// Also reports the Pearson correlation of the two curves.
double write_spectral_density_csv(const std::filesystem::path& path, const HsiCube& reference,
                                  const HsiCube& reconstruction, int y, int x, int h, int w);

}  // namespace cfsdcn
