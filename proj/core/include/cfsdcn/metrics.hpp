#pragma once

#include "cfsdcn/optics.hpp"

namespace cfsdcn {

inline constexpr double kPsnrCapDb = 100.0;

enum class PsnrMode {
  PerBand,    // mean over bands of per-band PSNR
  WholeCube,  // one PSNR from the MSE over every voxel
};

/// 10 log10(peak^2 / MSE), reported as kPsnrCapDb when MSE is zero.
double psnr_from_mse(double mse, double peak = 1.0);

double psnr(const HsiCube& x, const HsiCube& ref, double peak = 1.0,
            PsnrMode mode = PsnrMode::PerBand);

/// Single-scale SSIM of one band (Gaussian window 11, sigma 1.5, K1 0.01,
/// K2 0.03, data range `peak`), averaged over window positions fully inside
/// the image. Needs h, w >= 11. Symmetric in its arguments bit for bit.
double ssim_band(const float* x, const float* ref, int h, int w, double peak = 1.0);

/// Mean over bands of ssim_band.
double ssim(const HsiCube& x, const HsiCube& ref, double peak = 1.0);

}  // namespace cfsdcn
