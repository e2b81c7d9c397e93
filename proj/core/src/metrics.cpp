#include "cfsdcn/metrics.hpp"

#include <array>
#include <cmath>

namespace cfsdcn {

namespace {
constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

void require_match(const HsiCube& x, const HsiCube& ref, const char* what) {
  if (x.h != ref.h || x.w != ref.w || x.bands != ref.bands) {
    throw ShapeError(std::string(what) + ": cube " + std::to_string(x.bands) + "x" +
                     std::to_string(x.h) + "x" + std::to_string(x.w) + " vs reference " +
                     std::to_string(ref.bands) + "x" + std::to_string(ref.h) + "x" +
                     std::to_string(ref.w));
  }
}

std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> g{};
  double sum = 0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Separable valid-mode filtering; output is (h-10) x (w-10).
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w) {
  static const auto g = gaussian_window();
  const int oh = h - kWindow + 1;
  const int ow = w - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int k = 0; k < kWindow; ++k) s += g[k] * img[static_cast<std::size_t>(y) * w + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int k = 0; k < kWindow; ++k) s += g[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}
}  // namespace

double psnr_from_mse(double mse, double peak) {
  if (mse < 0 || !std::isfinite(mse)) throw std::invalid_argument("psnr: invalid MSE");
  if (mse == 0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

double psnr(const HsiCube& x, const HsiCube& ref, double peak, PsnrMode mode) {
  require_match(x, ref, "psnr");
  const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
  if (mode == PsnrMode::WholeCube) {
    double se = 0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      const double d = static_cast<double>(x.data[i]) - ref.data[i];
      se += d * d;
    }
    return psnr_from_mse(se / static_cast<double>(x.data.size()), peak);
  }
  double total = 0;
  for (int b = 0; b < x.bands; ++b) {
    double se = 0;
    const float* a = x.band(b);
    const float* r = ref.band(b);
    for (std::size_t i = 0; i < plane; ++i) {
      const double d = static_cast<double>(a[i]) - r[i];
      se += d * d;
    }
    total += psnr_from_mse(se / static_cast<double>(plane), peak);
  }
  return total / x.bands;
}

double ssim_band(const float* x, const float* ref, int h, int w, double peak) {
  if (h < kWindow || w < kWindow) {
    throw ShapeError("ssim needs at least " + std::to_string(kWindow) + "x" +
                     std::to_string(kWindow) + " pixels, got " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> a(n), b(n), aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = x[i];
    b[i] = ref[i];
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a, h, w);
  const auto mu_b = filter_valid(b, h, w);
  const auto e_aa = filter_valid(aa, h, w);
  const auto e_bb = filter_valid(bb, h, w);
  const auto e_ab = filter_valid(ab, h, w);
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  double sum = 0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return sum / static_cast<double>(mu_a.size());
}

double ssim(const HsiCube& x, const HsiCube& ref, double peak) {
  require_match(x, ref, "ssim");
  double total = 0;
  for (int b = 0; b < x.bands; ++b) total += ssim_band(x.band(b), ref.band(b), x.h, x.w, peak);
  return total / x.bands;
}

}  // namespace cfsdcn
