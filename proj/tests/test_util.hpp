#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "cfsdcn/array.hpp"
#include "cfsdcn/random.hpp"

namespace cfsdcn::testing {

template <typename T>
Array4<T> random_array(Shape4 s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Array4<T> a(s);
  for (T& v : a.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return a;
}

template <typename T>
double max_abs_diff(const Array4<T>& a, const Array4<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

/// Direct loop over every output tap; zero padding; bias may be empty.
template <typename T>
Array4<T> naive_conv2d(const Array4<T>& x, const Array4<T>& w, const Array4<T>& bias, int stride,
                       int pad, int groups) {
  const Shape4 xs = x.shape();
  const Shape4 ws = w.shape();
  const int k = ws.h;
  const int oh = (xs.h + 2 * pad - k) / stride + 1;
  const int ow = (xs.w + 2 * pad - k) / stride + 1;
  const int cin_g = xs.c / groups;
  const int cout_g = ws.n / groups;
  Array4<T> out({xs.n, ws.n, oh, ow});
  for (int n = 0; n < xs.n; ++n)
    for (int co = 0; co < ws.n; ++co) {
      const int g = co / cout_g;
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          double acc = bias.empty() ? 0.0 : bias[co];
          for (int ci = 0; ci < cin_g; ++ci)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = y * stride + ky - pad;
                const int ix = xx * stride + kx - pad;
                if (iy < 0 || ix < 0 || iy >= xs.h || ix >= xs.w) continue;
                acc += static_cast<double>(w.at(co, ci, ky, kx)) * x.at(n, g * cin_g + ci, iy, ix);
              }
          out.at(n, co, y, xx) = static_cast<T>(acc);
        }
    }
  return out;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cfsdcn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace cfsdcn::testing
