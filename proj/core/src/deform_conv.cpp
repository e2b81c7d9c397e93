#include "cfsdcn/deform_conv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "parallel.hpp"

namespace cfsdcn {

using detail::parallel_for;

namespace {

thread_local LatticeMarginProbe* t_probe = nullptr;

double lattice_distance(double v) { return std::abs(v - std::round(v)); }

// Bilinear footprint of every (pixel, tap) pair of one (batch, group). Entry
// e = p * taps + k owns four corner slots e*4 + {00, 01, 10, 11}; a corner
// outside the map gets index 0 and all-zero coefficients.
template <typename T>
struct SamplingTable {
  std::vector<int> index;
  std::vector<T> bilinear;  // interpolation weight of each corner
  std::vector<T> d_py;      // d(weight)/d(py)
  std::vector<T> d_px;      // d(weight)/d(px)
  std::vector<T> m;         // modulation per entry

  // Returns the smallest lattice distance when `track` is set, else +inf.
  double build(const Array4<T>& offsets, const Array4<T>& modulation, int n, int g, int taps,
               int kernel, int h, int w, bool track = false) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t size = plane * taps;
    index.assign(size * 4, 0);
    bilinear.assign(size * 4, T{0});
    d_py.assign(size * 4, T{0});
    d_px.assign(size * 4, T{0});
    m.resize(size);
    const int r = kernel / 2;
    double margin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < taps; ++k) {
      const int ky = k / kernel - r;
      const int kx = k % kernel - r;
      const T* dy = offsets.plane(n, 2 * (g * taps + k));
      const T* dx = offsets.plane(n, 2 * (g * taps + k) + 1);
      const T* mk = modulation.plane(n, g * taps + k);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t p = static_cast<std::size_t>(y) * w + x;
          const T py = static_cast<T>(y + ky) + dy[p];
          const T px = static_cast<T>(x + kx) + dx[p];
          const T fy = std::floor(py);
          const T fx = std::floor(px);
          const int y0 = static_cast<int>(fy);
          const int x0 = static_cast<int>(fx);
          const T ly = py - fy;
          const T lx = px - fx;
          const std::size_t e = p * taps + k;
          m[e] = mk[p];
          const T wy[2] = {T(1) - ly, ly};
          const T wx[2] = {T(1) - lx, lx};
          const T sy[2] = {T(-1), T(1)};
          for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) {
              const int yy = y0 + a;
              const int xx = x0 + b;
              if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
              const std::size_t slot = e * 4 + a * 2 + b;
              index[slot] = yy * w + xx;
              bilinear[slot] = wy[a] * wx[b];
              d_py[slot] = sy[a] * wx[b];
              d_px[slot] = wy[a] * sy[b];
            }
          }
          if (track) {
            margin = std::min({margin, lattice_distance(static_cast<double>(py)),
                               lattice_distance(static_cast<double>(px))});
          }
        }
      }
    }
    return margin;
  }
};

template <typename T>
struct Corners {
  T v00, v01, v10, v11;
};

template <typename T>
Corners<T> read_corners(const T* plane, int h, int w, int y0, int x0) {
  const bool r0 = y0 >= 0 && y0 < h;
  const bool r1 = y0 + 1 >= 0 && y0 + 1 < h;
  const bool c0 = x0 >= 0 && x0 < w;
  const bool c1 = x0 + 1 >= 0 && x0 + 1 < w;
  const std::size_t base = static_cast<std::size_t>(y0) * w + x0;
  return {r0 && c0 ? plane[base] : T{0}, r0 && c1 ? plane[base + 1] : T{0},
          r1 && c0 ? plane[base + w] : T{0}, r1 && c1 ? plane[base + w + 1] : T{0}};
}

template <typename T>
void check_field_shapes(const Shape4& xs, const Shape4& os, const Shape4& ms, int groups,
                        int taps) {
  if (groups < 1 || xs.c % groups != 0) {
    throw ShapeError("deform_sample: " + std::to_string(xs.c) +
                     " channels not divisible by groups=" + std::to_string(groups));
  }
  const Shape4 want_o{xs.n, 2 * groups * taps, xs.h, xs.w};
  const Shape4 want_m{xs.n, groups * taps, xs.h, xs.w};
  if (!(os == want_o)) {
    throw ShapeError("deform_sample: offsets " + os.str() + " expected " + want_o.str());
  }
  if (!(ms == want_m)) {
    throw ShapeError("deform_sample: modulation " + ms.str() + " expected " + want_m.str());
  }
}

}  // namespace

LatticeMarginProbe::LatticeMarginProbe()
    : margin_(std::numeric_limits<double>::infinity()), previous_(t_probe) {
  t_probe = this;
}

LatticeMarginProbe::~LatticeMarginProbe() { t_probe = previous_; }

LatticeMarginProbe* LatticeMarginProbe::active() { return t_probe; }

int auto_deform_groups(int channels) {
  const int cap = std::max(1, channels / 16);
  for (int g = cap; g > 1; --g) {
    if (channels % g == 0) return g;
  }
  return 1;
}

template <typename T>
std::vector<T> bilinear_sample(const Array4<T>& x, int n, int c_begin, int c_count, T py, T px) {
  const Shape4& s = x.shape();
  const T fy = std::floor(py);
  const T fx = std::floor(px);
  const int y0 = static_cast<int>(fy);
  const int x0 = static_cast<int>(fx);
  const T ly = py - fy;
  const T lx = px - fx;
  std::vector<T> out(c_count);
  for (int i = 0; i < c_count; ++i) {
    const Corners<T> v = read_corners(x.plane(n, c_begin + i), s.h, s.w, y0, x0);
    out[i] = (T(1) - ly) * (T(1) - lx) * v.v00 + (T(1) - ly) * lx * v.v01 +
             ly * (T(1) - lx) * v.v10 + ly * lx * v.v11;
  }
  return out;
}

template <typename T>
Tensor<T> deform_sample(const Tensor<T>& x, const Tensor<T>& offsets,
                        const Tensor<T>& modulation, int groups, int kernel) {
  const Shape4 xs = x.shape();
  const int taps = kernel * kernel;
  check_field_shapes<T>(xs, offsets.shape(), modulation.shape(), groups, taps);
  if (!offsets.value().all_finite()) throw std::domain_error("deform_sample: non-finite offsets");
  const int cg = xs.c / groups;
  const int h = xs.h;
  const int w = xs.w;
  const std::size_t plane = xs.plane();
  Array4<T> out(xs);
  {
    const Array4<T>& xv = x.value();
    const Array4<T>& ov = offsets.value();
    const Array4<T>& mv = modulation.value();
    LatticeMarginProbe* probe = t_probe;
    std::vector<double> margins(static_cast<std::size_t>(xs.n) * groups);
    parallel_for(static_cast<std::int64_t>(xs.n) * groups, [&](std::int64_t job) {
      const int n = static_cast<int>(job / groups);
      const int g = static_cast<int>(job % groups);
      SamplingTable<T> table;
      margins[job] = table.build(ov, mv, n, g, taps, kernel, h, w, probe != nullptr);
      for (int ci = 0; ci < cg; ++ci) {
        const int c = g * cg + ci;
        const T* ip = xv.plane(n, c);
        T* op = out.plane(n, c);
        for (std::size_t p = 0; p < plane; ++p) {
          T acc = 0;
          for (int k = 0; k < taps; ++k) {
            const std::size_t e = p * taps + k;
            const int* idx = &table.index[e * 4];
            const T* bw = &table.bilinear[e * 4];
            const T s = (bw[0] * ip[idx[0]] + bw[1] * ip[idx[1]]) +
                        (bw[2] * ip[idx[2]] + bw[3] * ip[idx[3]]);
            acc += table.m[e] * s;
          }
          op[p] = acc;
        }
      }
    });
    if (probe) {
      for (double m : margins) probe->update(m);
    }
  }
  return make_result<T>(
      std::move(out), "deform_sample", {x, offsets, modulation},
      [x, offsets, modulation, groups, kernel, taps, cg, h, w, plane](Node<T>& self) mutable {
        const Array4<T>& g_out = self.grad;
        const Array4<T>& xv = x.value();
        const Array4<T>& ov = offsets.value();
        const Array4<T>& mv = modulation.value();
        Array4<T>* dx = x.requires_grad() ? &x.grad_buffer() : nullptr;
        Array4<T>* doff = offsets.requires_grad() ? &offsets.grad_buffer() : nullptr;
        Array4<T>* dmod = modulation.requires_grad() ? &modulation.grad_buffer() : nullptr;
        const int batch = xv.shape().n;
        parallel_for(static_cast<std::int64_t>(batch) * groups, [&](std::int64_t job) {
          const int n = static_cast<int>(job / groups);
          const int g = static_cast<int>(job % groups);
          SamplingTable<T> table;
          table.build(ov, mv, n, g, taps, kernel, h, w);
          const std::size_t entries = plane * taps;
          std::vector<T> acc_m(dmod ? entries : 0, T{0});
          std::vector<T> acc_y(doff ? entries : 0, T{0});
          std::vector<T> acc_x(doff ? entries : 0, T{0});
          for (int ci = 0; ci < cg; ++ci) {
            const int c = g * cg + ci;
            const T* ip = xv.plane(n, c);
            const T* gp = g_out.plane(n, c);
            T* dp = dx ? dx->plane(n, c) : nullptr;
            for (std::size_t p = 0; p < plane; ++p) {
              const T go = gp[p];
              for (int k = 0; k < taps; ++k) {
                const std::size_t e = p * taps + k;
                const int* idx = &table.index[e * 4];
                const T* bw = &table.bilinear[e * 4];
                if (dp) {
                  const T gm = go * table.m[e];
                  for (int q = 0; q < 4; ++q) dp[idx[q]] += gm * bw[q];
                }
                if (dmod || doff) {
                  const T v[4] = {ip[idx[0]], ip[idx[1]], ip[idx[2]], ip[idx[3]]};
                  if (dmod) acc_m[e] += go * ((bw[0] * v[0] + bw[1] * v[1]) + (bw[2] * v[2] + bw[3] * v[3]));
                  if (doff) {
                    const T gm = go * table.m[e];
                    const T* cy = &table.d_py[e * 4];
                    const T* cx = &table.d_px[e * 4];
                    acc_y[e] += gm * ((cy[0] * v[0] + cy[1] * v[1]) + (cy[2] * v[2] + cy[3] * v[3]));
                    acc_x[e] += gm * ((cx[0] * v[0] + cx[1] * v[1]) + (cx[2] * v[2] + cx[3] * v[3]));
                  }
                }
              }
            }
          }
          for (int k = 0; k < taps; ++k) {
            T* dm = dmod ? dmod->plane(n, g * taps + k) : nullptr;
            T* ddy = doff ? doff->plane(n, 2 * (g * taps + k)) : nullptr;
            T* ddx = doff ? doff->plane(n, 2 * (g * taps + k) + 1) : nullptr;
            for (std::size_t p = 0; p < plane; ++p) {
              const std::size_t e = p * taps + k;
              if (dm) dm[p] += acc_m[e];
              if (ddy) {
                ddy[p] += acc_y[e];
                ddx[p] += acc_x[e];
              }
            }
          }
        });
      });
}

template <typename T>
DeformConv<T>::DeformConv(int channels, int groups, Rng& rng, int kernel)
    : channels_(channels), groups_(groups), kernel_(kernel) {
  if (groups < 1 || channels % groups != 0) {
    throw ShapeError("DeformConv: " + std::to_string(channels) +
                     " channels not divisible by groups=" + std::to_string(groups));
  }
  const int gk = groups * kernel * kernel;
  head_depthwise = DepthwiseConv<T>(channels, 3, rng);
  head_pointwise = PointwiseConv<T>(channels, 3 * gk, true, rng);
  head_pointwise.weight.mutable_value().fill(T{0});
  head_pointwise.bias.mutable_value().fill(T{0});
  projection = PointwiseConv<T>(channels, channels, true, rng);
}

template <typename T>
OffsetField<T> DeformConv<T>::predict_offsets(const Tensor<T>& features) const {
  if (features.shape().c != channels_) {
    throw ShapeError("DeformConv: feature map has " + std::to_string(features.shape().c) +
                     " channels, head expects " + std::to_string(channels_));
  }
  const int gk = groups_ * taps();
  const Tensor<T> head = head_pointwise(gelu(head_depthwise(features)));
  return {slice_channels(head, 0, 2 * gk),
          softmax_over_group(slice_channels(head, 2 * gk, gk), taps())};
}

template <typename T>
Tensor<T> DeformConv<T>::apply(const Tensor<T>& x, const OffsetField<T>& field) const {
  return projection(deform_sample(x, field.offsets, field.modulation, groups_, kernel_));
}

template <typename T>
Tensor<T> DeformConv<T>::operator()(const Tensor<T>& x, const Tensor<T>& features) const {
  return apply(x, predict_offsets(features));
}

template <typename T>
void DeformConv<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const {
  head_depthwise.collect(prefix + ".head_dw", out);
  head_pointwise.collect(prefix + ".head_pw", out);
  projection.collect(prefix + ".proj", out);
}

template <typename T>
Shape4 DeformConv<T>::account(const std::string& name, Shape4 in, CostLedger& ledger) const {
  head_depthwise.account(name + ".head_dw", in, ledger);
  head_pointwise.account(name + ".head_pw", in, ledger);
  // Four bilinear taps plus one modulation multiply per channel and sample.
  ledger.add(name + ".sample", 0, static_cast<std::int64_t>(in.numel()) * taps() * 5);
  return projection.account(name + ".proj", in, ledger);
}

template std::vector<float> bilinear_sample(const Array4<float>&, int, int, int, float, float);
template std::vector<double> bilinear_sample(const Array4<double>&, int, int, int, double,
                                             double);
template Tensor<float> deform_sample(const Tensor<float>&, const Tensor<float>&,
                                     const Tensor<float>&, int, int);
template Tensor<double> deform_sample(const Tensor<double>&, const Tensor<double>&,
                                      const Tensor<double>&, int, int);
template class DeformConv<float>;
template class DeformConv<double>;

}  // namespace cfsdcn
