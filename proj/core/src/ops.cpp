#include "cfsdcn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "parallel.hpp"
#include "reduce.hpp"

namespace cfsdcn {

using detail::parallel_for;
using detail::dot;

namespace {

int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }
int ceil_div(int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }

// Range of output columns `o` whose input column o*s - p + k lies in [0, in).
struct ColumnRange {
  int lo;
  int hi;  // inclusive
};
ColumnRange valid_outputs(int in, int out, int stride, int padding, int tap) {
  return {std::max(0, ceil_div(padding - tap, stride)),
          std::min(out - 1, floor_div(in - 1 + padding - tap, stride))};
}

template <typename T>
void check_bias(const Tensor<T>& bias, int channels, const char* what) {
  if (!bias.defined()) return;
  const Shape4 expected{1, channels, 1, 1};
  if (!(bias.shape() == expected)) {
    throw ShapeError(std::string(what) + ": bias shape " + bias.shape().str() +
                     " expected " + expected.str());
  }
}

template <typename T>
void accumulate_bias_grad(const Array4<T>& g, Array4<T>& db) {
  const Shape4& s = g.shape();
  const std::size_t plane = s.plane();
  parallel_for(s.c, [&](std::int64_t c) {
    T acc = 0;
    for (int n = 0; n < s.n; ++n) {
      const T* gp = g.plane(n, static_cast<int>(c));
      acc += detail::sum(gp, plane);
    }
    db[c] += acc;
  });
}

// ---------------------------------------------------------------------------
// Grouped convolution through im2col: row r = (cl*k + ky)*k + kx of the
// column buffer holds input channel cl shifted by tap (ky, kx), one entry per
// output pixel, zero where the tap falls into padding.

template <typename T>
void im2col(const Array4<T>& x, int n, int c_begin, int c_count, int k, ConvOptions o, int oh,
            int ow, std::vector<T>& cols) {
  const Shape4& xs = x.shape();
  const std::size_t pixels = static_cast<std::size_t>(oh) * ow;
  cols.assign(static_cast<std::size_t>(c_count) * k * k * pixels, T{0});
  parallel_for(c_count, [&](std::int64_t cl_) {
    const int cl = static_cast<int>(cl_);
    const T* ip = x.plane(n, c_begin + cl);
    for (int ky = 0; ky < k; ++ky) {
      const ColumnRange rows = valid_outputs(xs.h, oh, o.stride, o.padding, ky);
      for (int kx = 0; kx < k; ++kx) {
        const ColumnRange cr = valid_outputs(xs.w, ow, o.stride, o.padding, kx);
        T* row = cols.data() + ((static_cast<std::size_t>(cl) * k + ky) * k + kx) * pixels;
        for (int oy = rows.lo; oy <= rows.hi; ++oy) {
          const T* irow = ip + static_cast<std::size_t>(oy * o.stride - o.padding + ky) * xs.w;
          T* dst = row + static_cast<std::size_t>(oy) * ow;
          if (o.stride == 1) {
            std::copy(irow + cr.lo - o.padding + kx, irow + cr.hi + 1 - o.padding + kx, dst + cr.lo);
          } else {
            for (int ox = cr.lo; ox <= cr.hi; ++ox) dst[ox] = irow[ox * o.stride - o.padding + kx];
          }
        }
      }
    }
  });
}

// Adjoint of im2col: scatter-adds the column buffer back into dx.
template <typename T>
void col2im(const std::vector<T>& cols, int n, int c_begin, int c_count, int k, ConvOptions o,
            int oh, int ow, Array4<T>& dx) {
  const Shape4& xs = dx.shape();
  const std::size_t pixels = static_cast<std::size_t>(oh) * ow;
  parallel_for(c_count, [&](std::int64_t cl_) {
    const int cl = static_cast<int>(cl_);
    T* dp = dx.plane(n, c_begin + cl);
    for (int ky = 0; ky < k; ++ky) {
      const ColumnRange rows = valid_outputs(xs.h, oh, o.stride, o.padding, ky);
      for (int kx = 0; kx < k; ++kx) {
        const ColumnRange cr = valid_outputs(xs.w, ow, o.stride, o.padding, kx);
        const T* row = cols.data() + ((static_cast<std::size_t>(cl) * k + ky) * k + kx) * pixels;
        for (int oy = rows.lo; oy <= rows.hi; ++oy) {
          T* drow = dp + static_cast<std::size_t>(oy * o.stride - o.padding + ky) * xs.w;
          const T* src = row + static_cast<std::size_t>(oy) * ow;
          if (o.stride == 1) {
            T* d = drow - o.padding + kx;
            for (int ox = cr.lo; ox <= cr.hi; ++ox) d[ox] += src[ox];
          } else {
            for (int ox = cr.lo; ox <= cr.hi; ++ox) drow[ox * o.stride - o.padding + kx] += src[ox];
          }
        }
      }
    }
  });
}

template <typename T>
void conv_forward(const Array4<T>& x, const Array4<T>& w, const Array4<T>* bias,
                  ConvOptions o, Array4<T>& out) {
  const Shape4& xs = x.shape();
  const Shape4& os = out.shape();
  const int k = w.shape().h;
  const int cin_g = xs.c / o.groups;
  const int cout_g = os.c / o.groups;
  const std::size_t taps = static_cast<std::size_t>(cin_g) * k * k;
  const std::size_t pixels = os.plane();
  std::vector<T> cols;
  for (int n = 0; n < os.n; ++n) {
    for (int g = 0; g < o.groups; ++g) {
      im2col(x, n, g * cin_g, cin_g, k, o, os.h, os.w, cols);
      parallel_for(cout_g, [&](std::int64_t col) {
        const int co = g * cout_g + static_cast<int>(col);
        T* op = out.plane(n, co);
        std::fill(op, op + pixels, bias ? (*bias)[co] : T{0});
        const T* wr = w.ptr() + co * taps;
        for (std::size_t r = 0; r < taps; ++r) {
          const T wv = wr[r];
          const T* src = cols.data() + r * pixels;
          for (std::size_t i = 0; i < pixels; ++i) op[i] += wv * src[i];
        }
      });
    }
  }
}

template <typename T>
void conv_backward_input(const Array4<T>& g, const Array4<T>& w, ConvOptions o,
                         Array4<T>& dx) {
  const Shape4& xs = dx.shape();
  const Shape4& os = g.shape();
  const int k = w.shape().h;
  const int cin_g = xs.c / o.groups;
  const int cout_g = os.c / o.groups;
  const std::size_t taps = static_cast<std::size_t>(cin_g) * k * k;
  const std::size_t pixels = os.plane();
  std::vector<T> cols(taps * pixels);
  for (int n = 0; n < os.n; ++n) {
    for (int grp = 0; grp < o.groups; ++grp) {
      parallel_for(static_cast<std::int64_t>(taps), [&](std::int64_t r) {
        T* dst = cols.data() + r * pixels;
        std::fill(dst, dst + pixels, T{0});
        for (int col = 0; col < cout_g; ++col) {
          const int co = grp * cout_g + col;
          const T wv = w[co * taps + r];
          const T* gp = g.plane(n, co);
          for (std::size_t i = 0; i < pixels; ++i) dst[i] += wv * gp[i];
        }
      });
      col2im(cols, n, grp * cin_g, cin_g, k, o, os.h, os.w, dx);
    }
  }
}

template <typename T>
void conv_backward_weight(const Array4<T>& g, const Array4<T>& x, ConvOptions o,
                          Array4<T>& dw) {
  const Shape4& xs = x.shape();
  const Shape4& os = g.shape();
  const int k = dw.shape().h;
  const int cin_g = xs.c / o.groups;
  const int cout_g = os.c / o.groups;
  const std::size_t taps = static_cast<std::size_t>(cin_g) * k * k;
  const std::size_t pixels = os.plane();
  std::vector<T> cols;
  // Batch items are folded in ascending order.
  for (int n = 0; n < os.n; ++n) {
    for (int grp = 0; grp < o.groups; ++grp) {
      im2col(x, n, grp * cin_g, cin_g, k, o, os.h, os.w, cols);
      parallel_for(cout_g, [&](std::int64_t col) {
        const int co = grp * cout_g + static_cast<int>(col);
        const T* gp = g.plane(n, co);
        T* dr = dw.ptr() + co * taps;
        for (std::size_t r = 0; r < taps; ++r) dr[r] += dot(gp, cols.data() + r * pixels, pixels);
      });
    }
  }
}

// ---------------------------------------------------------------------------
// Depthwise stride-1 convolution (large-kernel hot path).

template <typename T>
void depthwise_forward(const Array4<T>& x, const Array4<T>& w, const Array4<T>* bias,
                       int padding, Array4<T>& out) {
  const Shape4& xs = x.shape();
  const Shape4& os = out.shape();
  const int k = w.shape().h;
  parallel_for(static_cast<std::int64_t>(xs.n) * xs.c, [&](std::int64_t job) {
    const int n = static_cast<int>(job / xs.c);
    const int c = static_cast<int>(job % xs.c);
    const T* ip = x.plane(n, c);
    T* op = out.plane(n, c);
    std::fill(op, op + os.plane(), bias ? (*bias)[c] : T{0});
    const T* wk = w.ptr() + static_cast<std::size_t>(c) * k * k;
    for (int ky = 0; ky < k; ++ky) {
      const ColumnRange rows = valid_outputs(xs.h, os.h, 1, padding, ky);
      for (int kx = 0; kx < k; ++kx) {
        const T wv = wk[ky * k + kx];
        const ColumnRange cols = valid_outputs(xs.w, os.w, 1, padding, kx);
        for (int oy = rows.lo; oy <= rows.hi; ++oy) {
          const T* src = ip + static_cast<std::size_t>(oy - padding + ky) * xs.w - padding + kx;
          T* orow = op + static_cast<std::size_t>(oy) * os.w;
          for (int ox = cols.lo; ox <= cols.hi; ++ox) orow[ox] += wv * src[ox];
        }
      }
    }
  });
}

template <typename T>
void depthwise_backward(const Array4<T>& g, const Array4<T>& x, const Array4<T>& w,
                        int padding, Array4<T>* dx, Array4<T>* dw) {
  const Shape4& xs = x.shape();
  const Shape4& os = g.shape();
  const int k = w.shape().h;
  if (dx) {
    parallel_for(static_cast<std::int64_t>(xs.n) * xs.c, [&](std::int64_t job) {
      const int n = static_cast<int>(job / xs.c);
      const int c = static_cast<int>(job % xs.c);
      const T* gp = g.plane(n, c);
      T* dp = dx->plane(n, c);
      const T* wk = w.ptr() + static_cast<std::size_t>(c) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        const ColumnRange rows = valid_outputs(xs.h, os.h, 1, padding, ky);
        for (int kx = 0; kx < k; ++kx) {
          const T wv = wk[ky * k + kx];
          const ColumnRange cols = valid_outputs(xs.w, os.w, 1, padding, kx);
          for (int oy = rows.lo; oy <= rows.hi; ++oy) {
            T* dst = dp + static_cast<std::size_t>(oy - padding + ky) * xs.w - padding + kx;
            const T* grow = gp + static_cast<std::size_t>(oy) * os.w;
            for (int ox = cols.lo; ox <= cols.hi; ++ox) dst[ox] += wv * grow[ox];
          }
        }
      }
    });
  }
  if (dw) {
    parallel_for(xs.c, [&](std::int64_t c_) {
      const int c = static_cast<int>(c_);
      T* dk = dw->ptr() + static_cast<std::size_t>(c) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        const ColumnRange rows = valid_outputs(xs.h, os.h, 1, padding, ky);
        for (int kx = 0; kx < k; ++kx) {
          const ColumnRange cols = valid_outputs(xs.w, os.w, 1, padding, kx);
          T acc = 0;
          for (int n = 0; n < xs.n; ++n) {
            const T* ip = x.plane(n, c);
            const T* gp = g.plane(n, c);
            for (int oy = rows.lo; oy <= rows.hi; ++oy) {
              const T* src = ip + static_cast<std::size_t>(oy - padding + ky) * xs.w - padding + kx;
              const T* grow = gp + static_cast<std::size_t>(oy) * os.w;
              acc += dot(grow + cols.lo, src + cols.lo, cols.hi - cols.lo + 1);
            }
          }
          dk[ky * k + kx] += acc;
        }
      }
    });
  }
}

}  // namespace

int conv_output_size(int in, int kernel, int stride, int padding) {
  if (stride < 1) throw ShapeError("convolution stride must be >= 1");
  const int span = in + 2 * padding - kernel;
  if (span < 0) {
    throw ShapeError("kernel " + std::to_string(kernel) + " larger than padded input " +
                     std::to_string(in + 2 * padding));
  }
  return span / stride + 1;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 ConvOptions o) {
  const Shape4 xs = x.shape();
  const Shape4 ws = weight.shape();
  if (o.groups < 1 || xs.c % o.groups != 0 || ws.n % o.groups != 0) {
    throw ShapeError("conv2d: channels in=" + std::to_string(xs.c) + " out=" +
                     std::to_string(ws.n) + " not divisible by groups=" +
                     std::to_string(o.groups));
  }
  if (ws.c != xs.c / o.groups || ws.h != ws.w) {
    throw ShapeError("conv2d: weight shape " + ws.str() + " inconsistent with input " +
                     xs.str() + " and groups=" + std::to_string(o.groups));
  }
  check_bias(bias, ws.n, "conv2d");
  const Shape4 os{xs.n, ws.n, conv_output_size(xs.h, ws.h, o.stride, o.padding),
                  conv_output_size(xs.w, ws.w, o.stride, o.padding)};
  Array4<T> out(os);
  conv_forward(x.value(), weight.value(), bias.defined() ? &bias.value() : nullptr, o, out);
  return make_result<T>(std::move(out), "conv2d", {x, weight, bias},
                        [x, weight, bias, o](Node<T>& self) mutable {
                          const Array4<T>& g = self.grad;
                          if (x.requires_grad()) {
                            conv_backward_input(g, weight.value(), o, x.grad_buffer());
                          }
                          if (weight.requires_grad()) {
                            conv_backward_weight(g, x.value(), o, weight.grad_buffer());
                          }
                          if (bias.defined() && bias.requires_grad()) {
                            accumulate_bias_grad(g, bias.grad_buffer());
                          }
                        });
}

template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                           const Tensor<T>& bias, int padding) {
  const Shape4 xs = x.shape();
  const Shape4 ws = weight.shape();
  if (ws.n != xs.c || ws.c != 1 || ws.h != ws.w) {
    throw ShapeError("depthwise_conv2d: weight shape " + ws.str() +
                     " needs one square kernel per channel of input " + xs.str());
  }
  check_bias(bias, xs.c, "depthwise_conv2d");
  const Shape4 os{xs.n, xs.c, conv_output_size(xs.h, ws.h, 1, padding),
                  conv_output_size(xs.w, ws.w, 1, padding)};
  Array4<T> out(os);
  depthwise_forward(x.value(), weight.value(), bias.defined() ? &bias.value() : nullptr,
                    padding, out);
  return make_result<T>(
      std::move(out), "depthwise_conv2d", {x, weight, bias},
      [x, weight, bias, padding](Node<T>& self) mutable {
        depthwise_backward(self.grad, x.value(), weight.value(), padding,
                           x.requires_grad() ? &x.grad_buffer() : nullptr,
                           weight.requires_grad() ? &weight.grad_buffer() : nullptr);
        if (bias.defined() && bias.requires_grad()) {
          accumulate_bias_grad(self.grad, bias.grad_buffer());
        }
      });
}

template <typename T>
Tensor<T> pointwise_conv(const Tensor<T>& x, const Tensor<T>& weight,
                         const Tensor<T>& bias) {
  const Shape4 xs = x.shape();
  const Shape4 ws = weight.shape();
  if (ws.c != xs.c || ws.h != 1 || ws.w != 1) {
    throw ShapeError("pointwise_conv: weight shape " + ws.str() +
                     " incompatible with input " + xs.str());
  }
  check_bias(bias, ws.n, "pointwise_conv");
  const int cin = xs.c;
  const int cout = ws.n;
  const std::size_t plane = xs.plane();
  Array4<T> out(Shape4{xs.n, cout, xs.h, xs.w});
  {
    const Array4<T>& xv = x.value();
    const Array4<T>& wv = weight.value();
    const Array4<T>* bv = bias.defined() ? &bias.value() : nullptr;
    parallel_for(static_cast<std::int64_t>(xs.n) * cout, [&](std::int64_t job) {
      const int n = static_cast<int>(job / cout);
      const int co = static_cast<int>(job % cout);
      T* op = out.plane(n, co);
      std::fill(op, op + plane, bv ? (*bv)[co] : T{0});
      for (int ci = 0; ci < cin; ++ci) {
        const T wc = wv[static_cast<std::size_t>(co) * cin + ci];
        const T* ip = xv.plane(n, ci);
        for (std::size_t i = 0; i < plane; ++i) op[i] += wc * ip[i];
      }
    });
  }
  return make_result<T>(
      std::move(out), "pointwise_conv", {x, weight, bias},
      [x, weight, bias, cin, cout, plane](Node<T>& self) mutable {
        const Array4<T>& g = self.grad;
        const int batch = g.shape().n;
        if (x.requires_grad()) {
          Array4<T>& dx = x.grad_buffer();
          const Array4<T>& wv = weight.value();
          parallel_for(static_cast<std::int64_t>(batch) * cin, [&](std::int64_t job) {
            const int n = static_cast<int>(job / cin);
            const int ci = static_cast<int>(job % cin);
            T* dp = dx.plane(n, ci);
            for (int co = 0; co < cout; ++co) {
              const T wc = wv[static_cast<std::size_t>(co) * cin + ci];
              const T* gp = g.plane(n, co);
              for (std::size_t i = 0; i < plane; ++i) dp[i] += wc * gp[i];
            }
          });
        }
        if (weight.requires_grad()) {
          Array4<T>& dw = weight.grad_buffer();
          const Array4<T>& xv = x.value();
          parallel_for(cout, [&](std::int64_t co) {
            for (int ci = 0; ci < cin; ++ci) {
              T acc = 0;
              for (int n = 0; n < batch; ++n) {
                const T* gp = g.plane(n, static_cast<int>(co));
                const T* ip = xv.plane(n, ci);
                acc += dot(gp, ip, plane);
              }
              dw[static_cast<std::size_t>(co) * cin + ci] += acc;
            }
          });
        }
        if (bias.defined() && bias.requires_grad()) {
          accumulate_bias_grad(g, bias.grad_buffer());
        }
      });
}

template <typename T>
Tensor<T> conv_transpose2x2(const Tensor<T>& x, const Tensor<T>& weight,
                            const Tensor<T>& bias) {
  const Shape4 xs = x.shape();
  const Shape4 ws = weight.shape();
  if (ws.n != xs.c || ws.h != 2 || ws.w != 2) {
    throw ShapeError("conv_transpose2x2: weight shape " + ws.str() +
                     " incompatible with input " + xs.str());
  }
  const int cin = xs.c;
  const int cout = ws.c;
  check_bias(bias, cout, "conv_transpose2x2");
  const Shape4 os{xs.n, cout, xs.h * 2, xs.w * 2};
  Array4<T> out(os);
  {
    const Array4<T>& xv = x.value();
    const Array4<T>& wv = weight.value();
    const Array4<T>* bv = bias.defined() ? &bias.value() : nullptr;
    parallel_for(static_cast<std::int64_t>(xs.n) * cout, [&](std::int64_t job) {
      const int n = static_cast<int>(job / cout);
      const int co = static_cast<int>(job % cout);
      T* op = out.plane(n, co);
      std::fill(op, op + os.plane(), bv ? (*bv)[co] : T{0});
      for (int ci = 0; ci < cin; ++ci) {
        const T* ip = xv.plane(n, ci);
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) {
            const T wc = wv[((static_cast<std::size_t>(ci) * cout + co) * 2 + a) * 2 + b];
            for (int y = 0; y < xs.h; ++y) {
              T* orow = op + static_cast<std::size_t>(2 * y + a) * os.w + b;
              const T* irow = ip + static_cast<std::size_t>(y) * xs.w;
              for (int xx = 0; xx < xs.w; ++xx) orow[2 * xx] += wc * irow[xx];
            }
          }
        }
      }
    });
  }
  return make_result<T>(
      std::move(out), "conv_transpose2x2", {x, weight, bias},
      [x, weight, bias, cin, cout](Node<T>& self) mutable {
        const Array4<T>& g = self.grad;
        const Shape4 xs = x.shape();
        const int ow = xs.w * 2;
        if (x.requires_grad()) {
          Array4<T>& dx = x.grad_buffer();
          const Array4<T>& wv = weight.value();
          parallel_for(static_cast<std::int64_t>(xs.n) * cin, [&](std::int64_t job) {
            const int n = static_cast<int>(job / cin);
            const int ci = static_cast<int>(job % cin);
            T* dp = dx.plane(n, ci);
            for (int co = 0; co < cout; ++co) {
              const T* gp = g.plane(n, co);
              for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) {
                  const T wc = wv[((static_cast<std::size_t>(ci) * cout + co) * 2 + a) * 2 + b];
                  for (int y = 0; y < xs.h; ++y) {
                    const T* grow = gp + static_cast<std::size_t>(2 * y + a) * ow + b;
                    T* drow = dp + static_cast<std::size_t>(y) * xs.w;
                    for (int xx = 0; xx < xs.w; ++xx) drow[xx] += wc * grow[2 * xx];
                  }
                }
              }
            }
          });
        }
        if (weight.requires_grad()) {
          Array4<T>& dw = weight.grad_buffer();
          const Array4<T>& xv = x.value();
          parallel_for(cin, [&](std::int64_t ci_) {
            const int ci = static_cast<int>(ci_);
            for (int co = 0; co < cout; ++co) {
              for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) {
                  T acc = 0;
                  for (int n = 0; n < xs.n; ++n) {
                    const T* ip = xv.plane(n, ci);
                    const T* gp = g.plane(n, co);
                    for (int y = 0; y < xs.h; ++y) {
                      const T* grow = gp + static_cast<std::size_t>(2 * y + a) * ow + b;
                      const T* irow = ip + static_cast<std::size_t>(y) * xs.w;
                      acc += detail::dot_strided(irow, grow, xs.w, 2);
                    }
                  }
                  dw[((static_cast<std::size_t>(ci) * cout + co) * 2 + a) * 2 + b] += acc;
                }
              }
            }
          });
        }
        if (bias.defined() && bias.requires_grad()) {
          accumulate_bias_grad(g, bias.grad_buffer());
        }
      });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  const Array4<T>& xv = x.value();
  Array4<T> out(xv.shape());
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  for (std::size_t i = 0; i < xv.numel(); ++i) {
    out[i] = T(0.5) * xv[i] * (T(1) + std::erf(xv[i] * inv_sqrt2));
  }
  return make_result<T>(std::move(out), "gelu", {x}, [x, inv_sqrt2](Node<T>& self) mutable {
    if (!x.requires_grad()) return;
    const Array4<T>& xv = x.value();
    Array4<T>& dx = x.grad_buffer();
    const T inv_sqrt_2pi = inv_sqrt2 * std::numbers::inv_sqrtpi_v<T>;
    for (std::size_t i = 0; i < xv.numel(); ++i) {
      const T v = xv[i];
      const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
      dx[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Array4<T> out = a.value();
  const Array4<T>& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  return make_result<T>(std::move(out), "add", {a, b}, [a, b](Node<T>& self) mutable {
    for (const Tensor<T>* t : {&a, &b}) {
      if (!t->requires_grad()) continue;
      Array4<T>& d = t->grad_buffer();
      for (std::size_t i = 0; i < d.numel(); ++i) d[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Array4<T> out = a.value();
  const Array4<T>& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  return make_result<T>(std::move(out), "mul", {a, b}, [a, b](Node<T>& self) mutable {
    if (a.requires_grad()) {
      Array4<T>& d = a.grad_buffer();
      const Array4<T>& other = b.value();
      for (std::size_t i = 0; i < d.numel(); ++i) d[i] += self.grad[i] * other[i];
    }
    if (b.requires_grad()) {
      Array4<T>& d = b.grad_buffer();
      const Array4<T>& other = a.value();
      for (std::size_t i = 0; i < d.numel(); ++i) d[i] += self.grad[i] * other[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  Array4<T> out = x.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= factor;
  return make_result<T>(std::move(out), "scale", {x}, [x, factor](Node<T>& self) mutable {
    if (!x.requires_grad()) return;
    Array4<T>& d = x.grad_buffer();
    for (std::size_t i = 0; i < d.numel(); ++i) d[i] += factor * self.grad[i];
  });
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape4 as = a.shape();
  const Shape4 bs = b.shape();
  if (as.n != bs.n || as.h != bs.h || as.w != bs.w) {
    throw ShapeError("concat_channels: " + as.str() + " and " + bs.str() +
                     " differ outside the channel axis");
  }
  Array4<T> out(Shape4{as.n, as.c + bs.c, as.h, as.w});
  const std::size_t plane = as.plane();
  for (int n = 0; n < as.n; ++n) {
    std::copy_n(a.value().plane(n, 0), plane * as.c, out.plane(n, 0));
    std::copy_n(b.value().plane(n, 0), plane * bs.c, out.plane(n, as.c));
  }
  return make_result<T>(std::move(out), "concat_channels", {a, b},
                        [a, b, plane](Node<T>& self) mutable {
                          const Shape4 as = a.shape();
                          const Shape4 bs = b.shape();
                          for (int n = 0; n < as.n; ++n) {
                            if (a.requires_grad()) {
                              T* d = a.grad_buffer().plane(n, 0);
                              const T* g = self.grad.plane(n, 0);
                              for (std::size_t i = 0; i < plane * as.c; ++i) d[i] += g[i];
                            }
                            if (b.requires_grad()) {
                              T* d = b.grad_buffer().plane(n, 0);
                              const T* g = self.grad.plane(n, as.c);
                              for (std::size_t i = 0; i < plane * bs.c; ++i) d[i] += g[i];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int begin, int count) {
  const Shape4 xs = x.shape();
  if (begin < 0 || count < 0 || begin + count > xs.c) {
    throw ShapeError("slice_channels: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + std::to_string(xs.c) +
                     " channels");
  }
  Array4<T> out(Shape4{xs.n, count, xs.h, xs.w});
  const std::size_t len = xs.plane() * count;
  for (int n = 0; n < xs.n; ++n) {
    std::copy_n(x.value().plane(n, begin), len, out.plane(n, 0));
  }
  return make_result<T>(std::move(out), "slice_channels", {x},
                        [x, begin, len](Node<T>& self) mutable {
                          if (!x.requires_grad()) return;
                          Array4<T>& d = x.grad_buffer();
                          for (int n = 0; n < d.shape().n; ++n) {
                            T* dp = d.plane(n, begin);
                            const T* g = self.grad.plane(n, 0);
                            for (std::size_t i = 0; i < len; ++i) dp[i] += g[i];
                          }
                        });
}

template <typename T>
Tensor<T> softmax_over_group(const Tensor<T>& x, int group_size) {
  const Shape4 xs = x.shape();
  if (group_size < 1 || xs.c % group_size != 0) {
    throw ShapeError("softmax_over_group: " + std::to_string(xs.c) +
                     " channels not divisible by group size " + std::to_string(group_size));
  }
  const int groups = xs.c / group_size;
  const std::size_t plane = xs.plane();
  Array4<T> out(xs);
  const Array4<T>& xv = x.value();
  parallel_for(static_cast<std::int64_t>(xs.n) * groups, [&](std::int64_t job) {
    const int n = static_cast<int>(job / groups);
    const int g = static_cast<int>(job % groups);
    for (std::size_t p = 0; p < plane; ++p) {
      T peak = xv.plane(n, g * group_size)[p];
      for (int k = 1; k < group_size; ++k) peak = std::max(peak, xv.plane(n, g * group_size + k)[p]);
      T total = 0;
      for (int k = 0; k < group_size; ++k) {
        const T e = std::exp(xv.plane(n, g * group_size + k)[p] - peak);
        out.plane(n, g * group_size + k)[p] = e;
        total += e;
      }
      for (int k = 0; k < group_size; ++k) out.plane(n, g * group_size + k)[p] /= total;
    }
  });
  auto probs = std::make_shared<Array4<T>>(out);
  return make_result<T>(
      std::move(out), "softmax_over_group", {x},
      [x, probs, group_size, groups, plane](Node<T>& self) mutable {
        if (!x.requires_grad()) return;
        Array4<T>& dx = x.grad_buffer();
        const Array4<T>& y = *probs;
        const Array4<T>& g = self.grad;
        parallel_for(static_cast<std::int64_t>(y.shape().n) * groups, [&](std::int64_t job) {
          const int n = static_cast<int>(job / groups);
          const int gr = static_cast<int>(job % groups);
          for (std::size_t p = 0; p < plane; ++p) {
            T dot = 0;
            for (int k = 0; k < group_size; ++k) {
              const int c = gr * group_size + k;
              dot += y.plane(n, c)[p] * g.plane(n, c)[p];
            }
            for (int k = 0; k < group_size; ++k) {
              const int c = gr * group_size + k;
              dx.plane(n, c)[p] += y.plane(n, c)[p] * (g.plane(n, c)[p] - dot);
            }
          }
        });
      });
}

template <typename T>
Tensor<T> layer_norm_channels(const Tensor<T>& x, const Tensor<T>& gamma,
                              const Tensor<T>& beta, T eps) {
  const Shape4 xs = x.shape();
  const Shape4 ps{1, xs.c, 1, 1};
  if (!(gamma.shape() == ps) || !(beta.shape() == ps)) {
    throw ShapeError("layer_norm_channels: affine parameters must be " + ps.str());
  }
  const std::size_t plane = xs.plane();
  const int channels = xs.c;
  auto xhat = std::make_shared<Array4<T>>(xs);
  auto rstd = std::make_shared<Array4<T>>(Shape4{xs.n, 1, xs.h, xs.w});
  Array4<T> out(xs);
  const Array4<T>& xv = x.value();
  const Array4<T>& gv = gamma.value();
  const Array4<T>& bv = beta.value();
  parallel_for(xs.n, [&](std::int64_t n_) {
    const int n = static_cast<int>(n_);
    std::vector<T> mean(plane, T{0});
    std::vector<T> var(plane, T{0});
    for (int c = 0; c < channels; ++c) {
      const T* ip = xv.plane(n, c);
      for (std::size_t p = 0; p < plane; ++p) mean[p] += ip[p];
    }
    for (std::size_t p = 0; p < plane; ++p) mean[p] /= channels;
    for (int c = 0; c < channels; ++c) {
      const T* ip = xv.plane(n, c);
      for (std::size_t p = 0; p < plane; ++p) {
        const T d = ip[p] - mean[p];
        var[p] += d * d;
      }
    }
    T* rp = rstd->plane(n, 0);
    for (std::size_t p = 0; p < plane; ++p) rp[p] = T(1) / std::sqrt(var[p] / channels + eps);
    for (int c = 0; c < channels; ++c) {
      const T* ip = xv.plane(n, c);
      T* hp = xhat->plane(n, c);
      T* op = out.plane(n, c);
      for (std::size_t p = 0; p < plane; ++p) {
        hp[p] = (ip[p] - mean[p]) * rp[p];
        op[p] = hp[p] * gv[c] + bv[c];
      }
    }
  });
  return make_result<T>(
      std::move(out), "layer_norm_channels", {x, gamma, beta},
      [x, gamma, beta, xhat, rstd, plane, channels](Node<T>& self) mutable {
        const Array4<T>& g = self.grad;
        const int batch = g.shape().n;
        if (x.requires_grad()) {
          Array4<T>& dx = x.grad_buffer();
          const Array4<T>& gv = gamma.value();
          parallel_for(batch, [&](std::int64_t n_) {
            const int n = static_cast<int>(n_);
            std::vector<T> mean_g(plane, T{0});
            std::vector<T> mean_gx(plane, T{0});
            for (int c = 0; c < channels; ++c) {
              const T* gp = g.plane(n, c);
              const T* hp = xhat->plane(n, c);
              for (std::size_t p = 0; p < plane; ++p) {
                const T gh = gp[p] * gv[c];
                mean_g[p] += gh;
                mean_gx[p] += gh * hp[p];
              }
            }
            const T* rp = rstd->plane(n, 0);
            for (int c = 0; c < channels; ++c) {
              const T* gp = g.plane(n, c);
              const T* hp = xhat->plane(n, c);
              T* dp = dx.plane(n, c);
              for (std::size_t p = 0; p < plane; ++p) {
                const T gh = gp[p] * gv[c];
                dp[p] += rp[p] * (gh - mean_g[p] / channels - hp[p] * mean_gx[p] / channels);
              }
            }
          });
        }
        if (gamma.requires_grad() || beta.requires_grad()) {
          Array4<T>* dgamma = gamma.requires_grad() ? &gamma.grad_buffer() : nullptr;
          Array4<T>* dbeta = beta.requires_grad() ? &beta.grad_buffer() : nullptr;
          parallel_for(channels, [&](std::int64_t c_) {
            const int c = static_cast<int>(c_);
            T sg = 0;
            T sb = 0;
            for (int n = 0; n < batch; ++n) {
              const T* gp = g.plane(n, c);
              const T* hp = xhat->plane(n, c);
              for (std::size_t p = 0; p < plane; ++p) {
                sg += gp[p] * hp[p];
                sb += gp[p];
              }
            }
            if (dgamma) (*dgamma)[c] += sg;
            if (dbeta) (*dbeta)[c] += sb;
          });
        }
      });
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& prediction, const Tensor<T>& target) {
  require_same_shape(prediction.shape(), target.shape(), "mse_loss");
  const Array4<T>& p = prediction.value();
  const Array4<T>& t = target.value();
  T acc = 0;
  for (std::size_t i = 0; i < p.numel(); ++i) {
    const T d = p[i] - t[i];
    acc += d * d;
  }
  const T count = static_cast<T>(p.numel());
  Array4<T> out(Shape4{1, 1, 1, 1}, acc / count);
  return make_result<T>(std::move(out), "mse_loss", {prediction, target},
                        [prediction, target, count](Node<T>& self) mutable {
                          const T g = self.grad[0] * T(2) / count;
                          const Array4<T>& p = prediction.value();
                          const Array4<T>& t = target.value();
                          if (prediction.requires_grad()) {
                            Array4<T>& d = prediction.grad_buffer();
                            for (std::size_t i = 0; i < d.numel(); ++i) d[i] += g * (p[i] - t[i]);
                          }
                          if (target.requires_grad()) {
                            Array4<T>& d = target.grad_buffer();
                            for (std::size_t i = 0; i < d.numel(); ++i) d[i] -= g * (p[i] - t[i]);
                          }
                        });
}

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& prediction, const Tensor<T>& target) {
  require_same_shape(prediction.shape(), target.shape(), "l1_loss");
  const Array4<T>& p = prediction.value();
  const Array4<T>& t = target.value();
  T acc = 0;
  for (std::size_t i = 0; i < p.numel(); ++i) acc += std::abs(p[i] - t[i]);
  const T count = static_cast<T>(p.numel());
  Array4<T> out(Shape4{1, 1, 1, 1}, acc / count);
  return make_result<T>(std::move(out), "l1_loss", {prediction, target},
                        [prediction, target, count](Node<T>& self) mutable {
                          const T g = self.grad[0] / count;
                          const Array4<T>& p = prediction.value();
                          const Array4<T>& t = target.value();
                          auto sign = [](T v) { return T((v > 0) - (v < 0)); };
                          if (prediction.requires_grad()) {
                            Array4<T>& d = prediction.grad_buffer();
                            for (std::size_t i = 0; i < d.numel(); ++i) d[i] += g * sign(p[i] - t[i]);
                          }
                          if (target.requires_grad()) {
                            Array4<T>& d = target.grad_buffer();
                            for (std::size_t i = 0; i < d.numel(); ++i) d[i] -= g * sign(p[i] - t[i]);
                          }
                        });
}

template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, const Array4<T>& weights) {
  require_same_shape(x.shape(), weights.shape(), "weighted_sum");
  T acc = 0;
  for (std::size_t i = 0; i < weights.numel(); ++i) acc += x.value()[i] * weights[i];
  Array4<T> out(Shape4{1, 1, 1, 1}, acc);
  return make_result<T>(std::move(out), "weighted_sum", {x}, [x, weights](Node<T>& self) mutable {
    if (!x.requires_grad()) return;
    Array4<T>& d = x.grad_buffer();
    for (std::size_t i = 0; i < d.numel(); ++i) d[i] += self.grad[0] * weights[i];
  });
}

#define CFSDCN_INSTANTIATE_OPS(T)                                                          \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,          \
                            ConvOptions);                                                  \
  template Tensor<T> depthwise_conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                      int);                                                \
  template Tensor<T> pointwise_conv(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> conv_transpose2x2(const Tensor<T>&, const Tensor<T>&,                 \
                                       const Tensor<T>&);                                  \
  template Tensor<T> gelu(const Tensor<T>&);                                               \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> scale(const Tensor<T>&, T);                                           \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> slice_channels(const Tensor<T>&, int, int);                           \
  template Tensor<T> softmax_over_group(const Tensor<T>&, int);                            \
  template Tensor<T> layer_norm_channels(const Tensor<T>&, const Tensor<T>&,               \
                                         const Tensor<T>&, T);                             \
  template Tensor<T> mse_loss(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> l1_loss(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> weighted_sum(const Tensor<T>&, const Array4<T>&);

CFSDCN_INSTANTIATE_OPS(float)
CFSDCN_INSTANTIATE_OPS(double)

}  // namespace cfsdcn
