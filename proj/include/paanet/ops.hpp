#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "paanet/gemm.hpp"
#include "paanet/graph.hpp"
#include "paanet/tensor.hpp"

namespace paanet {

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

template <typename T>
void require_finite(const TensorT<T>& t, const char* op, const char* arg) {
  if (!all_finite(t))
    throw std::invalid_argument(std::string(op) + ": non-finite values in " + arg);
}

template <typename T>
void require_rank4(const TensorT<T>& t, const char* op, const char* arg) {
  require(t.defined() && t.rank() == 4, std::string(op) + ": " + arg + " must be rank 4");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d: cross-correlation (no kernel flip) with square kernel, zero padding.
// input [N,Cin,H,W], weight [Cout,Cin,k,k], bias [Cout].
template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight, const TensorT<T>& bias,
                  int stride, int padding) {
  using detail::require;
  detail::require_rank4(input, "conv2d", "input");
  detail::require_rank4(weight, "conv2d", "weight");
  const int n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  require(weight.dim(1) == cin, "conv2d: weight expects " + std::to_string(weight.dim(1)) +
                                    " input channels, input has " + std::to_string(cin));
  require(bias.defined() && bias.numel() == cout,
          "conv2d: bias must have one value per output channel");
  require(kh >= 1 && kw >= 1, "conv2d: kernel extents must be >= 1");
  require(stride >= 1, "conv2d: stride must be >= 1");
  require(padding >= 0, "conv2d: padding must be >= 0");
  require(h + 2 * padding >= kh && w + 2 * padding >= kw,
          "conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
              " does not fit padded input " + detail::shape_str(input.shape()));
  detail::require_finite(input, "conv2d", "input");
  detail::require_finite(weight, "conv2d", "weight");
  detail::require_finite(bias, "conv2d", "bias");

  const int oh = (h + 2 * padding - kh) / stride + 1;
  const int ow = (w + 2 * padding - kw) / stride + 1;
  const std::int64_t ispat = static_cast<std::int64_t>(h) * w;
  const std::int64_t ospat = static_cast<std::int64_t>(oh) * ow;
  const std::int64_t krows = static_cast<std::int64_t>(cin) * kh * kw;

  TensorT<T> out({n, cout, oh, ow});
  {
    std::vector<T> col(static_cast<std::size_t>(krows * ospat));
    for (int i = 0; i < n; ++i) {
      detail::im2col(input.data() + i * cin * ispat, cin, h, w, kh, kw, stride, padding, oh, ow,
                     col.data());
      T* o = out.data() + i * cout * ospat;
      for (int co = 0; co < cout; ++co)
        std::fill(o + co * ospat, o + (co + 1) * ospat, bias.data()[co]);
      detail::gemm_nn(cout, ospat, krows, weight.data(), col.data(), o);
    }
  }

  detail::record<T>("conv2d", {&input, &weight, &bias}, out, [=]() {
    const std::vector<T>& go = out.ptr()->grad;
    const bool need_x = input.ptr()->tracked;
    const bool need_w = weight.ptr()->tracked;
    const bool need_b = bias.ptr()->tracked;
    if (need_x) detail::ensure_grad(input.ptr());
    if (need_w) detail::ensure_grad(weight.ptr());
    if (need_b) detail::ensure_grad(bias.ptr());
    std::vector<T> col((need_w) ? static_cast<std::size_t>(krows * ospat) : 0);
    std::vector<T> colg((need_x) ? static_cast<std::size_t>(krows * ospat) : 0);
    for (int i = 0; i < n; ++i) {
      const T* g = go.data() + i * cout * ospat;
      if (need_w) {
        detail::im2col(input.data() + i * cin * ispat, cin, h, w, kh, kw, stride, padding, oh, ow,
                       col.data());
        detail::gemm_nt(cout, krows, ospat, g, col.data(), weight.ptr()->grad.data());
      }
      if (need_x) {
        std::fill(colg.begin(), colg.end(), T(0));
        detail::gemm_tn(krows, ospat, cout, weight.data(), g, colg.data());
        detail::col2im_add(colg.data(), cin, h, w, kh, kw, stride, padding, oh, ow,
                           input.ptr()->grad.data() + i * cin * ispat);
      }
    }
    if (need_b) {
      for (int co = 0; co < cout; ++co) {
        double acc = 0;
        for (int i = 0; i < n; ++i) {
          const T* g = go.data() + (i * cout + co) * ospat;
          for (std::int64_t s = 0; s < ospat; ++s) acc += static_cast<double>(g[s]);
        }
        bias.ptr()->grad[static_cast<std::size_t>(co)] += static_cast<T>(acc);
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// transposed_conv2d: the Upscale role. Kernel 4x4, stride 2, padding 1 is the
// only accepted configuration; it doubles both spatial extents exactly and is
// the adjoint of the matching strided convolution. weight [Cin,Cout,4,4].
template <typename T>
TensorT<T> transposed_conv2d(const TensorT<T>& input, const TensorT<T>& weight,
                             const TensorT<T>& bias, int stride = 2, int padding = 1) {
  using detail::require;
  detail::require_rank4(input, "transposed_conv2d", "input");
  detail::require_rank4(weight, "transposed_conv2d", "weight");
  const int n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int cout = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
  require(weight.dim(0) == cin, "transposed_conv2d: weight expects " +
                                    std::to_string(weight.dim(0)) + " input channels, input has " +
                                    std::to_string(cin));
  require(kh == 4 && kw == 4 && stride == 2 && padding == 1,
          "transposed_conv2d: only the doubling configuration (kernel 4x4, stride 2, padding 1) "
          "is supported");
  require(bias.defined() && bias.numel() == cout,
          "transposed_conv2d: bias must have one value per output channel");
  detail::require_finite(input, "transposed_conv2d", "input");
  detail::require_finite(weight, "transposed_conv2d", "weight");
  detail::require_finite(bias, "transposed_conv2d", "bias");

  const int oh = 2 * h, ow = 2 * w;
  const std::int64_t ispat = static_cast<std::int64_t>(h) * w;
  const std::int64_t ospat = static_cast<std::int64_t>(oh) * ow;
  const std::int64_t krows = static_cast<std::int64_t>(cout) * kh * kw;

  TensorT<T> out({n, cout, oh, ow});
  {
    std::vector<T> tmp(static_cast<std::size_t>(krows * ispat));
    for (int i = 0; i < n; ++i) {
      T* o = out.data() + i * cout * ospat;
      for (int co = 0; co < cout; ++co)
        std::fill(o + co * ospat, o + (co + 1) * ospat, bias.data()[co]);
      std::fill(tmp.begin(), tmp.end(), T(0));
      detail::gemm_tn(krows, ispat, cin, weight.data(), input.data() + i * cin * ispat, tmp.data());
      detail::col2im_add(tmp.data(), cout, oh, ow, kh, kw, stride, padding, h, w, o);
    }
  }

  detail::record<T>("transposed_conv2d", {&input, &weight, &bias}, out, [=]() {
    const std::vector<T>& go = out.ptr()->grad;
    const bool need_x = input.ptr()->tracked;
    const bool need_w = weight.ptr()->tracked;
    const bool need_b = bias.ptr()->tracked;
    if (need_x) detail::ensure_grad(input.ptr());
    if (need_w) detail::ensure_grad(weight.ptr());
    if (need_b) detail::ensure_grad(bias.ptr());
    std::vector<T> col((need_x || need_w) ? static_cast<std::size_t>(krows * ispat) : 0);
    for (int i = 0; i < n; ++i) {
      const T* g = go.data() + i * cout * ospat;
      if (need_x || need_w)
        detail::im2col(g, cout, oh, ow, kh, kw, stride, padding, h, w, col.data());
      if (need_x)
        detail::gemm_nn(cin, ispat, krows, weight.data(), col.data(),
                        input.ptr()->grad.data() + i * cin * ispat);
      if (need_w)
        detail::gemm_nt(cin, krows, ispat, input.data() + i * cin * ispat, col.data(),
                        weight.ptr()->grad.data());
    }
    if (need_b) {
      for (int co = 0; co < cout; ++co) {
        double acc = 0;
        for (int i = 0; i < n; ++i) {
          const T* g = go.data() + (i * cout + co) * ospat;
          for (std::int64_t s = 0; s < ospat; ++s) acc += static_cast<double>(g[s]);
        }
        bias.ptr()->grad[static_cast<std::size_t>(co)] += static_cast<T>(acc);
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// concat_channels: stack [N,Ci,H,W] parts along the channel axis in argument
// order. Backward splits the gradient back per part.
template <typename T>
TensorT<T> concat_channels(const std::vector<TensorT<T>>& parts) {
  using detail::require;
  require(!parts.empty(), "concat_channels: empty part list");
  for (const auto& p : parts) detail::require_rank4(p, "concat_channels", "part");
  const int n = parts[0].dim(0), h = parts[0].dim(2), w = parts[0].dim(3);
  std::int64_t ctot = 0;
  for (const auto& p : parts) {
    require(p.dim(0) == n && p.dim(2) == h && p.dim(3) == w,
            "concat_channels: part shape " + detail::shape_str(p.shape()) +
                " does not match leading part " + detail::shape_str(parts[0].shape()));
    ctot += p.dim(1);
  }
  const std::int64_t spat = static_cast<std::int64_t>(h) * w;
  TensorT<T> out({n, static_cast<int>(ctot), h, w});
  for (int i = 0; i < n; ++i) {
    T* dst = out.data() + i * ctot * spat;
    for (const auto& p : parts) {
      const std::int64_t block = p.dim(1) * spat;
      std::copy_n(p.data() + i * block, block, dst);
      dst += block;
    }
  }
  detail::record_many<T>("concat_channels", parts, out, [=]() {
    const std::vector<T>& go = out.ptr()->grad;
    for (int i = 0; i < n; ++i) {
      const T* src = go.data() + i * ctot * spat;
      for (const auto& p : parts) {
        const std::int64_t block = p.dim(1) * spat;
        if (p.ptr()->tracked) {
          detail::ensure_grad(p.ptr());
          T* dst = p.ptr()->grad.data() + i * block;
          for (std::int64_t s = 0; s < block; ++s) dst[s] += src[s];
        }
        src += block;
      }
    }
  });
  return out;
}

// Extracts channels [c0, c1) as a new tensor. Inverse of concat_channels.
template <typename T>
TensorT<T> slice_channels(const TensorT<T>& x, int c0, int c1) {
  detail::require_rank4(x, "slice_channels", "input");
  detail::require(0 <= c0 && c0 < c1 && c1 <= x.dim(1),
                  "slice_channels: range [" + std::to_string(c0) + "," + std::to_string(c1) +
                      ") invalid for " + std::to_string(x.dim(1)) + " channels");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t spat = static_cast<std::int64_t>(h) * w;
  const int cs = c1 - c0;
  TensorT<T> out({n, cs, h, w});
  for (int i = 0; i < n; ++i)
    std::copy_n(x.data() + (static_cast<std::int64_t>(i) * c + c0) * spat, cs * spat,
                out.data() + static_cast<std::int64_t>(i) * cs * spat);
  detail::record<T>("slice_channels", {&x}, out, [=]() {
    detail::ensure_grad(x.ptr());
    const std::vector<T>& go = out.ptr()->grad;
    for (int i = 0; i < n; ++i) {
      const T* src = go.data() + static_cast<std::int64_t>(i) * cs * spat;
      T* dst = x.ptr()->grad.data() + (static_cast<std::int64_t>(i) * c + c0) * spat;
      for (std::int64_t s = 0; s < cs * spat; ++s) dst[s] += src[s];
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// mul_broadcast: gate [N,C,H,W] features by a single-channel [N,1,H,W] map.
// The map gradient sums over the channel axis.
template <typename T>
TensorT<T> mul_broadcast(const TensorT<T>& features, const TensorT<T>& map) {
  detail::require_rank4(features, "mul_broadcast", "features");
  detail::require_rank4(map, "mul_broadcast", "map");
  detail::require(map.dim(1) == 1, "mul_broadcast: map must have a single channel");
  detail::require(features.dim(0) == map.dim(0) && features.dim(2) == map.dim(2) &&
                      features.dim(3) == map.dim(3),
                  "mul_broadcast: features " + detail::shape_str(features.shape()) +
                      " vs map " + detail::shape_str(map.shape()) + "; resize the map first");
  const int n = features.dim(0), c = features.dim(1), h = features.dim(2), w = features.dim(3);
  const std::int64_t spat = static_cast<std::int64_t>(h) * w;
  TensorT<T> out(features.shape());
  for (int i = 0; i < n; ++i) {
    const T* m = map.data() + i * spat;
    for (int ch = 0; ch < c; ++ch) {
      const T* f = features.data() + (static_cast<std::int64_t>(i) * c + ch) * spat;
      T* o = out.data() + (static_cast<std::int64_t>(i) * c + ch) * spat;
      for (std::int64_t s = 0; s < spat; ++s) o[s] = f[s] * m[s];
    }
  }
  detail::record<T>("mul_broadcast", {&features, &map}, out, [=]() {
    const std::vector<T>& go = out.ptr()->grad;
    const bool need_f = features.ptr()->tracked;
    const bool need_m = map.ptr()->tracked;
    if (need_f) detail::ensure_grad(features.ptr());
    if (need_m) detail::ensure_grad(map.ptr());
    for (int i = 0; i < n; ++i) {
      const T* m = map.data() + i * spat;
      T* gm = need_m ? map.ptr()->grad.data() + i * spat : nullptr;
      for (int ch = 0; ch < c; ++ch) {
        const std::int64_t off = (static_cast<std::int64_t>(i) * c + ch) * spat;
        const T* g = go.data() + off;
        const T* f = features.data() + off;
        if (need_f) {
          T* gf = features.ptr()->grad.data() + off;
          for (std::int64_t s = 0; s < spat; ++s) gf[s] += g[s] * m[s];
        }
        if (need_m)
          for (std::int64_t s = 0; s < spat; ++s) gm[s] += g[s] * f[s];
      }
    }
  });
  return out;
}

// Elementwise product of equal-shape tensors.
template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  detail::require(a.shape() == b.shape(), "mul: shapes " + detail::shape_str(a.shape()) +
                                              " and " + detail::shape_str(b.shape()) + " differ");
  TensorT<T> out(a.shape());
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  detail::record<T>("mul", {&a, &b}, out, [=]() {
    const std::vector<T>& go = out.ptr()->grad;
    if (a.ptr()->tracked) {
      detail::ensure_grad(a.ptr());
      for (std::int64_t i = 0; i < n; ++i) a.ptr()->grad[i] += go[i] * b.data()[i];
    }
    if (b.ptr()->tracked) {
      detail::ensure_grad(b.ptr());
      for (std::int64_t i = 0; i < n; ++i) b.ptr()->grad[i] += go[i] * a.data()[i];
    }
  });
  return out;
}

// Elementwise sum of equal-shape tensors.
template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  detail::require(a.shape() == b.shape(), "add: shapes " + detail::shape_str(a.shape()) +
                                              " and " + detail::shape_str(b.shape()) + " differ");
  TensorT<T> out(a.shape());
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  detail::record<T>("add", {&a, &b}, out, [=]() {
    const std::vector<T>& go = out.ptr()->grad;
    for (const auto& t : {a, b}) {
      if (!t.ptr()->tracked) continue;
      detail::ensure_grad(t.ptr());
      for (std::int64_t i = 0; i < n; ++i) t.ptr()->grad[i] += go[i];
    }
  });
  return out;
}

// out = scale * x + shift, elementwise with scalar constants.
template <typename T>
TensorT<T> affine(const TensorT<T>& x, T scale, T shift) {
  TensorT<T> out(x.shape());
  const std::int64_t n = x.numel();
  for (std::int64_t i = 0; i < n; ++i) out.data()[i] = scale * x.data()[i] + shift;
  detail::record<T>("affine", {&x}, out, [=]() {
    detail::ensure_grad(x.ptr());
    const std::vector<T>& go = out.ptr()->grad;
    for (std::int64_t i = 0; i < n; ++i) x.ptr()->grad[i] += scale * go[i];
  });
  return out;
}

template <typename T>
TensorT<T> one_minus(const TensorT<T>& x) {
  return affine(x, T(-1), T(1));
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> out(x.shape());
  const std::int64_t n = x.numel();
  for (std::int64_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] > T(0) ? x.data()[i] : T(0);
  detail::record<T>("relu", {&x}, out, [=]() {
    detail::ensure_grad(x.ptr());
    const std::vector<T>& go = out.ptr()->grad;
    for (std::int64_t i = 0; i < n; ++i)
      if (x.data()[i] > T(0)) x.ptr()->grad[i] += go[i];
  });
  return out;
}

// Logistic squash. Outputs are clamped into the largest representable open
// interval (0,1) so downstream logs and gate inversions stay safe even where
// exp() saturates.
template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
  constexpr T lo = std::numeric_limits<T>::min();
  const T hi = T(1) - std::numeric_limits<T>::epsilon() / T(2);
  TensorT<T> out(x.shape());
  const std::int64_t n = x.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    const T v = x.data()[i];
    T s;
    if (v >= T(0)) {
      s = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      s = e / (T(1) + e);
    }
    out.data()[i] = std::min(hi, std::max(lo, s));
  }
  detail::record<T>("sigmoid", {&x}, out, [=]() {
    detail::ensure_grad(x.ptr());
    const std::vector<T>& go = out.ptr()->grad;
    for (std::int64_t i = 0; i < n; ++i) {
      const T y = out.data()[i];
      x.ptr()->grad[i] += go[i] * y * (T(1) - y);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// resize_bilinear: half-pixel-center sampling, clamped at the borders.
// Identity (bitwise) when the target size equals the source size.
template <typename T>
TensorT<T> resize_bilinear(const TensorT<T>& x, int out_h, int out_w) {
  detail::require_rank4(x, "resize_bilinear", "input");
  detail::require(out_h >= 1 && out_w >= 1, "resize_bilinear: target extents must be >= 1");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);

  if (out_h == h && out_w == w) {
    TensorT<T> out(x.shape(), x.values());
    detail::record<T>("resize_bilinear", {&x}, out, [=]() {
      detail::ensure_grad(x.ptr());
      const std::vector<T>& go = out.ptr()->grad;
      for (std::size_t i = 0; i < go.size(); ++i) x.ptr()->grad[i] += go[i];
    });
    return out;
  }

  // Per-axis sample tables: source indices i0/i1 and the i1 weight.
  std::vector<int> y0(out_h), y1(out_h), x0(out_w), x1(out_w);
  std::vector<T> wy(out_h), wx(out_w);
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int oy = 0; oy < out_h; ++oy) {
    double p = (oy + 0.5) * sy - 0.5;
    p = std::min(std::max(p, 0.0), static_cast<double>(h - 1));
    y0[oy] = static_cast<int>(p);
    y1[oy] = std::min(y0[oy] + 1, h - 1);
    wy[oy] = static_cast<T>(p - y0[oy]);
  }
  for (int ox = 0; ox < out_w; ++ox) {
    double p = (ox + 0.5) * sx - 0.5;
    p = std::min(std::max(p, 0.0), static_cast<double>(w - 1));
    x0[ox] = static_cast<int>(p);
    x1[ox] = std::min(x0[ox] + 1, w - 1);
    wx[ox] = static_cast<T>(p - x0[ox]);
  }

  TensorT<T> out({n, c, out_h, out_w});
  const std::int64_t ispat = static_cast<std::int64_t>(h) * w;
  const std::int64_t ospat = static_cast<std::int64_t>(out_h) * out_w;
  for (std::int64_t plane = 0; plane < static_cast<std::int64_t>(n) * c; ++plane) {
    const T* src = x.data() + plane * ispat;
    T* dst = out.data() + plane * ospat;
    for (int oy = 0; oy < out_h; ++oy) {
      const T* r0 = src + static_cast<std::int64_t>(y0[oy]) * w;
      const T* r1 = src + static_cast<std::int64_t>(y1[oy]) * w;
      const T fy = wy[oy];
      T* drow = dst + static_cast<std::int64_t>(oy) * out_w;
      for (int ox = 0; ox < out_w; ++ox) {
        const T fx = wx[ox];
        const T top = r0[x0[ox]] * (T(1) - fx) + r0[x1[ox]] * fx;
        const T bot = r1[x0[ox]] * (T(1) - fx) + r1[x1[ox]] * fx;
        drow[ox] = top * (T(1) - fy) + bot * fy;
      }
    }
  }

  detail::record<T>("resize_bilinear", {&x}, out, [=]() {
    detail::ensure_grad(x.ptr());
    const std::vector<T>& go = out.ptr()->grad;
    T* gx = x.ptr()->grad.data();
    for (std::int64_t plane = 0; plane < static_cast<std::int64_t>(n) * c; ++plane) {
      T* g0 = gx + plane * ispat;
      const T* grow = go.data() + plane * ospat;
      for (int oy = 0; oy < out_h; ++oy) {
        const T fy = wy[oy];
        for (int ox = 0; ox < out_w; ++ox) {
          const T g = grow[static_cast<std::int64_t>(oy) * out_w + ox];
          const T fx = wx[ox];
          g0[static_cast<std::int64_t>(y0[oy]) * w + x0[ox]] += g * (T(1) - fy) * (T(1) - fx);
          g0[static_cast<std::int64_t>(y0[oy]) * w + x1[ox]] += g * (T(1) - fy) * fx;
          g0[static_cast<std::int64_t>(y1[oy]) * w + x0[ox]] += g * fy * (T(1) - fx);
          g0[static_cast<std::int64_t>(y1[oy]) * w + x1[ox]] += g * fy * fx;
        }
      }
    }
  });
  return out;
}

// Sum of all elements as a rank-1 scalar tensor. Accumulated in double.
template <typename T>
TensorT<T> sum(const TensorT<T>& x) {
  double acc = 0;
  for (const T v : x.values()) acc += static_cast<double>(v);
  TensorT<T> out = TensorT<T>::scalar(static_cast<T>(acc));
  const std::int64_t n = x.numel();
  detail::record<T>("sum", {&x}, out, [=]() {
    detail::ensure_grad(x.ptr());
    const T g = out.ptr()->grad[0];
    for (std::int64_t i = 0; i < n; ++i) x.ptr()->grad[i] += g;
  });
  return out;
}

}  // namespace paanet
