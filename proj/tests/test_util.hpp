#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "paanet/rng.hpp"
#include "paanet/tensor.hpp"

namespace testutil {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::string sub(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

template <typename T>
paanet::TensorT<T> random_tensor(std::vector<int> shape, paanet::Rng& rng, double lo = -1.0,
                                 double hi = 1.0) {
  paanet::TensorT<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
paanet::TensorT<T> random_tensor(std::vector<int> shape, paanet::Rng&& rng, double lo = -1.0,
                                 double hi = 1.0) {
  return random_tensor<T>(std::move(shape), rng, lo, hi);
}

// -------------------------------------------------------------------------
// Independent oracles. These deliberately use naive nested loops and stay
// decoupled from the library's im2col/gemm path.

// Direct cross-correlation.
template <typename T>
std::vector<T> conv2d_ref(const std::vector<T>& x, int n, int cin, int h, int w,
                          const std::vector<T>& wt, int cout, int kh, int kw,
                          const std::vector<T>& bias, int stride, int pad) {
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (w + 2 * pad - kw) / stride + 1;
  std::vector<T> out(static_cast<std::size_t>(n) * cout * oh * ow, T(0));
  for (int i = 0; i < n; ++i)
    for (int co = 0; co < cout; ++co)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = static_cast<double>(bias[co]);
          for (int ci = 0; ci < cin; ++ci)
            for (int u = 0; u < kh; ++u)
              for (int v = 0; v < kw; ++v) {
                const int iy = oy * stride - pad + u;
                const int ix = ox * stride - pad + v;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += static_cast<double>(x[((static_cast<std::size_t>(i) * cin + ci) * h + iy) * w + ix]) *
                       static_cast<double>(wt[((static_cast<std::size_t>(co) * cin + ci) * kh + u) * kw + v]);
              }
          out[((static_cast<std::size_t>(i) * cout + co) * oh + oy) * ow + ox] = static_cast<T>(acc);
        }
  return out;
}

// Scatter-accumulate transposed convolution, kernel 4x4, stride 2, padding 1.
template <typename T>
std::vector<T> tconv2d_ref(const std::vector<T>& x, int n, int cin, int h, int w,
                           const std::vector<T>& wt, int cout, const std::vector<T>& bias) {
  const int oh = 2 * h, ow = 2 * w;
  std::vector<T> out(static_cast<std::size_t>(n) * cout * oh * ow, T(0));
  for (int i = 0; i < n; ++i)
    for (int co = 0; co < cout; ++co)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
          out[((static_cast<std::size_t>(i) * cout + co) * oh + oy) * ow + ox] = bias[co];
  for (int i = 0; i < n; ++i)
    for (int ci = 0; ci < cin; ++ci)
      for (int iy = 0; iy < h; ++iy)
        for (int ix = 0; ix < w; ++ix) {
          const T v = x[((static_cast<std::size_t>(i) * cin + ci) * h + iy) * w + ix];
          for (int co = 0; co < cout; ++co)
            for (int u = 0; u < 4; ++u)
              for (int s = 0; s < 4; ++s) {
                const int oy = 2 * iy - 1 + u;
                const int ox = 2 * ix - 1 + s;
                if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
                out[((static_cast<std::size_t>(i) * cout + co) * oh + oy) * ow + ox] +=
                    v * wt[((static_cast<std::size_t>(ci) * cout + co) * 4 + u) * 4 + s];
              }
        }
  return out;
}

// Scalar half-pixel-center bilinear sample of one plane.
template <typename T>
double bilinear_ref(const T* plane, int h, int w, int oh, int ow, int oy, int ox) {
  const double sy = static_cast<double>(h) / oh;
  const double sx = static_cast<double>(w) / ow;
  double py = (oy + 0.5) * sy - 0.5;
  double px = (ox + 0.5) * sx - 0.5;
  py = std::min(std::max(py, 0.0), static_cast<double>(h - 1));
  px = std::min(std::max(px, 0.0), static_cast<double>(w - 1));
  const int y0 = static_cast<int>(py), x0 = static_cast<int>(px);
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = py - y0, fx = px - x0;
  const double top = plane[y0 * w + x0] * (1 - fx) + plane[y0 * w + x1] * fx;
  const double bot = plane[y1 * w + x0] * (1 - fx) + plane[y1 * w + x1] * fx;
  return top * (1 - fy) + bot * fy;
}

}  // namespace testutil
