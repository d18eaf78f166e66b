#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace paanet {

template <typename T>
struct TensorDataT {
  std::vector<int> shape;
  std::vector<T> values;
  std::vector<T> grad;          // empty until backward touches this tensor
  bool requires_grad = false;   // leaf parameter flag
  bool tracked = false;         // participates in the current autodiff graph
};

namespace detail {

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

inline std::int64_t checked_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (const int e : shape) {
    if (e <= 0)
      throw std::invalid_argument("tensor: extents must be positive, got " + shape_str(shape));
    n *= e;
  }
  return n;
}

template <typename T>
void ensure_grad(const std::shared_ptr<TensorDataT<T>>& d) {
  if (d->grad.empty()) d->grad.assign(d->values.size(), T(0));
}

}  // namespace detail

// Dense row-major tensor of scalars. Copies share storage; values are treated
// as immutable once produced by an operation, gradients accumulate in place.
template <typename T>
class TensorT {
 public:
  using Data = TensorDataT<T>;

  TensorT() = default;

  explicit TensorT(std::vector<int> shape, T fill = T(0)) {
    const auto n = detail::checked_numel(shape);
    d_ = std::make_shared<Data>();
    d_->shape = std::move(shape);
    d_->values.assign(static_cast<std::size_t>(n), fill);
  }

  TensorT(std::vector<int> shape, std::vector<T> values) {
    const auto n = detail::checked_numel(shape);
    if (static_cast<std::size_t>(n) != values.size())
      throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                  " values do not fill shape " + detail::shape_str(shape));
    d_ = std::make_shared<Data>();
    d_->shape = std::move(shape);
    d_->values = std::move(values);
  }

  static TensorT scalar(T v) { return TensorT({1}, std::vector<T>{v}); }

  bool defined() const { return static_cast<bool>(d_); }

  const std::vector<int>& shape() const { return d_->shape; }
  int rank() const { return static_cast<int>(d_->shape.size()); }
  int dim(int i) const { return d_->shape.at(static_cast<std::size_t>(i)); }
  std::int64_t numel() const { return static_cast<std::int64_t>(d_->values.size()); }

  T* data() { return d_->values.data(); }
  const T* data() const { return d_->values.data(); }
  std::vector<T>& values() { return d_->values; }
  const std::vector<T>& values() const { return d_->values; }

  T item() const {
    if (numel() != 1)
      throw std::invalid_argument("tensor: item() on shape " + detail::shape_str(shape()));
    return d_->values[0];
  }

  // NCHW accessors, used by tests and glue code; hot loops index manually.
  T& at(int n, int c, int h, int w) {
    return d_->values[static_cast<std::size_t>(flat_index(n, c, h, w))];
  }
  T at(int n, int c, int h, int w) const {
    return d_->values[static_cast<std::size_t>(flat_index(n, c, h, w))];
  }

  void set_requires_grad(bool on) {
    d_->requires_grad = on;
    if (on) d_->tracked = true;
  }
  bool requires_grad() const { return d_->requires_grad; }
  bool tracked() const { return d_ && d_->tracked; }

  const std::vector<T>& grad() const { return d_->grad; }
  bool has_grad() const { return !d_->grad.empty(); }
  void zero_grad() { d_->grad.clear(); }

  // Deep copy of values only; the copy starts detached from any graph.
  TensorT clone_values() const { return TensorT(d_->shape, d_->values); }

  std::shared_ptr<Data> ptr() const { return d_; }

 private:
  std::int64_t flat_index(int n, int c, int h, int w) const {
    if (rank() != 4) throw std::invalid_argument("tensor: at(n,c,h,w) needs rank 4");
    return ((static_cast<std::int64_t>(n) * dim(1) + c) * dim(2) + h) * dim(3) + w;
  }

  std::shared_ptr<Data> d_;
};

using Tensor = TensorT<float>;

template <typename T>
bool all_finite(const TensorT<T>& t) {
  for (const T v : t.values())
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Serialization: rank as u32, extents as u32 each, then raw little-endian
// 32-bit floats. This is the on-disk unit of the checkpoint format.

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("tensor i/o: truncated stream while reading u32");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

inline float read_f32(std::istream& is) {
  const std::uint32_t bits = read_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace detail

template <typename T>
void write_tensor(std::ostream& os, const TensorT<T>& t) {
  detail::write_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i)
    detail::write_u32(os, static_cast<std::uint32_t>(t.dim(i)));
  for (const T v : t.values()) detail::write_f32(os, static_cast<float>(v));
}

template <typename T = float>
TensorT<T> read_tensor(std::istream& is) {
  const std::uint32_t rank = detail::read_u32(is);
  if (rank == 0 || rank > 8)
    throw std::runtime_error("tensor i/o: implausible rank " + std::to_string(rank));
  std::vector<int> shape(rank);
  std::int64_t n = 1;
  for (auto& e : shape) {
    const std::uint32_t ext = detail::read_u32(is);
    if (ext == 0 || ext > (1u << 24))
      throw std::runtime_error("tensor i/o: implausible extent " + std::to_string(ext));
    e = static_cast<int>(ext);
    n *= e;
  }
  std::vector<T> values(static_cast<std::size_t>(n));
  for (auto& v : values) v = static_cast<T>(detail::read_f32(is));
  return TensorT<T>(std::move(shape), std::move(values));
}

}  // namespace paanet
