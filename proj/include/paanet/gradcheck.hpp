#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "paanet/graph.hpp"
#include "paanet/tensor.hpp"

namespace paanet {

// Compares the analytic gradient of a scalar-valued tensor function against
// central finite differences, coordinate by coordinate. Returns the maximum
// over coordinates of |analytic - numeric| / max(1, |numeric|). The function
// must be deterministic; x is restored on exit.
template <typename T>
double finite_diff_check(const std::function<TensorT<T>(const TensorT<T>&)>& f, TensorT<T> x,
                         double eps) {
  if (!(eps >= 1e-4 && eps <= 1e-2))
    throw std::invalid_argument("finite_diff_check: eps must lie in [1e-4, 1e-2]");

  x.set_requires_grad(true);
  x.zero_grad();
  {
    TensorT<T> y = f(x);
    if (y.numel() != 1)
      throw std::invalid_argument("finite_diff_check: f must be scalar-valued");
    backward(y);
  }
  if (!x.has_grad())
    throw std::runtime_error("finite_diff_check: f does not depend on x (no gradient reached it)");
  std::vector<double> analytic(x.grad().begin(), x.grad().end());
  x.zero_grad();

  double max_rel = 0;
  {
    NoGradGuardT<T> no_grad;
    for (std::int64_t i = 0; i < x.numel(); ++i) {
      const T orig = x.data()[i];
      x.data()[i] = orig + static_cast<T>(eps);
      const double fp = static_cast<double>(f(x).item());
      x.data()[i] = orig - static_cast<T>(eps);
      const double fm = static_cast<double>(f(x).item());
      x.data()[i] = orig;
      const double numeric = (fp - fm) / (2 * eps);
      const double rel =
          std::abs(analytic[static_cast<std::size_t>(i)] - numeric) / std::max(1.0, std::abs(numeric));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace paanet
