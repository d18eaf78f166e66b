#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "paanet/graph.hpp"
#include "paanet/model.hpp"
#include "paanet/ops.hpp"
#include "paanet/tensor.hpp"

namespace paanet {

namespace detail {

template <typename T>
void require_pred_gt_pair(const TensorT<T>& pred, const TensorT<T>& gt, const char* op) {
  require(pred.defined() && gt.defined() && pred.shape() == gt.shape(),
          std::string(op) + ": prediction " + shape_str(pred.shape()) + " and ground truth " +
              shape_str(gt.shape()) + " must match");
  for (const T v : gt.values())
    if (!(v == T(0) || v == T(1)))
      throw std::invalid_argument(std::string(op) + ": ground truth must be binary {0,1}, found " +
                                  std::to_string(static_cast<double>(v)));
}

constexpr double kBceClamp = 1e-7;  // keeps log() away from -inf

}  // namespace detail

// Mean binary cross entropy over all pixels. Internals run in double; the
// prediction is clamped to [1e-7, 1-1e-7] before the logs, with the clamp
// zeroing the gradient outside that range.
template <typename T>
TensorT<T> bce_loss(const TensorT<T>& pred, const TensorT<T>& gt) {
  detail::require_pred_gt_pair(pred, gt, "bce_loss");
  const std::int64_t n = pred.numel();
  const double lo = detail::kBceClamp, hi = 1.0 - detail::kBceClamp;
  double acc = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double p = std::min(hi, std::max(lo, static_cast<double>(pred.data()[i])));
    const double g = static_cast<double>(gt.data()[i]);
    acc -= g * std::log(p) + (1.0 - g) * std::log(1.0 - p);
  }
  TensorT<T> out = TensorT<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
  detail::record<T>("bce_loss", {&pred, &gt}, out, [=]() {
    if (!pred.ptr()->tracked) return;
    detail::ensure_grad(pred.ptr());
    const double go = static_cast<double>(out.ptr()->grad[0]);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::int64_t i = 0; i < n; ++i) {
      const double praw = static_cast<double>(pred.data()[i]);
      if (praw < lo || praw > hi) continue;  // clamped: zero slope
      const double g = static_cast<double>(gt.data()[i]);
      pred.ptr()->grad[i] += static_cast<T>(go * inv_n * (-g / praw + (1.0 - g) / (1.0 - praw)));
    }
  });
  return out;
}

// Soft (differentiable) IoU loss with smoothing 1.0, pooled over the whole
// tensor: 1 - (sum(p*g)+1) / (sum(p)+sum(g)-sum(p*g)+1).
template <typename T>
TensorT<T> iou_loss(const TensorT<T>& pred, const TensorT<T>& gt) {
  detail::require_pred_gt_pair(pred, gt, "iou_loss");
  const std::int64_t n = pred.numel();
  constexpr double smooth = 1.0;
  double inter = 0, psum = 0, gsum = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double p = static_cast<double>(pred.data()[i]);
    const double g = static_cast<double>(gt.data()[i]);
    inter += p * g;
    psum += p;
    gsum += g;
  }
  const double uni = psum + gsum - inter;
  TensorT<T> out = TensorT<T>::scalar(static_cast<T>(1.0 - (inter + smooth) / (uni + smooth)));
  detail::record<T>("iou_loss", {&pred, &gt}, out, [=]() {
    if (!pred.ptr()->tracked) return;
    detail::ensure_grad(pred.ptr());
    const double go = static_cast<double>(out.ptr()->grad[0]);
    const double denom = (uni + smooth) * (uni + smooth);
    for (std::int64_t i = 0; i < n; ++i) {
      const double g = static_cast<double>(gt.data()[i]);
      // d/dp of -(inter+s)/(union+s): union grows by (1-g), inter by g.
      const double d = -(g * (uni + smooth) - (inter + smooth) * (1.0 - g)) / denom;
      pred.ptr()->grad[i] += static_cast<T>(go * d);
    }
  });
  return out;
}

// Equally weighted BCE + soft IoU.
template <typename T>
TensorT<T> bce_iou_loss(const TensorT<T>& pred, const TensorT<T>& gt) {
  return add(bce_loss(pred, gt), iou_loss(pred, gt));
}

// Deep-supervision aggregate: the arithmetic mean of bce_iou_loss over every
// GAM and every decoder side output (the prediction is side output v=1 and is
// not double counted). Throws with the offending term's name if any term goes
// non-finite.
template <typename T>
TensorT<T> total_loss(const ModelOutputsT<T>& outputs, const TensorT<T>& gt) {
  std::vector<std::pair<std::string, const TensorT<T>*>> maps;
  for (std::size_t i = 0; i < outputs.gams.size(); ++i)
    maps.emplace_back("gam[" + std::to_string(i) + "]", &outputs.gams[i]);
  for (std::size_t v = 0; v < outputs.side_outputs.size(); ++v)
    maps.emplace_back("side[" + std::to_string(v + 1) + "]", &outputs.side_outputs[v]);
  detail::require(!maps.empty(), "total_loss: nothing to supervise");

  TensorT<T> acc;
  for (const auto& [name, map] : maps) {
    TensorT<T> term = bce_iou_loss(*map, gt);
    if (!std::isfinite(static_cast<double>(term.item())))
      throw std::runtime_error("total_loss: non-finite loss term bce_iou(" + name + ")");
    acc = acc.defined() ? add(acc, term) : term;
  }
  return affine(acc, static_cast<T>(1.0 / static_cast<double>(maps.size())), T(0));
}

}  // namespace paanet
