#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "paanet/ops.hpp"
#include "paanet/parallel.hpp"
#include "paanet/tensor.hpp"

namespace paanet {

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::uint64_t total() const { return tp + fp + fn + tn; }
};

struct MetricsReport {
  double dsc = 0, miou = 0, recall = 0, precision = 0;
  int n_images = 0;
};

// Inclusive threshold: pixel >= threshold maps to 1.
template <typename T>
TensorT<T> binarize(const TensorT<T>& pred, double threshold = 0.5) {
  TensorT<T> out(pred.shape());
  for (std::int64_t i = 0; i < pred.numel(); ++i)
    out.data()[i] = static_cast<double>(pred.data()[i]) >= threshold ? T(1) : T(0);
  return out;
}

template <typename T>
ConfusionCounts confusion(const TensorT<T>& pred_bin, const TensorT<T>& gt) {
  detail::require(pred_bin.shape() == gt.shape(),
                  "confusion: shapes " + detail::shape_str(pred_bin.shape()) + " and " +
                      detail::shape_str(gt.shape()) + " differ");
  ConfusionCounts c;
  for (std::int64_t i = 0; i < pred_bin.numel(); ++i) {
    const T p = pred_bin.data()[i];
    const T g = gt.data()[i];
    if (!((p == T(0) || p == T(1)) && (g == T(0) || g == T(1))))
      throw std::invalid_argument("confusion: inputs must be binary {0,1}");
    if (p == T(1) && g == T(1))
      ++c.tp;
    else if (p == T(1))
      ++c.fp;
    else if (g == T(1))
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

struct PerImageMetrics {
  double dsc = 0, iou = 0, recall = 0, precision = 0;
};

// Ratio with the 0/0 -> 1 convention: an empty prediction against an empty
// ground truth is a perfect match.
inline double safe_ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return 1.0;
  return static_cast<double>(num) / static_cast<double>(den);
}

inline PerImageMetrics per_image_metrics(const ConfusionCounts& c) {
  PerImageMetrics m;
  m.dsc = safe_ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  m.iou = safe_ratio(c.tp, c.tp + c.fp + c.fn);
  m.recall = safe_ratio(c.tp, c.tp + c.fn);
  m.precision = safe_ratio(c.tp, c.tp + c.fp);
  return m;
}

// Per-image metrics averaged over images (not pooled over pixels). Each list
// element counts as one image; soft predictions are thresholded first.
template <typename T>
MetricsReport evaluate(const std::vector<TensorT<T>>& preds, const std::vector<TensorT<T>>& gts,
                       double threshold = 0.5) {
  detail::require(!preds.empty(), "evaluate: empty image list");
  detail::require(preds.size() == gts.size(), "evaluate: unpaired prediction/ground-truth lists");
  std::vector<PerImageMetrics> per(preds.size());
  parallel_for(static_cast<std::int64_t>(preds.size()), [&](std::int64_t i) {
    const auto idx = static_cast<std::size_t>(i);
    per[idx] = per_image_metrics(confusion(binarize(preds[idx], threshold), gts[idx]));
  });
  MetricsReport r;
  for (const auto& m : per) {
    r.dsc += m.dsc;
    r.miou += m.iou;
    r.recall += m.recall;
    r.precision += m.precision;
  }
  const auto n = static_cast<double>(per.size());
  r.dsc /= n;
  r.miou /= n;
  r.recall /= n;
  r.precision /= n;
  r.n_images = static_cast<int>(per.size());
  return r;
}

// One tab-separated line: dsc, miou, recall, precision, n_images.
inline std::string report_line(const MetricsReport& r) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  os << r.dsc << '\t' << r.miou << '\t' << r.recall << '\t' << r.precision << '\t' << r.n_images;
  return os.str();
}

inline std::string report_block(const MetricsReport& r) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  os << "dsc: " << r.dsc << "\nmiou: " << r.miou << "\nrecall: " << r.recall
     << "\nprecision: " << r.precision << "\nn_images: " << r.n_images << "\n";
  return os.str();
}

}  // namespace paanet
