#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>

#include "paanet/metrics.hpp"
#include "test_util.hpp"

using namespace paanet;
using testutil::random_tensor;

namespace {

Tensor random_binary(int h, int w, Rng& rng, double p = 0.5) {
  Tensor t({1, 1, h, w});
  for (auto& v : t.values()) v = rng.uniform() < p ? 1.0f : 0.0f;
  return t;
}

// Brute-force per-pixel tally, independent of ConfusionCounts.
void tally(const Tensor& pred, const Tensor& gt, std::uint64_t& tp, std::uint64_t& fp,
           std::uint64_t& fn, std::uint64_t& tn) {
  tp = fp = fn = tn = 0;
  for (std::int64_t i = 0; i < pred.numel(); ++i) {
    const bool p = pred.values()[i] == 1.0f;
    const bool g = gt.values()[i] == 1.0f;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
    tn += !p && !g;
  }
}

}  // namespace

TEST_CASE("binarize uses an inclusive threshold and is idempotent") {
  Tensor at({1, 1, 2, 2}, 0.5f);
  Tensor just_below({1, 1, 2, 2}, 0.4999f);
  for (const float v : binarize(at).values()) REQUIRE(v == 1.0f);
  for (const float v : binarize(just_below).values()) REQUIRE(v == 0.0f);

  Rng rng(1);
  Tensor soft = random_tensor<float>({1, 1, 8, 8}, rng, 0.0, 1.0);
  Tensor once = binarize(soft);
  REQUIRE(binarize(once).values() == once.values());
}

TEST_CASE("confusion counts exact pixels") {
  Tensor ones({1, 1, 4, 4}, 1.0f);
  ConfusionCounts c = confusion(ones, ones);
  REQUIRE(c.tp == 16);
  REQUIRE(c.fp + c.fn + c.tn == 0);

  Rng rng(2);
  Tensor gt = random_binary(4, 4, rng);
  Tensor flip(gt.shape());
  for (std::int64_t i = 0; i < gt.numel(); ++i) flip.data()[i] = 1.0f - gt.data()[i];
  c = confusion(flip, gt);
  REQUIRE(c.tp == 0);
  REQUIRE(c.tn == 0);
  REQUIRE(c.total() == 16);

  Tensor soft({1, 1, 2, 2}, 0.7f);
  REQUIRE_THROWS_AS(confusion(soft, gt), std::invalid_argument);
}

TEST_CASE("confusion matches a brute-force tally on random pairs") {
  Rng rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    Tensor pred = random_binary(8, 8, rng, rng.uniform());
    Tensor gt = random_binary(8, 8, rng, rng.uniform());
    std::uint64_t tp, fp, fn, tn;
    tally(pred, gt, tp, fp, fn, tn);
    const ConfusionCounts c = confusion(pred, gt);
    REQUIRE(c.tp == tp);
    REQUIRE(c.fp == fp);
    REQUIRE(c.fn == fn);
    REQUIRE(c.tn == tn);
    REQUIRE(c.total() == 64);
  }
}

TEST_CASE("evaluate on perfect predictions returns all ones") {
  Rng rng(4);
  std::vector<Tensor> masks;
  for (int i = 0; i < 5; ++i) masks.push_back(random_binary(8, 8, rng));
  const MetricsReport r = evaluate(masks, masks);
  REQUIRE(r.dsc == 1.0);
  REQUIRE(r.miou == 1.0);
  REQUIRE(r.recall == 1.0);
  REQUIRE(r.precision == 1.0);
  REQUIRE(r.n_images == 5);
}

TEST_CASE("evaluate reproduces the hand-counted example") {
  // tp=2, fp=2, fn=2 on a 3x3 grid (plus 3 tn).
  Tensor pred({1, 1, 3, 3}, std::vector<float>{1, 1, 1, 1, 0, 0, 0, 0, 0});
  Tensor gt({1, 1, 3, 3}, std::vector<float>{1, 1, 0, 0, 1, 1, 0, 0, 0});
  const MetricsReport r = evaluate<float>({pred}, {gt});
  REQUIRE(r.dsc == Catch::Approx(0.5));
  REQUIRE(r.miou == Catch::Approx(1.0 / 3.0));
  REQUIRE(r.recall == Catch::Approx(0.5));
  REQUIRE(r.precision == Catch::Approx(0.5));
}

TEST_CASE("disjoint nonempty masks score zero everywhere") {
  Tensor pred({1, 1, 2, 2}, std::vector<float>{1, 0, 0, 0});
  Tensor gt({1, 1, 2, 2}, std::vector<float>{0, 1, 0, 0});
  const MetricsReport r = evaluate<float>({pred}, {gt});
  REQUIRE(r.dsc == 0.0);
  REQUIRE(r.miou == 0.0);
  REQUIRE(r.recall == 0.0);
  REQUIRE(r.precision == 0.0);
}

TEST_CASE("empty prediction against empty ground truth is a perfect match") {
  Tensor zero({1, 1, 4, 4}, 0.0f);
  const MetricsReport r = evaluate<float>({zero}, {zero});
  REQUIRE(r.dsc == 1.0);
  REQUIRE(r.miou == 1.0);
}

TEST_CASE("evaluate rejects empty and unpaired lists") {
  REQUIRE_THROWS_AS(evaluate<float>({}, {}), std::invalid_argument);
  Tensor t({1, 1, 2, 2}, 0.0f);
  REQUIRE_THROWS_AS(evaluate<float>({t}, {}), std::invalid_argument);
}

TEST_CASE("dsc equals 2*iou/(1+iou) per image") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor pred = random_binary(8, 8, rng, rng.uniform());
    Tensor gt = random_binary(8, 8, rng, rng.uniform());
    const PerImageMetrics m = per_image_metrics(confusion(pred, gt));
    REQUIRE(std::abs(m.dsc - 2.0 * m.iou / (1.0 + m.iou)) < 1e-12);
  }
}

TEST_CASE("metrics are invariant under a shared pixel permutation") {
  Rng rng(6);
  Tensor pred = random_binary(8, 8, rng, 0.3);
  Tensor gt = random_binary(8, 8, rng, 0.4);
  std::vector<std::size_t> perm(64);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  Tensor pred2(pred.shape()), gt2(gt.shape());
  for (std::size_t i = 0; i < 64; ++i) {
    pred2.data()[perm[i]] = pred.data()[i];
    gt2.data()[perm[i]] = gt.data()[i];
  }
  const MetricsReport a = evaluate<float>({pred}, {gt});
  const MetricsReport b = evaluate<float>({pred2}, {gt2});
  REQUIRE(a.dsc == b.dsc);
  REQUIRE(a.miou == b.miou);
  REQUIRE(a.recall == b.recall);
  REQUIRE(a.precision == b.precision);
}

TEST_CASE("thresholding commutes with evaluation") {
  Rng rng(7);
  std::vector<Tensor> soft, hard, gts;
  for (int i = 0; i < 4; ++i) {
    soft.push_back(random_tensor<float>({1, 1, 8, 8}, rng, 0.0, 1.0));
    hard.push_back(binarize(soft.back()));
    gts.push_back(random_binary(8, 8, rng));
  }
  const MetricsReport a = evaluate(soft, gts);
  const MetricsReport b = evaluate(hard, gts);
  REQUIRE(a.dsc == b.dsc);
  REQUIRE(a.miou == b.miou);
  REQUIRE(a.recall == b.recall);
  REQUIRE(a.precision == b.precision);
}

TEST_CASE("evaluate is independent of the thread budget") {
  Rng rng(8);
  std::vector<Tensor> preds, gts;
  for (int i = 0; i < 13; ++i) {
    preds.push_back(random_tensor<float>({1, 1, 8, 8}, rng, 0.0, 1.0));
    gts.push_back(random_binary(8, 8, rng));
  }
  const MetricsReport serial = evaluate(preds, gts);
  setenv("PAANET_THREADS", "4", 1);
  const MetricsReport parallel = evaluate(preds, gts);
  unsetenv("PAANET_THREADS");
  REQUIRE(serial.dsc == parallel.dsc);
  REQUIRE(serial.miou == parallel.miou);
  REQUIRE(serial.recall == parallel.recall);
  REQUIRE(serial.precision == parallel.precision);
}

TEST_CASE("report formats are stable") {
  MetricsReport r;
  r.dsc = 0.5;
  r.miou = 1.0 / 3.0;
  r.recall = 0.25;
  r.precision = 1.0;
  r.n_images = 3;
  REQUIRE(report_line(r) == "0.500000\t0.333333\t0.250000\t1.000000\t3");
  REQUIRE(report_block(r) ==
          "dsc: 0.500000\nmiou: 0.333333\nrecall: 0.250000\nprecision: 1.000000\nn_images: 3\n");
}
