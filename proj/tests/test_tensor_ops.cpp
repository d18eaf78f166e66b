#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "paanet/gradcheck.hpp"
#include "paanet/ops.hpp"
#include "paanet/rng.hpp"
#include "test_util.hpp"

using namespace paanet;
using testutil::random_tensor;

TEST_CASE("conv2d matches the nested-loop oracle on the 3x3 ones case") {
  Tensor x({1, 1, 3, 3}, 1.0f);
  Tensor w({1, 1, 3, 3}, 1.0f);
  Tensor b({1}, 0.0f);
  Tensor y = conv2d(x, w, b, 1, 1);
  REQUIRE(y.shape() == std::vector<int>{1, 1, 3, 3});
  // Frozen from the oracle: center 9, edge-centers 6, corners 4.
  const std::vector<float> expect = {4, 6, 4, 6, 9, 6, 4, 6, 4};
  auto ref = testutil::conv2d_ref<float>(x.values(), 1, 1, 3, 3, w.values(), 1, 3, 3, b.values(), 1, 1);
  REQUIRE(ref == expect);
  for (int i = 0; i < 9; ++i) REQUIRE(y.values()[i] == Catch::Approx(expect[i]));
}

TEST_CASE("conv2d with a delta kernel is the identity") {
  Rng rng(7);
  Tensor x = random_tensor<float>({2, 1, 5, 6}, rng);
  Tensor w({1, 1, 3, 3}, 0.0f);
  w.values()[4] = 1.0f;  // center tap
  Tensor b({1}, 0.0f);
  Tensor y = conv2d(x, w, b, 1, 1);
  REQUIRE(y.values() == x.values());
}

TEST_CASE("conv2d shape arithmetic") {
  Rng rng(3);
  Tensor x = random_tensor<float>({2, 4, 8, 8}, rng);
  Tensor w = random_tensor<float>({16, 4, 3, 3}, rng);
  Tensor b({16}, 0.0f);
  REQUIRE(conv2d(x, w, b, 1, 1).shape() == std::vector<int>{2, 16, 8, 8});
  // Stride-1 pad-(k-1)/2 preserves spatial extents for odd k.
  Tensor w5 = random_tensor<float>({3, 4, 5, 5}, rng);
  Tensor b5({3}, 0.0f);
  REQUIRE(conv2d(x, w5, b5, 1, 2).shape() == std::vector<int>{2, 3, 8, 8});
}

TEST_CASE("conv2d agrees with the oracle across strides, pads and kernels") {
  Rng rng(11);
  struct Case {
    int n, cin, h, w, cout, k, stride, pad;
  };
  for (const Case c : {Case{1, 2, 6, 7, 3, 3, 1, 1}, Case{2, 3, 8, 8, 4, 3, 2, 1},
                       Case{1, 1, 5, 5, 2, 1, 1, 0}, Case{1, 2, 9, 6, 2, 4, 2, 1},
                       Case{1, 3, 7, 7, 1, 5, 1, 2}}) {
    Tensor x = random_tensor<float>({c.n, c.cin, c.h, c.w}, rng);
    Tensor w = random_tensor<float>({c.cout, c.cin, c.k, c.k}, rng);
    Tensor b = random_tensor<float>({c.cout}, rng);
    Tensor y = conv2d(x, w, b, c.stride, c.pad);
    auto ref = testutil::conv2d_ref<float>(x.values(), c.n, c.cin, c.h, c.w, w.values(), c.cout,
                                           c.k, c.k, b.values(), c.stride, c.pad);
    REQUIRE(y.numel() == static_cast<std::int64_t>(ref.size()));
    for (std::size_t i = 0; i < ref.size(); ++i)
      REQUIRE(y.values()[i] == Catch::Approx(ref[i]).margin(1e-4));
  }
}

TEST_CASE("conv2d rejects contract violations") {
  Tensor x({1, 2, 4, 4}, 1.0f);
  Tensor w({1, 3, 3, 3}, 1.0f);
  Tensor b({1}, 0.0f);
  REQUIRE_THROWS_AS(conv2d(x, w, b, 1, 1), std::invalid_argument);  // channel mismatch
  Tensor w2({1, 2, 7, 7}, 1.0f);
  REQUIRE_THROWS_AS(conv2d(x, w2, b, 1, 1), std::invalid_argument);  // kernel too large
  Tensor xbad({1, 2, 4, 4}, 1.0f);
  xbad.values()[3] = std::numeric_limits<float>::quiet_NaN();
  Tensor w3({1, 2, 3, 3}, 1.0f);
  REQUIRE_THROWS_AS(conv2d(xbad, w3, b, 1, 1), std::invalid_argument);  // non-finite input
}

TEST_CASE("transposed_conv2d single-pixel scatter matches the oracle") {
  Tensor x({1, 1, 1, 1}, 1.0f);
  Tensor w({1, 1, 4, 4}, 1.0f);
  Tensor b({1}, 0.0f);
  Tensor y = transposed_conv2d(x, w, b);
  REQUIRE(y.shape() == std::vector<int>{1, 1, 2, 2});
  auto ref = testutil::tconv2d_ref<float>(x.values(), 1, 1, 1, 1, w.values(), 1, b.values());
  // Each output site is covered by exactly one kernel tap of the single
  // input pixel, so the oracle yields 1.0 everywhere.
  for (const float v : ref) REQUIRE(v == 1.0f);
  REQUIRE(y.values() == ref);
}

TEST_CASE("transposed_conv2d doubles spatial extents") {
  Rng rng(5);
  Tensor x = random_tensor<float>({1, 1, 4, 4}, rng);
  Tensor w = random_tensor<float>({1, 2, 4, 4}, rng);
  Tensor b({2}, 0.0f);
  REQUIRE(transposed_conv2d(x, w, b).shape() == std::vector<int>{1, 2, 8, 8});
  Tensor x2 = random_tensor<float>({2, 3, 1, 5}, rng);
  Tensor w2 = random_tensor<float>({3, 1, 4, 4}, rng);
  Tensor b2({1}, 0.0f);
  REQUIRE(transposed_conv2d(x2, w2, b2).shape() == std::vector<int>{2, 1, 2, 10});
}

TEST_CASE("transposed_conv2d with a zero kernel emits constant bias") {
  Rng rng(9);
  Tensor x = random_tensor<float>({1, 2, 3, 3}, rng);
  Tensor w({2, 3, 4, 4}, 0.0f);
  Tensor b({3}, 0.0f);
  b.values() = {0.5f, -1.0f, 2.0f};
  Tensor y = transposed_conv2d(x, w, b);
  for (int c = 0; c < 3; ++c)
    for (int s = 0; s < 36; ++s) REQUIRE(y.values()[c * 36 + s] == b.values()[c]);
}

TEST_CASE("transposed_conv2d agrees with the scatter oracle on random input") {
  Rng rng(13);
  Tensor x = random_tensor<float>({2, 3, 5, 4}, rng);
  Tensor w = random_tensor<float>({3, 2, 4, 4}, rng);
  Tensor b = random_tensor<float>({2}, rng);
  Tensor y = transposed_conv2d(x, w, b);
  auto ref = testutil::tconv2d_ref<float>(x.values(), 2, 3, 5, 4, w.values(), 2, b.values());
  for (std::size_t i = 0; i < ref.size(); ++i)
    REQUIRE(y.values()[i] == Catch::Approx(ref[i]).margin(1e-4));
}

TEST_CASE("transposed_conv2d is the adjoint of the matching strided conv") {
  // <tconv(x), y> == <x, conv(y)> with conv(k=4, s=2, p=1) and tied weights.
  Rng rng(17);
  const int cin = 2, cout = 3, h = 4, w = 5;
  Tensor x = random_tensor<float>({1, cin, h, w}, rng);
  Tensor wt = random_tensor<float>({cin, cout, 4, 4}, rng);
  Tensor zero_b_out({cout}, 0.0f), zero_b_in({cin}, 0.0f);
  Tensor up = transposed_conv2d(x, wt, zero_b_out);
  Tensor y = random_tensor<float>({1, cout, 2 * h, 2 * w}, rng);

  // conv weight [cin, cout, 4, 4] read as [cout_conv=cin? no]: build the tied
  // conv weight [Cin_out=cin][cout][k][k] -> conv maps y (cout ch) to cin ch.
  Tensor wc({cin, cout, 4, 4}, wt.values());
  Tensor down = conv2d(y, wc, zero_b_in, 2, 1);

  double lhs = 0, rhs = 0;
  for (std::int64_t i = 0; i < up.numel(); ++i) lhs += double(up.values()[i]) * y.values()[i];
  for (std::int64_t i = 0; i < down.numel(); ++i) rhs += double(down.values()[i]) * x.values()[i];
  REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-4));
}

TEST_CASE("transposed_conv2d rejects non-doubling configurations") {
  Tensor x({1, 1, 2, 2}, 1.0f);
  Tensor w3({1, 1, 3, 3}, 1.0f);
  Tensor w4({1, 1, 4, 4}, 1.0f);
  Tensor b({1}, 0.0f);
  REQUIRE_THROWS_AS(transposed_conv2d(x, w3, b), std::invalid_argument);
  REQUIRE_THROWS_AS(transposed_conv2d(x, w4, b, 1, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(transposed_conv2d(x, w4, b, 2, 0), std::invalid_argument);
}

TEST_CASE("concat_channels stacks parts in order") {
  Rng rng(19);
  Tensor a = random_tensor<float>({1, 16, 8, 8}, rng);
  Tensor b = random_tensor<float>({1, 32, 8, 8}, rng);
  Tensor y = concat_channels<float>({a, b});
  REQUIRE(y.shape() == std::vector<int>{1, 48, 8, 8});

  Tensor single = concat_channels<float>({a});
  REQUIRE(single.values() == a.values());

  // Round trip: split recovers both parts bitwise.
  Tensor ra = slice_channels(y, 0, 16);
  Tensor rb = slice_channels(y, 16, 48);
  REQUIRE(ra.values() == a.values());
  REQUIRE(rb.values() == b.values());
}

TEST_CASE("concat_channels round-trips through slice_channels for random splits") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const int nparts = static_cast<int>(rng.range(1, 4));
    std::vector<Tensor> parts;
    std::vector<int> sizes;
    for (int p = 0; p < nparts; ++p) {
      sizes.push_back(static_cast<int>(rng.range(1, 5)));
      parts.push_back(random_tensor<float>({2, sizes.back(), 3, 4}, rng));
    }
    Tensor y = concat_channels(parts);
    int off = 0;
    for (int p = 0; p < nparts; ++p) {
      Tensor back = slice_channels(y, off, off + sizes[p]);
      REQUIRE(back.values() == parts[p].values());
      off += sizes[p];
    }
  }
}

TEST_CASE("concat_channels rejects mismatched spatial dims") {
  Tensor a({1, 2, 4, 4}, 1.0f);
  Tensor b({1, 2, 8, 8}, 1.0f);
  REQUIRE_THROWS_AS(concat_channels<float>({a, b}), std::invalid_argument);
  REQUIRE_THROWS_AS(concat_channels<float>({}), std::invalid_argument);
}

TEST_CASE("mul_broadcast gates features by a one-channel map") {
  Rng rng(29);
  Tensor f = random_tensor<float>({2, 3, 4, 4}, rng);
  Tensor ones({2, 1, 4, 4}, 1.0f);
  REQUIRE(mul_broadcast(f, ones).values() == f.values());
  Tensor zeros({2, 1, 4, 4}, 0.0f);
  Tensor gated = mul_broadcast(f, zeros);
  for (const float v : gated.values()) REQUIRE(v == 0.0f);

  Tensor fv({1, 2, 1, 1}, std::vector<float>{3.0f, -2.0f});
  Tensor half({1, 1, 1, 1}, 0.5f);
  Tensor y = mul_broadcast(fv, half);
  REQUIRE(y.values()[0] == 1.5f);
  REQUIRE(y.values()[1] == -1.0f);

  Tensor wrong({2, 1, 8, 8}, 1.0f);
  REQUIRE_THROWS_AS(mul_broadcast(f, wrong), std::invalid_argument);
}

TEST_CASE("sigmoid hits its symmetry point and stays inside (0,1)") {
  Tensor x({1}, 0.0f);
  REQUIRE(sigmoid(x).item() == 0.5f);

  Rng rng(31);
  Tensor r = random_tensor<float>({64}, rng, -30.0, 30.0);
  r.values()[0] = -1000.0f;
  r.values()[1] = 1000.0f;
  Tensor s = sigmoid(r);
  Tensor neg = affine(r, -1.0f, 0.0f);
  Tensor sneg = sigmoid(neg);
  for (std::int64_t i = 0; i < s.numel(); ++i) {
    REQUIRE(s.values()[i] > 0.0f);
    REQUIRE(s.values()[i] < 1.0f);
    REQUIRE(s.values()[i] + sneg.values()[i] == Catch::Approx(1.0).margin(1e-6));
  }
}

TEST_CASE("sigmoid gradient at 0 is 1/4 per element") {
  Tensor x({2, 1, 2, 2}, 0.0f);
  x.set_requires_grad(true);
  backward(sum(sigmoid(x)));
  for (const float g : x.grad()) REQUIRE(g == Catch::Approx(0.25));
}

TEST_CASE("resize_bilinear of a constant is that constant") {
  Tensor x({1, 2, 3, 5}, 3.7f);
  Tensor y = resize_bilinear(x, 7, 2);
  REQUIRE(y.shape() == std::vector<int>{1, 2, 7, 2});
  for (const float v : y.values()) REQUIRE(v == Catch::Approx(3.7f));
}

TEST_CASE("resize_bilinear to the same size is a bitwise identity") {
  Rng rng(37);
  Tensor x = random_tensor<float>({2, 3, 4, 4}, rng);
  REQUIRE(resize_bilinear(x, 4, 4).values() == x.values());
}

TEST_CASE("resize_bilinear matches the scalar oracle") {
  Tensor x({1, 1, 2, 2}, std::vector<float>{0, 1, 1, 0});
  Tensor y = resize_bilinear(x, 4, 4);
  for (int oy = 0; oy < 4; ++oy)
    for (int ox = 0; ox < 4; ++ox)
      REQUIRE(y.at(0, 0, oy, ox) ==
              Catch::Approx(testutil::bilinear_ref(x.data(), 2, 2, 4, 4, oy, ox)).margin(1e-6));

  Rng rng(41);
  Tensor r = random_tensor<float>({2, 2, 5, 7}, rng);
  for (const auto [th, tw] : {std::pair{10, 14}, {3, 4}, {5, 9}, {1, 1}}) {
    Tensor z = resize_bilinear(r, th, tw);
    for (int i = 0; i < 2; ++i)
      for (int c = 0; c < 2; ++c)
        for (int oy = 0; oy < th; ++oy)
          for (int ox = 0; ox < tw; ++ox)
            REQUIRE(z.at(i, c, oy, ox) ==
                    Catch::Approx(testutil::bilinear_ref(r.data() + (i * 2 + c) * 35, 5, 7, th,
                                                         tw, oy, ox))
                        .margin(1e-5));
  }
}

// ---------------------------------------------------------------------------
// Gradient checks. The op-level harness runs in double precision, which the
// finite-difference tolerance of 1e-3 covers with a wide margin.

namespace {

template <typename F>
void check_grad(const char* what, F f, TensorT<double> x, double tol = 1e-3) {
  const double err = finite_diff_check<double>(f, x, 1e-3);
  INFO(what << " max relative error " << err);
  REQUIRE(err < tol);
}

}  // namespace

TEST_CASE("finite differences validate every operator") {
  Rng rng(43);
  using DT = TensorT<double>;

  check_grad("conv2d wrt input",
             [&](const DT& x) {
               DT w = random_tensor<double>({3, 2, 3, 3}, Rng(1));
               DT b = random_tensor<double>({3}, Rng(2));
               return sum(conv2d(x, w, b, 1, 1));
             },
             random_tensor<double>({1, 2, 6, 6}, rng));
  check_grad("conv2d wrt weight",
             [&](const DT& w) {
               DT x = random_tensor<double>({1, 2, 6, 6}, Rng(3));
               DT b = random_tensor<double>({3}, Rng(4));
               return sum(mul(conv2d(x, w, b, 2, 1), conv2d(x, w, b, 2, 1)));
             },
             random_tensor<double>({3, 2, 3, 3}, rng));
  check_grad("conv2d wrt bias",
             [&](const DT& b) {
               DT x = random_tensor<double>({1, 2, 5, 5}, Rng(5));
               DT w = random_tensor<double>({2, 2, 3, 3}, Rng(6));
               DT y = conv2d(x, w, b, 1, 0);
               return sum(mul(y, y));
             },
             random_tensor<double>({2}, rng));
  check_grad("transposed_conv2d wrt input",
             [&](const DT& x) {
               DT w = random_tensor<double>({2, 3, 4, 4}, Rng(7));
               DT b = random_tensor<double>({3}, Rng(8));
               DT y = transposed_conv2d(x, w, b);
               return sum(mul(y, y));
             },
             random_tensor<double>({1, 2, 3, 4}, rng));
  check_grad("transposed_conv2d wrt weight",
             [&](const DT& w) {
               DT x = random_tensor<double>({1, 2, 3, 4}, Rng(9));
               DT b = random_tensor<double>({3}, Rng(10));
               DT y = transposed_conv2d(x, w, b);
               return sum(mul(y, y));
             },
             random_tensor<double>({2, 3, 4, 4}, rng));
  check_grad("concat_channels + slice_channels",
             [&](const DT& x) {
               DT other = random_tensor<double>({1, 2, 4, 4}, Rng(11));
               DT y = concat_channels<double>({x, other});
               DT s = slice_channels(y, 1, 4);
               return sum(mul(s, s));
             },
             random_tensor<double>({1, 3, 4, 4}, rng));
  check_grad("mul_broadcast wrt features",
             [&](const DT& f) {
               DT m = random_tensor<double>({1, 1, 4, 4}, Rng(12));
               DT y = mul_broadcast(f, m);
               return sum(mul(y, y));
             },
             random_tensor<double>({1, 3, 4, 4}, rng));
  check_grad("mul_broadcast wrt map",
             [&](const DT& m) {
               DT f = random_tensor<double>({1, 3, 4, 4}, Rng(13));
               DT y = mul_broadcast(f, m);
               return sum(mul(y, y));
             },
             random_tensor<double>({1, 1, 4, 4}, rng));
  check_grad("sigmoid", [](const DT& x) { return sum(sigmoid(x)); },
             random_tensor<double>({1, 2, 5, 5}, rng, -4.0, 4.0));
  check_grad("relu (away from the kink)",
             [](const DT& x) {
               DT y = relu(x);
               return sum(mul(y, y));
             },
             random_tensor<double>({60}, rng, 0.1, 1.0));
  check_grad("resize_bilinear upscale",
             [](const DT& x) {
               DT y = resize_bilinear(x, 7, 9);
               return sum(mul(y, y));
             },
             random_tensor<double>({1, 2, 4, 5}, rng));
  check_grad("resize_bilinear downscale",
             [](const DT& x) {
               DT y = resize_bilinear(x, 3, 2);
               return sum(mul(y, y));
             },
             random_tensor<double>({1, 2, 6, 7}, rng));
  check_grad("affine chain",
             [](const DT& x) {
               DT y = one_minus(affine(x, 2.5, -0.5));
               return sum(mul(y, y));
             },
             random_tensor<double>({17}, rng));
}

TEST_CASE("central differences are near-exact for a linear map in float") {
  Rng rng(47);
  Tensor x = testutil::random_tensor<float>({24}, rng);
  const double err =
      finite_diff_check<float>([](const Tensor& t) { return sum(affine(t, 3.0f, 0.25f)); }, x, 1e-2);
  REQUIRE(err < 1e-4);
}
