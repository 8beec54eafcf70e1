#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "datk/ops.hpp"
#include "datk/rng.hpp"
#include "datk/tensor.hpp"
#include "ref/ref_ops.hpp"
#include "support/gradcheck.hpp"

using namespace datk;
using datk::testing::grad_check;
using datk::testing::random_prob_tensor;
using datk::testing::random_tensor;
using datk::testing::weighted_sum;

using DT = TensorT<double>;

TEST_CASE("conv2d all-ones 3x3 gives the window sum") {
  auto x = DT::filled({1, 1, 3, 3}, 1.0);
  auto k = DT::filled({1, 1, 3, 3}, 1.0);
  auto y = conv2d(x, k, 1, 0);
  CHECK(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.item() == doctest::Approx(9.0));
}

TEST_CASE("conv2d identity kernel reproduces the input") {
  Rng rng(11);
  auto x = random_tensor<double>({1, 1, 4, 4}, rng, false);
  std::vector<double> kd(9, 0.0);
  kd[4] = 1.0;  // center tap
  auto k = DT::from_data({1, 1, 3, 3}, kd);
  auto y = conv2d(x, k, 1, 1);
  REQUIRE(y.shape() == x.shape());
  for (size_t i = 0; i < x.data().size(); ++i)
    CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-12));
}

TEST_CASE("conv2d matches the 6-loop reference") {
  Rng rng(42);
  auto x = random_tensor<double>({1, 2, 5, 5}, rng, false);
  auto k = random_tensor<double>({3, 2, 3, 3}, rng, false);
  auto y = conv2d(x, k, 1, 0);
  auto want = ref::conv2d(x.data(), 1, 2, 5, 5, k.data(), 3, 3, 3, 1, 0);
  REQUIRE(y.data().size() == want.size());
  for (size_t i = 0; i < want.size(); ++i)
    CHECK(y.data()[i] == doctest::Approx(want[i]).epsilon(1e-6));
}

TEST_CASE("conv2d rejects inexact output sizes and bad shapes") {
  auto x = DT::filled({1, 1, 5, 5}, 1.0);
  auto k = DT::filled({1, 1, 2, 2}, 1.0);
  CHECK_THROWS_AS(conv2d(x, k, 2, 0), ConfigError);
  auto kc = DT::filled({1, 2, 3, 3}, 1.0);
  CHECK_THROWS_AS(conv2d(x, kc, 1, 0), DimensionError);
  auto kbig = DT::filled({1, 1, 7, 7}, 1.0);
  CHECK_THROWS_AS(conv2d(x, kbig, 1, 0), DimensionError);
}

TEST_CASE("depthwise_xcorr peaks where the template matches") {
  Rng rng(7);
  auto search = random_tensor<double>({1, 2, 6, 6}, rng, false, -0.3, 0.3);
  // Bright distinctive patch at offset (2,1); elsewhere low-energy noise.
  for (int c = 0; c < 2; ++c)
    for (int y = 2; y < 5; ++y)
      for (int x = 1; x < 4; ++x)
        search.data()[(static_cast<size_t>(c) * 6 + y) * 6 + x] = rng.uniform(2.0, 3.0);
  // Template = sub-window at offset (2,1).
  std::vector<double> td;
  for (int c = 0; c < 2; ++c)
    for (int y = 2; y < 5; ++y)
      for (int x = 1; x < 4; ++x)
        td.push_back(search.data()[(static_cast<size_t>(c) * 6 + y) * 6 + x]);
  auto templ = DT::from_data({1, 2, 3, 3}, td);
  auto resp = depthwise_xcorr(search, templ);
  CHECK(resp.shape() == Shape{1, 2, 4, 4});
  // Sum over channels, find argmax.
  int best = -1;
  double bv = -1e300;
  for (int i = 0; i < 16; ++i) {
    const double v = resp.data()[static_cast<size_t>(i)] + resp.data()[static_cast<size_t>(16 + i)];
    if (v > bv) {
      bv = v;
      best = i;
    }
  }
  CHECK(best == 2 * 4 + 1);
}

TEST_CASE("depthwise_xcorr zero template gives zero response") {
  Rng rng(8);
  auto search = random_tensor<double>({1, 3, 5, 5}, rng, false);
  auto templ = DT::zeros({1, 3, 2, 2});
  auto resp = depthwise_xcorr(search, templ);
  for (double v : resp.data()) CHECK(v == 0.0);
}

TEST_CASE("depthwise_xcorr matches the sliding-window reference") {
  Rng rng(43);
  auto s = random_tensor<double>({1, 3, 8, 8}, rng, false);
  auto t = random_tensor<double>({1, 3, 4, 4}, rng, false);
  auto y = depthwise_xcorr(s, t);
  auto want = ref::depthwise_xcorr(s.data(), 1, 3, 8, 8, t.data(), 4, 4);
  REQUIRE(y.data().size() == want.size());
  for (size_t i = 0; i < want.size(); ++i)
    CHECK(y.data()[i] == doctest::Approx(want[i]).epsilon(1e-6));
}

TEST_CASE("depthwise_xcorr rejects oversized templates") {
  auto s = DT::filled({1, 1, 3, 3}, 1.0);
  auto t = DT::filled({1, 1, 4, 4}, 1.0);
  CHECK_THROWS_AS(depthwise_xcorr(s, t), DimensionError);
}

TEST_CASE("grad_reverse forward is bit-identical, backward flips sign") {
  auto x = DT::from_data({2}, {1.0, -2.0}, true);
  auto y = grad_reverse(x, 1.0);
  CHECK(y.data() == x.data());

  // Incoming grad (1, -2): weight the sum.
  auto w = DT::from_data({2}, {1.0, -2.0});
  auto loss = sum(mul(y, w));
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(-1.0));
  CHECK(x.grad()[1] == doctest::Approx(2.0));
}

TEST_CASE("grad_reverse with lambda 0 blocks the gradient") {
  auto x = DT::from_data({3}, {1.0, 2.0, 3.0}, true);
  auto loss = sum(grad_reverse(x, 0.0));
  backward(loss);
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("grad_reverse scales exactly like a negated branch") {
  Rng rng(99);
  const double lam = 0.7;
  auto x1 = random_tensor<double>({4}, rng, true);
  auto x2 = DT::from_data({4}, x1.data(), true);
  auto w = random_tensor<double>({4}, rng, false);
  backward(sum(mul(grad_reverse(x1, lam), w)));
  backward(sum(mul(x2, w)));
  for (size_t i = 0; i < 4; ++i)
    CHECK(x1.grad()[i] == doctest::Approx(-lam * x2.grad()[i]).epsilon(1e-12));
}

TEST_CASE("backward of sum gives all-ones gradient") {
  auto x = DT::filled({2, 3}, 5.0, true);
  backward(sum(x));
  for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of sum(x*x) gives 2x") {
  auto x = DT::from_data({1}, {3.0}, true);
  backward(sum(mul(x, x)));
  CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("backward requires a scalar loss") {
  auto x = DT::filled({2}, 1.0, true);
  auto y = scale(x, 2.0);
  CHECK_THROWS_AS(backward(y), ContractError);
}

TEST_CASE("repeated backward accumulates leaf gradients") {
  auto x = DT::from_data({1}, {3.0}, true);
  auto loss = sum(mul(x, x));
  backward(loss);
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(12.0));
}

TEST_CASE("bce of p=0.5 is ln 2") {
  auto p = DT::filled({4}, 0.5);
  auto t = DT::filled({4}, 1.0);
  CHECK(binary_cross_entropy(p, t).item() == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("softmax rows sum to one and are shift-invariant") {
  Rng rng(3);
  auto x = random_tensor<double>({2, 5}, rng, false, -30.0, 30.0);
  auto y = softmax(x, 1);
  for (int r = 0; r < 2; ++r) {
    double s = 0;
    for (int i = 0; i < 5; ++i) s += y.data()[static_cast<size_t>(r * 5 + i)];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("select picks the indexed slice and routes gradient") {
  auto x = DT::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  auto y = select(x, 1, 2);
  CHECK(y.shape() == Shape{2});
  CHECK(y.data()[0] == 3.0);
  CHECK(y.data()[1] == 6.0);
  backward(sum(y));
  CHECK(x.grad() == std::vector<double>{0, 0, 1, 0, 0, 1});
}

TEST_CASE("gradient checks for every primitive") {
  Rng rng(1234);
  const double tol = 1e-6;

  auto check = [&](const char* name, datk::testing::GradCheckResult r) {
    INFO(std::string(name) << ": max rel err " << r.max_rel_err << " at " << r.worst);
    CHECK(r.ok(tol));
  };

  check("add", grad_check<double>(
                   [](const std::vector<DT>& in) { return sum(add(in[0], in[1])); },
                   {random_tensor<double>({3, 4}, rng, true), random_tensor<double>({3, 4}, rng, true)}));
  check("sub+mul", grad_check<double>(
                       [&](const std::vector<DT>& in) {
                         return weighted_sum(mul(sub(in[0], in[1]), in[1]), 555);
                       },
                       {random_tensor<double>({3, 4}, rng, true),
                        random_tensor<double>({3, 4}, rng, true)}));
  check("scale", grad_check<double>(
                     [](const std::vector<DT>& in) { return sum(scale(in[0], 2.5)); },
                     {random_tensor<double>({5}, rng, true)}));
  check("mul_scalar",
        grad_check<double>(
            [](const std::vector<DT>& in) { return sum(mul_scalar(in[0], in[1])); },
            {random_tensor<double>({3, 3}, rng, true), random_tensor<double>({1}, rng, true)}));
  check("relu", grad_check<double>(
                    [&](const std::vector<DT>& in) { return weighted_sum(relu(in[0]), 555); },
                    {random_tensor<double>({4, 4}, rng, true)}));
  check("sigmoid", grad_check<double>(
                       [&](const std::vector<DT>& in) { return weighted_sum(sigmoid(in[0]), 555); },
                       {random_tensor<double>({4, 4}, rng, true)}));
  check("softmax", grad_check<double>(
                       [&](const std::vector<DT>& in) { return weighted_sum(softmax(in[0], 1), 555); },
                       {random_tensor<double>({3, 5}, rng, true)}));
  check("select", grad_check<double>(
                      [&](const std::vector<DT>& in) { return weighted_sum(select(in[0], 1, 1), 555); },
                      {random_tensor<double>({3, 4}, rng, true)}));
  check("reshape", grad_check<double>(
                       [&](const std::vector<DT>& in) {
                         return weighted_sum(reshape(in[0], {4, 3}), 555);
                       },
                       {random_tensor<double>({3, 4}, rng, true)}));
  // Forward of grad_reverse is identity, so the numeric derivative sees
  // the plain function; the analytic gradient must equal -lambda times it.
  check("grad_reverse composition",
        grad_check<double>(
            [&](const std::vector<DT>& in) {
              return weighted_sum(sigmoid(grad_reverse(in[0], 0.8)), 555);
            },
            {random_tensor<double>({3, 3}, rng, true)}, 1e-5, 1e-6, -0.8));
  check("linear", grad_check<double>(
                      [&](const std::vector<DT>& in) {
                        return weighted_sum(linear(in[0], in[1], in[2]), 555);
                      },
                      {random_tensor<double>({3, 4}, rng, true),
                       random_tensor<double>({2, 4}, rng, true),
                       random_tensor<double>({2}, rng, true)}));
  check("bias_add", grad_check<double>(
                        [&](const std::vector<DT>& in) {
                          return weighted_sum(bias_add(in[0], in[1]), 555);
                        },
                        {random_tensor<double>({2, 3, 2, 2}, rng, true),
                         random_tensor<double>({3}, rng, true)}));
  check("conv2d", grad_check<double>(
                      [&](const std::vector<DT>& in) {
                        return weighted_sum(conv2d(in[0], in[1], 2, 1), 555);
                      },
                      {random_tensor<double>({2, 2, 5, 5}, rng, true),
                       random_tensor<double>({3, 2, 3, 3}, rng, true)}));
  check("depthwise_xcorr", grad_check<double>(
                               [&](const std::vector<DT>& in) {
                                 return weighted_sum(depthwise_xcorr(in[0], in[1]), 555);
                               },
                               {random_tensor<double>({1, 2, 6, 6}, rng, true),
                                random_tensor<double>({1, 2, 3, 3}, rng, true)}));
  check("maxpool2d", grad_check<double>(
                         [&](const std::vector<DT>& in) {
                           return weighted_sum(maxpool2d(in[0], 2, 2), 555);
                         },
                         {random_tensor<double>({1, 2, 4, 4}, rng, true)}));
  check("bce", grad_check<double>(
                   [&](const std::vector<DT>& in) {
                     return weighted_sum(bce_map(in[0], in[1]), 555);
                   },
                   {random_prob_tensor<double>({3, 3}, rng, true),
                    random_prob_tensor<double>({3, 3}, rng, true)}));
  check("smooth_l1", grad_check<double>(
                         [&](const std::vector<DT>& in) {
                           return weighted_sum(smooth_l1_map(in[0], in[1]), 555);
                         },
                         {random_tensor<double>({3, 3}, rng, true),
                          random_tensor<double>({3, 3}, rng, true)}));
  check("bilinear_sample",
        grad_check<double>(
            [&](const std::vector<DT>& in) {
              const std::vector<std::array<double, 2>> pts = {
                  {0.3, 0.7}, {1.9, 2.2}, {3.4, 1.1}, {-0.4, 0.2}, {3.9, 3.8}};
              return weighted_sum(bilinear_sample(in[0], pts), 555);
            },
            {random_tensor<double>({1, 2, 4, 4}, rng, true)}));
  check("roi_align", grad_check<double>(
                         [&](const std::vector<DT>& in) {
                           const BBox box{3.1, 2.7, 9.5, 11.2};
                           return weighted_sum(roi_align(in[0], 0, box, 2.0), 555);
                         },
                         {random_tensor<double>({1, 2, 8, 8}, rng, true)}));
}

TEST_CASE("graph with grad_reverse equals plain graph with scaled negation") {
  // Same composite function twice; the only difference is a GRL on one
  // branch. Leaf grads must match the analytic -lambda relation.
  const double lam = 1.3;
  auto make_inputs = [&](uint64_t seed) {
    Rng r(seed);
    return std::pair{random_tensor<double>({2, 3}, r, true), random_tensor<double>({3, 3}, r, true)};
  };
  auto [x1, w1] = make_inputs(5);
  auto [x2, w2] = make_inputs(5);
  auto b = DT::zeros({3});

  backward(sum(sigmoid(linear(grad_reverse(x1, lam), w1, b))));
  backward(sum(sigmoid(linear(x2, w2, b))));
  for (size_t i = 0; i < x1.data().size(); ++i)
    CHECK(x1.grad()[i] == doctest::Approx(-lam * x2.grad()[i]).epsilon(1e-9));
}

TEST_CASE("forward is deterministic across runs") {
  auto run = [] {
    Rng rng(77);
    auto x = random_tensor<float>({2, 3, 8, 8}, rng, false);
    auto k = random_tensor<float>({4, 3, 3, 3}, rng, false);
    return conv2d(x, k, 1, 1).data();
  };
  CHECK(run() == run());
}
