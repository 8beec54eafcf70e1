#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "datk/domain_adapt.hpp"
#include "datk/errors.hpp"
#include "datk/siamese.hpp"
#include "ref/ref_ops.hpp"
#include "support/gradcheck.hpp"

using namespace datk;
using datk::testing::grad_check;
using datk::testing::random_tensor;
using datk::testing::weighted_sum;

using DT = TensorT<double>;

namespace {

// Classifier rigged to output a constant probability.
PixelDomainClassifierT<double> constant_pda(double prob, int in_ch = 4, int hidden = 8) {
  Rng rng(1);
  PixelDomainClassifierT<double> cls;
  cls.init(in_ch, hidden, rng);
  for (auto& v : cls.c2.w.data()) v = 0.0;
  // sigmoid(b) = prob  =>  b = log(prob / (1 - prob))
  cls.c2.b.data()[0] = std::log(prob / (1.0 - prob));
  return cls;
}

SemanticDomainClassifierT<double> constant_sda(double prob, int ch = 4, int size = 5) {
  Rng rng(2);
  SemanticDomainClassifierT<double> cls;
  cls.init(ch, size, 8, rng);
  for (auto& v : cls.f2.w.data()) v = 0.0;
  cls.f2.b.data()[0] = std::log(prob / (1.0 - prob));
  return cls;
}

}  // namespace

TEST_CASE("pda_loss at p=0.5 is ln 2 regardless of domain") {
  auto cls = constant_pda(0.5);
  Rng rng(3);
  auto fz = random_tensor<double>({1, 4, 3, 3}, rng, false);
  auto fx = random_tensor<double>({1, 4, 5, 5}, rng, false);
  for (auto d : {DomainLabel::kSource, DomainLabel::kTarget}) {
    const double loss = pda_loss(fz, fx, d, cls, 1.0).item();
    CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("pda_loss near zero for a perfect classifier") {
  auto cls = constant_pda(1.0 - 1e-9);
  Rng rng(4);
  auto fz = random_tensor<double>({1, 4, 3, 3}, rng, false);
  auto fx = random_tensor<double>({1, 4, 4, 4}, rng, false);
  CHECK(pda_loss(fz, fx, DomainLabel::kTarget, cls, 1.0).item() < 1e-5);
}

TEST_CASE("pda_loss equals the per-pixel BCE oracle") {
  Rng rng(5);
  PixelDomainClassifierT<double> cls;
  cls.init(3, 6, rng);
  auto fz = random_tensor<double>({1, 3, 4, 4}, rng, false);
  auto fx = random_tensor<double>({1, 3, 6, 6}, rng, false);
  const double loss = pda_loss(fz, fx, DomainLabel::kTarget, cls, 0.7).item();

  // Oracle: run the classifier forward (identical math path for the
  // values; GRL is forward-identity) and hand-sum the BCE per map.
  auto hand = [&](const DT& f) {
    auto p = cls.forward(f);
    double acc = 0.0;
    for (double v : p.data()) {
      const double pc = std::min(std::max(v, 1e-6), 1.0 - 1e-6);
      acc += -std::log(pc);  // D = 1
    }
    return acc / static_cast<double>(p.numel());
  };
  CHECK(loss == doctest::Approx(0.5 * (hand(fz) + hand(fx))).epsilon(1e-9));
}

TEST_CASE("roi_align of a constant map is constant") {
  auto feat = DT::filled({1, 3, 8, 8}, 2.5);
  auto out = roi_align(feat, 0, BBox{10.0, 6.0, 30.0, 22.0}, 8.0);
  CHECK(out.shape() == Shape{3, 5, 5});
  for (double v : out.data()) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("roi_align hits exact cells when bins align with centers") {
  // stride 1, box from (1,1) to (6,6): bin centers land at x = 1.5, 2.5,
  // .. 5.5 in feature coordinates.
  std::vector<double> data(8 * 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) data[static_cast<size_t>(y) * 8 + x] = y * 10.0 + x;
  auto feat = DT::from_data({1, 1, 8, 8}, data);
  auto out = roi_align(feat, 0, BBox{1.0, 1.0, 5.0, 5.0}, 1.0);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const double want = (1.5 + i) * 10.0 + (1.5 + j);
      CHECK(out.data()[static_cast<size_t>(i) * 5 + j] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("roi_align matches the dense bilinear reference") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    auto feat = random_tensor<double>({1, 3, 9, 7}, rng, false);
    const BBox box{rng.uniform(-4.0, 30.0), rng.uniform(-4.0, 40.0), rng.uniform(3.0, 40.0),
                   rng.uniform(3.0, 30.0)};
    const double stride = 8.0;
    auto got = roi_align(feat, 0, box, stride);
    auto want = ref::roi_align(feat.data(), 3, 9, 7, box, stride, 5);
    REQUIRE(got.data().size() == want.size());
    for (size_t i = 0; i < want.size(); ++i)
      CHECK(got.data()[i] == doctest::Approx(want[i]).epsilon(1e-9));
  }
}

TEST_CASE("roi_align rejects degenerate boxes") {
  auto feat = DT::filled({1, 1, 4, 4}, 1.0);
  CHECK_THROWS_AS(roi_align(feat, 0, BBox{1, 1, 0, 3}, 1.0), ContractError);
}

TEST_CASE("sda_loss trivial values") {
  auto cls = constant_sda(0.5);
  std::vector<DT> rois = {DT::filled({4, 5, 5}, 0.3), DT::filled({4, 5, 5}, -0.2)};
  CHECK(sda_loss(rois, DomainLabel::kSource, cls, 1.0).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  auto perfect = constant_sda(1e-9);
  std::vector<DT> one = {DT::filled({4, 5, 5}, 0.1)};
  CHECK(sda_loss(one, DomainLabel::kSource, perfect, 1.0).item() < 1e-5);

  CHECK(sda_loss({}, DomainLabel::kSource, cls, 1.0).item() == 0.0);
}

TEST_CASE("sda_loss equals the hand-summed BCE over 4 ROIs") {
  Rng rng(7);
  SemanticDomainClassifierT<double> cls;
  cls.init(3, 5, 8, rng);
  std::vector<DT> rois;
  for (int i = 0; i < 4; ++i) rois.push_back(random_tensor<double>({3, 5, 5}, rng, false));
  const double got = sda_loss(rois, DomainLabel::kTarget, cls, 1.0).item();
  double want = 0.0;
  for (const auto& r : rois) {
    const double s = cls.forward(r).item();
    const double sc = std::min(std::max(s, 1e-6), 1.0 - 1e-6);
    want += -std::log(sc);
  }
  want /= 4.0;
  CHECK(got == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("pda and sda losses backprop and pass gradient checks") {
  Rng rng(8);
  PixelDomainClassifierT<double> pda_cls;
  pda_cls.init(2, 4, rng);
  auto r = grad_check<double>(
      [&](const std::vector<DT>& in) {
        return pda_loss(in[0], in[1], DomainLabel::kTarget, pda_cls, 0.0);
      },
      {random_tensor<double>({1, 2, 3, 3}, rng, true),
       random_tensor<double>({1, 2, 4, 4}, rng, true)});
  // lambda 0 blocks feature gradients entirely; use lambda 1 with the
  // numeric scale -1 for the feature path.
  auto r1 = grad_check<double>(
      [&](const std::vector<DT>& in) {
        return pda_loss(in[0], in[1], DomainLabel::kTarget, pda_cls, 1.0);
      },
      {random_tensor<double>({1, 2, 3, 3}, rng, true),
       random_tensor<double>({1, 2, 4, 4}, rng, true)},
      1e-5, 1e-6, -1.0);
  INFO("lambda0 max rel " << r.max_rel_err << ", lambda1 reversed max rel " << r1.max_rel_err);
  CHECK(r.max_rel_err == 0.0);  // exact zeros
  CHECK(r1.ok(1e-6));

  SemanticDomainClassifierT<double> sda_cls;
  sda_cls.init(2, 5, 8, rng);
  auto r2 = grad_check<double>(
      [&](const std::vector<DT>& in) {
        std::vector<DT> rois = {in[0], in[1]};
        return sda_loss(rois, DomainLabel::kSource, sda_cls, 1.0);
      },
      {random_tensor<double>({2, 5, 5}, rng, true), random_tensor<double>({2, 5, 5}, rng, true)},
      1e-5, 1e-6, -1.0);
  CHECK(r2.ok(1e-6));
}

TEST_CASE("classifier parameters descend while features ascend (10-param toy, finite diff)") {
  // f(x) = w x (2->2 linear, 6 params incl. bias), classifier v (2->1,
  // 3 params): L = BCE(sigmoid(v * GRL(f)), D). Finite differences confirm
  // the two gradient directions.
  Rng rng(9);
  auto w = random_tensor<double>({2, 2}, rng, true);
  auto wb = random_tensor<double>({2}, rng, true);
  auto v = random_tensor<double>({1, 2}, rng, true);
  auto vb = random_tensor<double>({1}, rng, true);
  auto x = random_tensor<double>({3, 2}, rng, false);
  auto labels = DT::filled({3, 1}, 1.0);

  auto loss_fn = [&](const std::vector<DT>& in) {
    auto feat = linear(x, in[0], in[1]);
    auto p = sigmoid(linear(grad_reverse(feat, 1.0), in[2], in[3]));
    return binary_cross_entropy(p, labels);
  };

  // Classifier params: analytic == numeric (descent direction).
  {
    auto r = grad_check<double>(
        [&](const std::vector<DT>& in) { return loss_fn({w, wb, in[0], in[1]}); }, {v, vb});
    CHECK(r.ok(1e-6));
  }
  // Feature params: analytic == -numeric (ascent via GRL).
  {
    auto r = grad_check<double>(
        [&](const std::vector<DT>& in) { return loss_fn({in[0], in[1], v, vb}); }, {w, wb},
        1e-5, 1e-6, -1.0);
    CHECK(r.ok(1e-6));
  }
}

TEST_CASE("adversarial contract check passes on a live model") {
  ModelConfig cfg;
  SiamModel model;
  model.init(cfg, 11);
  DomainAdaptT<float> da;
  da.init(cfg, 11);
  Rng rng(12);
  auto src = datk::testing::random_tensor<float>({1, 3, 64, 64}, rng, false, 0.0, 1.0);
  auto tgt = datk::testing::random_tensor<float>({1, 3, 64, 64}, rng, false, 0.3, 1.0);
  const auto report = adversarial_contract_check(model, da, src, tgt, 1, 1e-2);
  INFO("grl_dot " << report.grl_dot << " cls " << report.classifier_loss_before << "->"
                  << report.classifier_loss_after << " backbone " << report.backbone_loss_before
                  << "->" << report.backbone_loss_after);
  CHECK(report.grl_dot < 0.0);
  CHECK(report.grad_norm_lambda0 == 0.0);
  CHECK(report.grad_norm_no_grl > 0.0);
  CHECK(report.classifier_loss_after < report.classifier_loss_before);
  CHECK(report.backbone_loss_after > report.backbone_loss_before);
  CHECK(report.ok());
}

TEST_CASE("GRL sign property holds per level for PDA and SDA branches") {
  ModelConfig cfg;
  SiamModel model;
  model.init(cfg, 21);
  DomainAdaptT<float> da;
  da.init(cfg, 21);
  Rng rng(22);
  auto crop = datk::testing::random_tensor<float>({1, 3, 64, 64}, rng, false, 0.0, 1.0);

  for (int level = 0; level < 3; ++level) {
    auto params = model.params();
    auto grads_with = [&](bool use_grl) {
      for (auto& p : params) p.tensor.zero_grad();
      auto f = model.extract_features(crop);
      const auto& fl = f.levels[static_cast<size_t>(level)];
      TensorT<float> loss;
      auto in = use_grl ? grad_reverse(fl, 1.0f) : fl;
      auto p = da.pda[static_cast<size_t>(level)].forward(in);
      loss = mean(bce_map(p, TensorT<float>::filled(p.shape(), 1.0f)));
      backward(loss);
      std::vector<double> g;
      for (auto& q : params)
        for (float v : q.tensor.grad()) g.push_back(v);
      return g;
    };
    const auto g1 = grads_with(true);
    const auto g2 = grads_with(false);
    double dot = 0.0;
    for (size_t i = 0; i < g1.size(); ++i) dot += g1[i] * g2[i];
    INFO("PDA level " << level << " dot " << dot);
    CHECK(dot < 0.0);
  }
}

TEST_CASE("a_distance formula arithmetic") {
  CHECK(a_distance_from_error(0.25) == doctest::Approx(1.0));
  CHECK(a_distance_from_error(0.5) == doctest::Approx(0.0));
  CHECK(a_distance_from_error(0.0) == doctest::Approx(2.0));
  CHECK(a_distance_from_error(0.7) == doctest::Approx(0.0));  // clamped
}

TEST_CASE("a_distance calibration: identical vs separated Gaussians") {
  auto gaussians = [](double mean, double sigma, int n, uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < n; ++i)
      rows.push_back({rng.normal(mean, sigma), rng.normal(mean, sigma), rng.normal(mean, sigma)});
    return rows;
  };
  const auto same_a = gaussians(0.0, 1.0, 200, 31);
  const auto same_b = gaussians(0.0, 1.0, 200, 32);
  const double d_same = a_distance(same_a, same_b, 7);
  INFO("identical-distribution d_A = " << d_same);
  CHECK(d_same <= 0.3);

  const auto sep_a = gaussians(-5.0, 0.1, 200, 33);
  const auto sep_b = gaussians(+5.0, 0.1, 200, 34);
  const double d_sep = a_distance(sep_a, sep_b, 7);
  INFO("separated-cluster d_A = " << d_sep);
  CHECK(d_sep >= 1.8);

  CHECK_THROWS_AS(a_distance(gaussians(0, 1, 10, 1), gaussians(0, 1, 40, 2), 1), ContractError);
}

TEST_CASE("a_distance is deterministic per seed") {
  Rng rng(41);
  std::vector<std::vector<double>> a, b;
  for (int i = 0; i < 64; ++i) {
    a.push_back({rng.normal(), rng.normal()});
    b.push_back({rng.normal(1.0, 1.0), rng.normal(1.0, 1.0)});
  }
  CHECK(a_distance(a, b, 5) == a_distance(a, b, 5));
}

TEST_CASE("adversarial training confuses the two-Gaussian benchmark") {
  const auto result = domain_confusion_benchmark(3, 300);
  INFO("control d_A " << result.d_control << ", adversarial d_A " << result.d_adversarial);
  CHECK(result.d_control > 1.0);
  CHECK(result.d_adversarial < result.d_control);
  CHECK(result.d_control - result.d_adversarial >= 0.3 * result.d_control);
}
