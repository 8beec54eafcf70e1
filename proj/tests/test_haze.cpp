#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "datk/errors.hpp"
#include "datk/haze.hpp"
#include "datk/rng.hpp"
#include "datk/synthseq.hpp"
#include "ref/ref_ops.hpp"
#include "support/tmpdir.hpp"

using namespace datk;

namespace {

Image random_image(int w, int h, uint64_t seed) {
  Rng rng(seed);
  Image img(w, h);
  for (auto& b : img.data) b = static_cast<uint8_t>(rng.uniform_int(256));
  return img;
}

DepthMap random_depth(int w, int h, uint64_t seed, double lo = 0.0, double hi = 100.0) {
  Rng rng(seed);
  DepthMap d(w, h);
  for (auto& v : d.values) v = static_cast<float>(rng.uniform(lo, hi));
  return d;
}

}  // namespace

TEST_CASE("transmission is 1 everywhere for beta 0") {
  const DepthMap d = random_depth(8, 6, 1);
  const auto t = transmission(d, HazeParams::uniform(0.0), 0);
  for (double v : t) CHECK(v == 1.0);
}

TEST_CASE("transmission closed form: 1 meter at beta ln2 gives 0.5") {
  DepthMap d(2, 2);
  for (auto& v : d.values) v = 1.0f;
  const auto t = transmission(d, HazeParams::uniform(std::log(2.0)), 1);
  for (double v : t) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("transmission equals the per-pixel scalar oracle exactly") {
  const DepthMap d = random_depth(13, 7, 2);
  HazeParams p = HazeParams::uniform(0.021, 240.0, 0.8, 0.5);
  p.beta = {0.01, 0.02, 0.03};
  for (int c = 0; c < 3; ++c) {
    const auto t = transmission(d, p, c);
    for (size_t i = 0; i < t.size(); ++i) {
      const double want =
          std::exp(-(static_cast<double>(d.values[i]) * p.depth_scale + p.depth_offset) *
                   p.beta[static_cast<size_t>(c)]);
      CHECK(t[i] == want);
    }
  }
}

TEST_CASE("transmission is monotone in depth and beta") {
  DepthMap shallow(1, 1), deep(1, 1);
  shallow.values[0] = 5.0f;
  deep.values[0] = 25.0f;
  const auto p1 = HazeParams::uniform(0.01);
  const auto p2 = HazeParams::uniform(0.03);
  CHECK(transmission(deep, p1, 0)[0] < transmission(shallow, p1, 0)[0]);
  CHECK(transmission(shallow, p2, 0)[0] < transmission(shallow, p1, 0)[0]);
}

TEST_CASE("apply_haze with beta 0 is byte identity") {
  const Image img = random_image(17, 9, 3);
  const DepthMap d = random_depth(17, 9, 4);
  const Image out = apply_haze(img, d, HazeParams::uniform(0.0));
  CHECK(out.data == img.data);
}

TEST_CASE("apply_haze at extreme depth converges to airlight") {
  const Image img = random_image(6, 6, 5);
  DepthMap d(6, 6);
  for (auto& v : d.values) v = 1e7f;
  HazeParams p = HazeParams::uniform(0.05);
  p.airlight = {200.0, 100.0, 50.0};
  const Image out = apply_haze(img, d, p);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      CHECK(out.at(x, y, 0) == 200);
      CHECK(out.at(x, y, 1) == 100);
      CHECK(out.at(x, y, 2) == 50);
    }
}

TEST_CASE("apply_haze rounding: E=200 A=255 t=0.5 gives 228") {
  Image img(1, 1);
  img.data = {200, 200, 200};
  DepthMap d(1, 1);
  d.values[0] = 1.0f;
  HazeParams p = HazeParams::uniform(std::log(2.0));  // t = 0.5 at 1 m
  p.airlight = {255.0, 255.0, 255.0};
  const Image out = apply_haze(img, d, p);
  // 0.5*200 + 0.5*255 = 227.5, rounded half-up.
  CHECK(out.data[0] == 228);
}

TEST_CASE("apply_haze matches the scalar reference on random frames") {
  for (uint64_t s = 0; s < 10; ++s) {
    const Image img = random_image(19, 11, 100 + s);
    const DepthMap d = random_depth(19, 11, 200 + s);
    HazeParams p;
    Rng rng(300 + s);
    p.beta = {rng.uniform(0.0, 0.05), rng.uniform(0.0, 0.05), rng.uniform(0.0, 0.05)};
    p.airlight = {rng.uniform(100.0, 255.0), rng.uniform(100.0, 255.0), rng.uniform(100.0, 255.0)};
    p.depth_scale = rng.uniform(0.5, 2.0);
    p.depth_offset = rng.uniform(0.0, 1.0);
    const Image out = apply_haze(img, d, p);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < 3; ++c) {
          const uint8_t want =
              ref::haze_pixel(img.at(x, y, c), d.at(x, y), p.depth_scale, p.depth_offset,
                              p.beta[static_cast<size_t>(c)], p.airlight[static_cast<size_t>(c)]);
          REQUIRE(out.at(x, y, c) == want);
        }
  }
}

TEST_CASE("apply_haze monotonicity in beta per pixel") {
  const Image img = random_image(9, 9, 7);
  const DepthMap d = random_depth(9, 9, 8, 1.0, 60.0);
  HazeParams pa = HazeParams::uniform(0.01);
  HazeParams pb = HazeParams::uniform(0.02);
  const Image a = apply_haze(img, d, pa);
  const Image b = apply_haze(img, d, pb);
  for (size_t i = 0; i < img.data.size(); ++i) {
    const double e = img.data[i], al = 240.0;
    if (e < al) CHECK(b.data[i] >= a.data[i]);
    if (e > al) CHECK(b.data[i] <= a.data[i]);
  }
}

TEST_CASE("apply_haze rejects mismatched dimensions") {
  const Image img = random_image(8, 8, 9);
  const DepthMap d = random_depth(9, 8, 10);
  CHECK_THROWS_AS(apply_haze(img, d, HazeParams::uniform(0.01)), IntegrityError);
}

TEST_CASE("haze_dataset: boxes preserved, betas disjoint across ranges, deterministic") {
  datk::testing::TmpDir tmp("haze");
  SceneSpecSampler sampler;
  auto corpus = generate_corpus(4, sampler, 99, "train");
  for (const auto& seq : corpus) save_sequence(tmp.sub("clean"), seq);
  auto clean = load_dataset(tmp.sub("clean"));

  auto train = haze_dataset(clean, kTrainBetaRange, 7, tmp.sub("train_hazed"));
  auto eval = haze_dataset(clean, kEvalBetaRange, 7, tmp.sub("eval_hazed"));
  auto train2 = haze_dataset(clean, kTrainBetaRange, 7, tmp.sub("train_hazed2"));

  for (const auto& [name, beta] : train.betas) {
    CHECK(beta >= kTrainBetaRange.lo);
    CHECK(beta <= kTrainBetaRange.hi);
  }
  for (const auto& [name, beta] : eval.betas) {
    CHECK(beta >= kEvalBetaRange.lo);
    CHECK(beta <= kEvalBetaRange.hi);
  }
  // Ranges do not overlap, so the recorded beta sets are disjoint.
  CHECK(kEvalBetaRange.hi < kTrainBetaRange.lo);

  // Determinism: same seed twice gives identical betas and identical bytes.
  for (size_t i = 0; i < train.betas.size(); ++i)
    CHECK(train.betas[i].second == train2.betas[i].second);

  auto hazed = load_dataset(tmp.sub("train_hazed"));
  auto hazed2 = load_dataset(tmp.sub("train_hazed2"));
  REQUIRE(hazed.size() == clean.size());
  for (size_t i = 0; i < hazed.size(); ++i) {
    REQUIRE(hazed[i].boxes.size() == clean[i].boxes.size());
    for (size_t f = 0; f < hazed[i].boxes.size(); ++f) {
      CHECK(hazed[i].boxes[f].x == clean[i].boxes[f].x);
      CHECK(hazed[i].boxes[f].y == clean[i].boxes[f].y);
      CHECK(hazed[i].boxes[f].w == clean[i].boxes[f].w);
      CHECK(hazed[i].boxes[f].h == clean[i].boxes[f].h);
    }
    CHECK(hazed[i].meta.domain == "hazed");
    CHECK(hazed[i].meta.beta[0] > 0.0);
    CHECK(hazed[i].frame(0).data == hazed2[i].frame(0).data);
  }
}

TEST_CASE("haze_dataset with beta 0 sampler is pixel-identical to input") {
  datk::testing::TmpDir tmp("haze0");
  SceneSpecSampler sampler;
  auto corpus = generate_corpus(2, sampler, 5, "train");
  for (const auto& seq : corpus) save_sequence(tmp.sub("clean"), seq);
  auto clean = load_dataset(tmp.sub("clean"));
  haze_dataset(clean, BetaRange{0.0, 0.0}, 1, tmp.sub("pass"));
  auto hazed = load_dataset(tmp.sub("pass"));
  for (size_t i = 0; i < hazed.size(); ++i)
    for (int f = 0; f < hazed[i].size(); ++f)
      CHECK(hazed[i].frame(f).data == clean[i].frame(f).data);
}

TEST_CASE("haze errors on a sequence without depth maps") {
  datk::testing::TmpDir tmp("haze_nodepth");
  SceneSpecSampler sampler;
  auto corpus = generate_corpus(1, sampler, 6, "train");
  corpus[0].depths.clear();
  save_sequence(tmp.sub("clean"), corpus[0]);
  auto clean = load_dataset(tmp.sub("clean"));
  CHECK_THROWS_AS(haze_dataset(clean, kEvalBetaRange, 1, tmp.sub("out")), IntegrityError);
}
