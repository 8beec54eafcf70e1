#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "datk/errors.hpp"
#include "datk/rng.hpp"
#include "datk/checkpoint.hpp"
#include "datk/config.hpp"
#include "datk/dataset.hpp"
#include "datk/synthseq.hpp"
#include "support/tmpdir.hpp"

using namespace datk;
namespace fs = std::filesystem;

TEST_CASE("sequence write -> load round trip preserves all fields") {
  datk::testing::TmpDir tmp("io_rt");
  SceneSpec spec;
  spec.length = 5;
  auto seq = generate_sequence(spec, 21, "rt");
  seq.meta.split = "train";
  save_sequence(tmp.str(), seq);

  auto loaded = load_sequence(tmp.sub("rt"));
  CHECK(loaded.name == "rt");
  CHECK(loaded.size() == 5);
  CHECK(loaded.has_depth());
  CHECK(loaded.meta.split == "train");
  CHECK(loaded.meta.seed == 21);
  CHECK(loaded.meta.domain == "clean");
  for (int i = 0; i < 5; ++i) {
    CHECK(loaded.frame(i).data == seq.frames[static_cast<size_t>(i)].data);
    CHECK(loaded.depth(i).values == seq.depths[static_cast<size_t>(i)].values);
    CHECK(loaded.boxes[static_cast<size_t>(i)].x ==
          doctest::Approx(seq.boxes[static_cast<size_t>(i)].x).epsilon(1e-3));
  }
}

TEST_CASE("missing frame is an integrity error naming the file") {
  datk::testing::TmpDir tmp("io_missing");
  SceneSpec spec;
  spec.length = 6;
  auto seq = generate_sequence(spec, 22, "gap");
  save_sequence(tmp.str(), seq);
  fs::remove(fs::path(tmp.sub("gap")) / "frames" / "000003.png");
  try {
    load_sequence(tmp.sub("gap"));
    FAIL("expected IntegrityError");
  } catch (const IntegrityError& e) {
    CHECK(std::string(e.what()).find("000003") != std::string::npos);
  }
}

TEST_CASE("groundtruth line parses into a box; malformed lines name the location") {
  datk::testing::TmpDir tmp("io_gt");
  {
    std::ofstream out(tmp.sub("gt.txt"));
    out << "10,20,30,40\n";
  }
  auto boxes = load_groundtruth(tmp.sub("gt.txt"));
  REQUIRE(boxes.size() == 1);
  CHECK(boxes[0].x == 10.0);
  CHECK(boxes[0].y == 20.0);
  CHECK(boxes[0].w == 30.0);
  CHECK(boxes[0].h == 40.0);

  {
    std::ofstream out(tmp.sub("bad.txt"));
    out << "10,20,30,40\n10,oops,30,40\n";
  }
  try {
    load_groundtruth(tmp.sub("bad.txt"));
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bad.txt:2") != std::string::npos);
  }
}

TEST_CASE("frame/annotation count mismatch is an integrity error") {
  datk::testing::TmpDir tmp("io_count");
  SceneSpec spec;
  spec.length = 4;
  auto seq = generate_sequence(spec, 23, "cnt");
  save_sequence(tmp.str(), seq);
  {
    std::ofstream out(fs::path(tmp.sub("cnt")) / "groundtruth.txt", std::ios::app);
    out << "1,1,2,2\n";
  }
  CHECK_THROWS_AS(load_sequence(tmp.sub("cnt")), IntegrityError);
}

TEST_CASE("checkpoint save -> load -> save produces identical bytes") {
  datk::testing::TmpDir tmp("ckpt");
  std::vector<NamedTensor> tensors;
  Rng rng(31);
  tensors.push_back({"backbone.conv1.w", {4, 3, 3, 3}, {}});
  tensors.push_back({"head.cls.b", {2}, {}});
  for (auto& t : tensors) {
    t.data.resize(static_cast<size_t>(shape_numel(t.shape)));
    for (auto& v : t.data) v = static_cast<float>(rng.normal());
  }
  save_checkpoint(tmp.sub("a.ckpt"), tensors);
  auto loaded = load_checkpoint(tmp.sub("a.ckpt"));
  REQUIRE(loaded.size() == tensors.size());
  CHECK(loaded[0].name == "backbone.conv1.w");
  CHECK(loaded[0].shape == Shape{4, 3, 3, 3});
  CHECK(loaded[0].data == tensors[0].data);
  save_checkpoint(tmp.sub("b.ckpt"), loaded);

  std::ifstream a(tmp.sub("a.ckpt"), std::ios::binary), b(tmp.sub("b.ckpt"), std::ios::binary);
  std::vector<char> ba((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::vector<char> bb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(ba == bb);
}

TEST_CASE("truncated checkpoint is a format error, nothing partial returned") {
  datk::testing::TmpDir tmp("ckpt_trunc");
  std::vector<NamedTensor> tensors = {{"w", {8}, std::vector<float>(8, 1.0f)}};
  save_checkpoint(tmp.sub("full.ckpt"), tensors);
  const auto full = fs::file_size(tmp.sub("full.ckpt"));
  {
    std::ifstream in(tmp.sub("full.ckpt"), std::ios::binary);
    std::vector<char> bytes(static_cast<size_t>(full) - 7);
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    std::ofstream out(tmp.sub("cut.ckpt"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(tmp.sub("cut.ckpt")), FormatError);
  std::ofstream bad(tmp.sub("junk.ckpt"), std::ios::binary);
  bad << "NOPE1234";
  bad.close();
  CHECK_THROWS_AS(load_checkpoint(tmp.sub("junk.ckpt")), FormatError);
}

TEST_CASE("predictions round trip") {
  datk::testing::TmpDir tmp("pred");
  std::vector<Prediction> preds = {{{1.5, 2.25, 10.0, 12.0}, 0.875}, {{0, 0, 4, 4}, 0.5}};
  save_predictions(tmp.sub("p.txt"), preds);
  auto loaded = load_predictions(tmp.sub("p.txt"));
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].box.x == doctest::Approx(1.5));
  CHECK(loaded[0].score == doctest::Approx(0.875));
}

TEST_CASE("config parses key = value with comments and types") {
  auto cfg = KvConfig::parse("# comment\nepochs = 19\nlr=5e-3 # inline\nname = run a\nflag = true\n");
  CHECK(cfg.get_int("epochs", 0) == 19);
  CHECK(cfg.get_double("lr", 0.0) == doctest::Approx(5e-3));
  CHECK(cfg.get_str("name", "") == "run a");
  CHECK(cfg.get_bool("flag", false));
  CHECK(cfg.get_int("absent", 7) == 7);
  CHECK_THROWS_AS(KvConfig::parse("novalue\n"), FormatError);
  CHECK_THROWS_AS(cfg.get_int("name", 0), ConfigError);
}

TEST_CASE("dmap round trip and bad magic") {
  datk::testing::TmpDir tmp("dmap");
  DepthMap d(5, 4);
  Rng rng(17);
  for (auto& v : d.values) v = static_cast<float>(rng.uniform(0.0, 80.0));
  write_dmap(tmp.sub("d.dmap"), d);
  auto loaded = read_dmap(tmp.sub("d.dmap"));
  CHECK(loaded.width == 5);
  CHECK(loaded.height == 4);
  CHECK(loaded.values == d.values);

  std::ofstream bad(tmp.sub("bad.dmap"), std::ios::binary);
  bad << "PAMD????";
  bad.close();
  CHECK_THROWS_AS(read_dmap(tmp.sub("bad.dmap")), FormatError);
}
