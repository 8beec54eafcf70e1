#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "datk/bbox.hpp"
#include "datk/image.hpp"

namespace datk {

// Sidecar metadata stored as <seq>/meta.json.
struct SequenceMeta {
  uint64_t seed = 0;
  std::string domain = "clean";  // clean | hazed | tir
  std::string split;             // train | eval | ""
  std::array<double, 3> beta{0.0, 0.0, 0.0};
  std::string depth_unit = "meters";
  std::string spec_json;  // generator spec, serialized, optional
};

// Fully materialized sequence, used by generators and converters.
struct SequenceData {
  std::string name;
  std::vector<Image> frames;
  std::vector<DepthMap> depths;  // empty when absent
  std::vector<BBox> boxes;
  SequenceMeta meta;
};

// On-disk handle. Frames and depth maps load lazily so corpora scale past
// memory; annotations and metadata are eagerly validated.
struct SequenceDataset {
  std::string name;
  std::string dir;
  std::vector<std::string> frame_paths;
  std::vector<std::string> depth_paths;  // empty when the sequence has no depth
  std::vector<BBox> boxes;
  SequenceMeta meta;

  int size() const { return static_cast<int>(frame_paths.size()); }
  bool has_depth() const { return !depth_paths.empty(); }
  Image frame(int i) const;
  DepthMap depth(int i) const;
};

// Layout: <root>/<seq>/frames/%06d.png, <root>/<seq>/depth/%06d.dmap,
// <root>/<seq>/groundtruth.txt (one "x,y,w,h" line per frame),
// <root>/<seq>/meta.json.
void save_sequence(const std::string& root, const SequenceData& seq);
SequenceDataset load_sequence(const std::string& dir);
std::vector<SequenceDataset> load_dataset(const std::string& root);

SequenceData materialize(const SequenceDataset& seq);

// Prediction files: one "x,y,w,h,score" line per frame.
struct Prediction {
  BBox box;
  double score = 0.0;
};
void save_predictions(const std::string& path, const std::vector<Prediction>& preds);
std::vector<Prediction> load_predictions(const std::string& path);

std::vector<BBox> load_groundtruth(const std::string& path);
void save_groundtruth(const std::string& path, const std::vector<BBox>& boxes);

std::string meta_to_json(const SequenceMeta& meta);
SequenceMeta meta_from_json(const std::string& text, const std::string& origin);

}  // namespace datk
