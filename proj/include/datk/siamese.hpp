#pragma once

#include <optional>

#include "datk/anchors.hpp"
#include "datk/dataset.hpp"
#include "datk/model.hpp"

namespace datk {

// Context-padded square crop side for a box: sqrt((w+p)(h+p)) with
// p = context_amount*(w+h) (0.5 gives the SiamFC/SiamRPN convention).
double context_side(const BBox& box, double context_amount);

// Square sub-window resampled to out_size x out_size, bilinear, values
// scaled to [0,1]. Out-of-frame areas are padded with the per-channel
// frame mean.
Tensor crop_subwindow(const Image& frame, double cx, double cy, double side, int out_size);

struct TrainingPair {
  Tensor z;  // [1,3,T,T]
  Tensor x;  // [1,3,S,S]
  bool has_labels = false;
  // Anchor-major label maps, present when has_labels (source domain only;
  // pseudo-cropped target pairs never carry supervision).
  std::vector<float> cls_label;   // k*r*r: 1 pos, 0 neg, -1 ignore
  std::vector<float> reg_target;  // 4k*r*r
  std::vector<float> reg_mask;    // k*r*r
  int positives = 0;
};

inline constexpr double kPosIouThreshold = 0.6;
inline constexpr double kNegIouThreshold = 0.3;

// Crops centered on the given boxes (plus an optional jittered search
// shift drawn from aug_rng for training variety). with_labels assigns
// anchor classification/regression targets from the search box.
TrainingPair make_training_pair(const Image& tpl_frame, const BBox& tpl_box,
                                const Image& srch_frame, const BBox& srch_box,
                                const ModelConfig& cfg, const AnchorGrid& grid, bool with_labels,
                                Rng* aug_rng);

// Score-sorted decode of the whole response map; scores are the softmax
// foreground probabilities. Boxes are in search-crop coordinates.
std::vector<Prediction> decode_boxes(const Tensor& cls_map, const Tensor& reg_map,
                                     const AnchorGrid& grid);

struct TrackState {
  BackboneFeatures templ;  // fixed after initialization
  BBox box;
  double score = 1.0;
};

TrackState track_init(const SiamModel& model, const Image& frame, const BBox& box);
Prediction track_step(const SiamModel& model, TrackState& state, const Image& frame,
                      const AnchorGrid& grid);

// One prediction per frame; frame 0 echoes the initialization box.
std::vector<Prediction> track_sequence(const SiamModel& model, const SequenceDataset& seq,
                                       std::optional<int> init_frame = std::nullopt);

}  // namespace datk
