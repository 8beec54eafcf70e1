#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "datk/dataset.hpp"
#include "datk/rng.hpp"

namespace datk {

// Scene description for one generated sequence. Trajectories are drift
// plus a sinusoidal wobble; depth is analytic so haze needs no external
// depth estimator.
struct SceneSpec {
  int width = 160;
  int height = 120;
  int length = 24;

  enum class TargetShape { kRectangle, kEllipse };
  TargetShape shape = TargetShape::kRectangle;
  double base_w = 28.0;
  double base_h = 22.0;
  std::array<uint8_t, 3> color{40, 70, 160};

  double start_x = -1.0;  // box center at frame 0; negative = frame center
  double start_y = -1.0;
  double vel_x = 1.2;  // drift, px/frame
  double vel_y = 0.6;
  double sin_amp = 5.0;
  double sin_period = 18.0;
  double scale_amp = 0.08;  // relative size oscillation

  uint64_t texture_seed = 0;  // 0 = derive from the sequence seed

  double target_depth = 8.0;  // meters
  double bg_depth_top = 20.0;
  double bg_depth_bottom = 80.0;

  std::string to_json() const;
  static SceneSpec from_json(const std::string& text);
};

// Deterministic per seed; throws ConfigError if the trajectory exits the
// frame.
SequenceData generate_sequence(const SceneSpec& spec, uint64_t seed, const std::string& name);

// Uniform ranges the corpus sampler draws specs from.
struct SceneSpecSampler {
  SceneSpec base;
  double size_lo = 18.0, size_hi = 34.0;
  double aspect_lo = 0.7, aspect_hi = 1.4;
  double speed_hi = 1.8;
  double sin_amp_hi = 6.0;
  double depth_lo = 8.0, depth_hi = 28.0;
  bool mix_shapes = true;

  SceneSpec sample(Rng& rng) const;
};

std::vector<SequenceData> generate_corpus(int n_sequences, const SceneSpecSampler& sampler,
                                          uint64_t seed, const std::string& split,
                                          const std::string& name_prefix = "seq");

// Desk-scale stand-in for a thermal-infrared modality shift: luminance
// with the target-intensity band contrast-inverted, mild blur, replicated
// to three channels. Boxes are unchanged.
SequenceData pseudo_tir(const SequenceDataset& seq);

}  // namespace datk
