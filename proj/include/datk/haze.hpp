#pragma once

#include <array>
#include <string>
#include <vector>

#include "datk/dataset.hpp"
#include "datk/image.hpp"
#include "datk/rng.hpp"

namespace datk {

// Atmospheric scattering parameters. beta is per-channel in 1/meter;
// depth_scale/depth_offset convert raw depth units to meters.
struct HazeParams {
  std::array<double, 3> beta{0.0, 0.0, 0.0};
  std::array<double, 3> airlight{240.0, 240.0, 240.0};
  double depth_scale = 1.0;
  double depth_offset = 0.0;

  void validate() const;
  static HazeParams uniform(double beta, double airlight = 240.0, double depth_scale = 1.0,
                            double depth_offset = 0.0);
};

// t(p) = exp(-(depth(p)*scale + offset) * beta[channel]), in (0, 1].
std::vector<double> transmission(const DepthMap& depth, const HazeParams& params, int channel);

// I = t*E + (1-t)*A per channel, rounded half-up, clamped to [0,255].
// beta = 0 returns the input byte-for-byte.
Image apply_haze(const Image& frame, const DepthMap& depth, const HazeParams& params);

// Uniform per-sequence scattering coefficient range. Training and
// evaluation datasets draw from disjoint ranges so a model never trains
// on the fog density it is tested on.
struct BetaRange {
  double lo = 0.0;
  double hi = 0.0;
};

inline constexpr BetaRange kTrainBetaRange{0.015, 0.030};
inline constexpr BetaRange kEvalBetaRange{0.005, 0.012};

// For raw depth rasters of unknown unit, scale so the 95th-percentile
// depth of the first frame maps to 50 m.
double auto_depth_scale(const DepthMap& depth);

// Haze a whole sequence: boxes and depth maps are copied unchanged, the
// drawn beta is recorded in metadata.
SequenceData haze_sequence(const SequenceDataset& seq, const HazeParams& params);

// Per-sequence beta drawn from [range.lo, range.hi] using a child stream
// of `seed`; dataset written under out_root with the same sequence names.
struct HazeRunResult {
  std::vector<std::pair<std::string, double>> betas;  // sequence name -> beta
};
HazeRunResult haze_dataset(const std::vector<SequenceDataset>& dataset, const BetaRange& range,
                           uint64_t seed, const std::string& out_root, double airlight = 240.0,
                           int jobs = 1);

}  // namespace datk
