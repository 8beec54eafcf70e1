#include "datk/haze.hpp"

#include <algorithm>
#include <cmath>

#include "datk/errors.hpp"
#include "datk/parallel.hpp"

namespace datk {

void HazeParams::validate() const {
  for (double b : beta)
    if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError("haze: beta must be >= 0");
  for (double a : airlight)
    if (!(a >= 0.0 && a <= 255.0)) throw ConfigError("haze: airlight must be in [0,255]");
  if (!(depth_scale > 0.0)) throw ConfigError("haze: depth_scale must be > 0");
  if (!(depth_offset >= 0.0)) throw ConfigError("haze: depth_offset must be >= 0");
}

HazeParams HazeParams::uniform(double beta, double airlight, double depth_scale,
                               double depth_offset) {
  HazeParams p;
  p.beta = {beta, beta, beta};
  p.airlight = {airlight, airlight, airlight};
  p.depth_scale = depth_scale;
  p.depth_offset = depth_offset;
  p.validate();
  return p;
}

std::vector<double> transmission(const DepthMap& depth, const HazeParams& params, int channel) {
  params.validate();
  const double beta = params.beta.at(static_cast<size_t>(channel));
  std::vector<double> t(depth.values.size());
  const int64_t n = static_cast<int64_t>(t.size());
#pragma omp parallel for schedule(static) if (n > 1 << 14)
  for (int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(depth.values[static_cast<size_t>(i)]) * params.depth_scale +
                     params.depth_offset;
    t[static_cast<size_t>(i)] = std::exp(-d * beta);
  }
  return t;
}

Image apply_haze(const Image& frame, const DepthMap& depth, const HazeParams& params) {
  params.validate();
  if (frame.width != depth.width || frame.height != depth.height)
    throw IntegrityError("apply_haze: frame " + std::to_string(frame.width) + "x" +
                         std::to_string(frame.height) + " paired with depth " +
                         std::to_string(depth.width) + "x" + std::to_string(depth.height));
  Image out(frame.width, frame.height);
  const int64_t n = static_cast<int64_t>(depth.values.size());
#pragma omp parallel for schedule(static) if (n > 1 << 14)
  for (int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(depth.values[static_cast<size_t>(i)]) * params.depth_scale +
                     params.depth_offset;
    for (int c = 0; c < 3; ++c) {
      const double t = std::exp(-d * params.beta[static_cast<size_t>(c)]);
      const double e = static_cast<double>(frame.data[static_cast<size_t>(i) * 3 + c]);
      const double v = t * e + (1.0 - t) * params.airlight[static_cast<size_t>(c)];
      const double r = std::floor(v + 0.5);  // round half-up
      out.data[static_cast<size_t>(i) * 3 + c] =
          static_cast<uint8_t>(std::min(255.0, std::max(0.0, r)));
    }
  }
  return out;
}

double auto_depth_scale(const DepthMap& depth) {
  std::vector<float> v = depth.values;
  if (v.empty()) throw IntegrityError("auto_depth_scale: empty depth map");
  const size_t k = static_cast<size_t>(0.95 * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<long>(k), v.end());
  const double p95 = static_cast<double>(v[k]);
  if (p95 <= 0.0) return 1.0;
  return 50.0 / p95;
}

SequenceData haze_sequence(const SequenceDataset& seq, const HazeParams& params) {
  if (!seq.has_depth())
    throw IntegrityError("haze: sequence " + seq.name + " has no depth maps");
  SequenceData out;
  out.name = seq.name;
  out.boxes = seq.boxes;  // haze does not move targets
  out.meta = seq.meta;
  out.meta.domain = "hazed";
  out.meta.beta = params.beta;
  out.frames.resize(static_cast<size_t>(seq.size()));
  out.depths.resize(static_cast<size_t>(seq.size()));
  for (int i = 0; i < seq.size(); ++i) {
    const Image frame = seq.frame(i);
    const DepthMap depth = seq.depth(i);
    if (frame.width != depth.width || frame.height != depth.height)
      throw IntegrityError("haze: sequence " + seq.name + " frame " + std::to_string(i) +
                           ": frame/depth size mismatch");
    out.frames[static_cast<size_t>(i)] = apply_haze(frame, depth, params);
    out.depths[static_cast<size_t>(i)] = depth;
  }
  return out;
}

HazeRunResult haze_dataset(const std::vector<SequenceDataset>& dataset, const BetaRange& range,
                           uint64_t seed, const std::string& out_root, double airlight, int jobs) {
  if (!(range.lo >= 0.0 && range.hi >= range.lo))
    throw ConfigError("haze: invalid beta range");
  HazeRunResult result;
  result.betas.resize(dataset.size());

  // Betas are drawn per sequence from a child stream keyed by index, so
  // the assignment does not depend on worker scheduling.
  Rng root(seed);
  std::vector<double> betas(dataset.size());
  for (size_t i = 0; i < dataset.size(); ++i)
    betas[i] = root.derive(i).uniform(range.lo, range.hi);

  parallel_for_indexed(static_cast<int64_t>(dataset.size()), jobs, [&](int64_t i) {
    const auto& seq = dataset[static_cast<size_t>(i)];
    double scale = 1.0;
    if (seq.meta.depth_unit != "meters" && seq.size() > 0) scale = auto_depth_scale(seq.depth(0));
    const HazeParams params =
        HazeParams::uniform(betas[static_cast<size_t>(i)], airlight, scale, 0.0);
    SequenceData hazed = haze_sequence(seq, params);
    save_sequence(out_root, hazed);
    result.betas[static_cast<size_t>(i)] = {seq.name, betas[static_cast<size_t>(i)]};
  });
  return result;
}

}  // namespace datk
