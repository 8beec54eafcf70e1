#pragma once

#include <string>
#include <vector>

#include "datk/dataset.hpp"
#include "datk/model.hpp"
#include "datk/ops.hpp"

namespace datk {

// Domain labels: source 0, target 1.
enum class DomainLabel : int { kSource = 0, kTarget = 1 };

// Per-pixel domain classifier: 1x1 conv C->hidden, relu, 1x1 conv
// hidden->1, sigmoid. Output spatial extents equal the input feature
// extents.
template <class T>
struct PixelDomainClassifierT {
  ConvLayer<T> c1, c2;

  void init(int in_ch, int hidden, Rng& rng) {
    c1.init(hidden, in_ch, 1, 1, 1, 0, rng);
    c2.init(1, hidden, 1, 1, 1, 0, rng);
  }
  TensorT<T> forward(const TensorT<T>& feat) const {
    return sigmoid(c2.forward(relu(c1.forward(feat))));
  }
  void collect(ParamList<T>& out, const std::string& prefix) const {
    c1.collect(out, prefix + ".c1");
    c2.collect(out, prefix + ".c2");
  }
};

// ROI-level domain classifier: flatten(S*S*C) -> FC hidden -> relu ->
// FC 1 -> sigmoid.
template <class T>
struct SemanticDomainClassifierT {
  LinearLayer<T> f1, f2;
  int in_dim = 0;

  void init(int roi_ch, int roi_size, int hidden, Rng& rng) {
    in_dim = roi_ch * roi_size * roi_size;
    f1.init(hidden, in_dim, rng);
    f2.init(1, hidden, rng);
  }
  // roi: [C, S, S] from roi_align.
  TensorT<T> forward(const TensorT<T>& roi) const {
    if (roi.numel() != in_dim)
      throw DimensionError("semantic classifier expects flattened size " + std::to_string(in_dim) +
                           ", got " + shape_str(roi.shape()));
    return sigmoid(f2.forward(relu(f1.forward(reshape(roi, {1, in_dim})))));
  }
  void collect(ParamList<T>& out, const std::string& prefix) const {
    f1.collect(out, prefix + ".f1");
    f2.collect(out, prefix + ".f2");
  }
};

// PDA + SDA classifier stacks for levels 2..4. Initialized from a seed
// stream independent of the tracker's, so enabling or disabling DA leaves
// the backbone/head initialization untouched.
template <class T>
struct DomainAdaptT {
  std::array<PixelDomainClassifierT<T>, 3> pda;
  std::array<SemanticDomainClassifierT<T>, 3> sda;

  void init(const ModelConfig& cfg, uint64_t seed) {
    Rng rng(Rng(seed).derive(0xda).seed());
    for (size_t l = 0; l < 3; ++l) {
      pda[l].init(cfg.level_channels[l], cfg.pda_hidden, rng);
      sda[l].init(cfg.level_channels[l], cfg.roi_size, cfg.sda_hidden, rng);
    }
  }

  ParamList<T> params() const {
    ParamList<T> out;
    static const char* kLevel[3] = {"l2", "l3", "l4"};
    for (size_t l = 0; l < 3; ++l) pda[l].collect(out, std::string("da.pda.") + kLevel[l]);
    for (size_t l = 0; l < 3; ++l) sda[l].collect(out, std::string("da.sda.") + kLevel[l]);
    return out;
  }
};

// Eq.-style pixel domain adaptation loss: per-pixel BCE of the classifier
// output against the domain label, averaged over each map and then over
// the template and search maps. Features pass through gradient reversal
// before the classifier.
template <class T>
TensorT<T> pda_loss(const TensorT<T>& feat_z, const TensorT<T>& feat_x, DomainLabel domain,
                    const PixelDomainClassifierT<T>& cls, T lambda_grl) {
  const T d = static_cast<T>(static_cast<int>(domain));
  auto per_map = [&](const TensorT<T>& f) {
    auto p = cls.forward(grad_reverse(f, lambda_grl));
    auto label = TensorT<T>::filled(p.shape(), d);
    return mean(bce_map(p, label));
  };
  return scale(add(per_map(feat_z), per_map(feat_x)), T(0.5));
}

// Semantic domain adaptation loss: BCE of the ROI classifier output
// summed over the selected ROIs and divided by the ROI count. Returns a
// zero constant (and warns) when no ROIs are given.
template <class T>
TensorT<T> sda_loss(const std::vector<TensorT<T>>& rois, DomainLabel domain,
                    const SemanticDomainClassifierT<T>& cls, T lambda_grl) {
  if (rois.empty()) {
    std::fprintf(stderr, "[datk] warning: sda_loss called with zero ROIs, contributing 0\n");
    return TensorT<T>::scalar(T(0));
  }
  const T d = static_cast<T>(static_cast<int>(domain));
  TensorT<T> acc;
  for (const auto& roi : rois) {
    auto s = cls.forward(grad_reverse(roi, lambda_grl));
    auto label = TensorT<T>::filled(s.shape(), d);
    auto term = sum(bce_map(s, label));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return scale(acc, T(1) / static_cast<T>(rois.size()));
}

// ---- A-distance probe ----------------------------------------------------

struct ADistanceOptions {
  int hidden = 64;
  int epochs = 200;
  double lr = 0.2;
  double train_frac = 0.7;
};

// d_A = 2 (1 - 2 err): trains a fresh two-layer probe on a 70/30 split
// and returns the clamped held-out error mapped through the formula.
// Deterministic per seed.
double a_distance(const std::vector<std::vector<double>>& source,
                  const std::vector<std::vector<double>>& target, uint64_t seed,
                  const ADistanceOptions& opts = {});

inline double a_distance_from_error(double err) {
  err = std::min(std::max(err, 0.0), 0.5);
  return 2.0 * (1.0 - 2.0 * err);
}

// ---- Adversarial contract diagnostics -------------------------------------

struct ContractReport {
  double grl_dot = 0.0;             // <0 when GRL flips the backbone direction
  double grad_norm_no_grl = 0.0;    // backbone grad norm without GRL
  double grad_norm_lambda0 = 0.0;   // must be exactly 0
  double classifier_loss_before = 0.0;
  double classifier_loss_after = 0.0;   // after a descent step on the classifier
  double backbone_loss_before = 0.0;
  double backbone_loss_after = 0.0;     // after the reversed backbone step, classifier frozen
  bool ok() const {
    return grl_dot < 0.0 && grad_norm_lambda0 == 0.0 &&
           classifier_loss_after < classifier_loss_before &&
           backbone_loss_after > backbone_loss_before;
  }
};

// Verifies the minimax wiring on a live model: classifier gradients
// descend the domain loss while backbone gradients (through GRL) ascend
// it. Uses the PDA branch of the given level with one source and one
// target crop batch.
ContractReport adversarial_contract_check(SiamModelT<float>& model, DomainAdaptT<float>& da,
                                          const TensorT<float>& source_crop,
                                          const TensorT<float>& target_crop, int level = 1,
                                          double eta = 1e-2);

// ---- Two-Gaussian adversarial benchmark ------------------------------------

struct ConfusionBenchResult {
  double d_adversarial = 0.0;  // measured a-distance after GRL training
  double d_control = 0.0;      // same budget, lambda_grl = 0
};

// Small feature extractor + domain head trained on a seeded two-Gaussian
// problem; the testable form of the minimax objective. Both runs share
// initialization and data.
ConfusionBenchResult domain_confusion_benchmark(uint64_t seed, int steps = 300);

// ---- Feature sampling for probes and export --------------------------------

// Template-style crops around ground-truth boxes, run through the
// backbone; per-channel global average pooling of the chosen level
// (2, 3 or 4) gives one vector per sampled frame.
std::vector<std::vector<double>> sample_pooled_features(const SiamModel& model,
                                                        const std::vector<SequenceDataset>& data,
                                                        int level, int max_samples, uint64_t seed);

// CSV: domain,sequence,frame,f0..fN. The 2-D projection stand-in for the
// paper's t-SNE figure is produced downstream from this file.
void write_feature_csv(const std::string& path,
                       const std::vector<std::vector<double>>& source_feats,
                       const std::vector<std::vector<double>>& target_feats);

}  // namespace datk
