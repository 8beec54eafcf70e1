#pragma once

#include <array>
#include <string>
#include <vector>

#include "datk/anchors.hpp"
#include "datk/checkpoint.hpp"
#include "datk/ops.hpp"
#include "datk/rng.hpp"
#include "datk/tensor.hpp"

namespace datk {

// Toy-scale stand-in for the modified ResNet-50 backbone: three blocks of
// [conv3x3, relu, conv3x3, relu] with pooling arranged so every exported
// level sits at a common stride of 8. Template/search sizes are the
// paper's 127/255 halved.
struct ModelConfig {
  int template_size = 64;
  int search_size = 128;
  int stride = 8;
  std::array<int, 3> level_channels{32, 64, 64};
  int head_channels = 64;

  double anchor_side = 32.0;
  std::vector<double> anchor_ratios{1.0};

  int pda_hidden = 64;
  int sda_hidden = 64;
  int roi_size = 5;
  int n_roi = 4;

  double window_weight = 0.3;
  double penalty_k = 0.05;
  double box_lr = 0.3;
  double context_amount = 0.5;

  int anchor_count() const { return static_cast<int>(anchor_ratios.size()); }
  int response() const { return (search_size - template_size) / stride + 1; }
  int template_feat() const { return template_size / stride; }
  int search_feat() const { return search_size / stride; }

  AnchorGrid make_anchors() const {
    return AnchorGrid::make(response(), stride, search_size, anchor_side, anchor_ratios);
  }
};

template <class T>
struct ParamRef {
  std::string name;
  TensorT<T> tensor;
};

template <class T>
using ParamList = std::vector<ParamRef<T>>;

// Kaiming-style fan-in init for weights, zeros for biases.
template <class T>
TensorT<T> kaiming_init(Shape shape, int fan_in, Rng& rng) {
  const double std_dev = std::sqrt(2.0 / fan_in);
  std::vector<T> v(static_cast<size_t>(shape_numel(shape)));
  for (auto& x : v) x = static_cast<T>(rng.normal(0.0, std_dev));
  return TensorT<T>::from_data(std::move(shape), std::move(v), true);
}

template <class T>
struct ConvLayer {
  TensorT<T> w, b;
  int stride = 1, pad = 0;

  void init(int out_ch, int in_ch, int kh, int kw, int stride_, int pad_, Rng& rng) {
    stride = stride_;
    pad = pad_;
    w = kaiming_init<T>({out_ch, in_ch, kh, kw}, in_ch * kh * kw, rng);
    b = TensorT<T>::zeros({out_ch}, true);
  }
  TensorT<T> forward(const TensorT<T>& x) const { return bias_add(conv2d(x, w, stride, pad), b); }
  void collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
  }
};

template <class T>
struct LinearLayer {
  TensorT<T> w, b;

  void init(int out_dim, int in_dim, Rng& rng) {
    w = kaiming_init<T>({out_dim, in_dim}, in_dim, rng);
    b = TensorT<T>::zeros({out_dim}, true);
  }
  TensorT<T> forward(const TensorT<T>& x) const { return linear(x, w, b); }
  void collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
  }
};

template <class T>
struct BackboneFeaturesT {
  std::array<TensorT<T>, 3> levels;  // levels 2, 3, 4 at common stride
};

template <class T>
struct BackboneT {
  ModelConfig cfg;
  ConvLayer<T> b2c1, b2c2, b3c1, b3c2, b4c1, b4c2;
  ConvLayer<T> neck2, neck3, neck4;

  void init(const ModelConfig& config, Rng& rng) {
    cfg = config;
    const auto [c2, c3, c4] = cfg.level_channels;
    b2c1.init(c2, 3, 3, 3, 1, 1, rng);
    b2c2.init(c2, c2, 3, 3, 1, 1, rng);
    b3c1.init(c3, c2, 3, 3, 1, 1, rng);
    b3c2.init(c3, c3, 3, 3, 1, 1, rng);
    b4c1.init(c4, c3, 3, 3, 1, 1, rng);
    b4c2.init(c4, c4, 3, 3, 1, 1, rng);
    // Stride unification: level 2 is pooled from stride 4 to 8 by a
    // learnable 2x2 adjustment, levels 3 and 4 already sit at stride 8.
    neck2.init(c2, c2, 2, 2, 2, 0, rng);
    neck3.init(c3, c3, 1, 1, 1, 0, rng);
    neck4.init(c4, c4, 1, 1, 1, 0, rng);
  }

  // Input [N,3,S,S] with S = template_size or search_size.
  BackboneFeaturesT<T> extract(const TensorT<T>& crop) const {
    if (crop.rank() != 4 || crop.dim(1) != 3 ||
        (crop.dim(2) != cfg.template_size && crop.dim(2) != cfg.search_size) ||
        crop.dim(2) != crop.dim(3))
      throw DimensionError("extract_features: crop " + shape_str(crop.shape()) +
                           " is neither template " + std::to_string(cfg.template_size) +
                           " nor search " + std::to_string(cfg.search_size) + " sized");
    auto x = maxpool2d(crop, 2, 2);                      // stride 2
    auto f2 = relu(b2c2.forward(relu(b2c1.forward(x))));  // stride 2
    auto f2p = maxpool2d(f2, 2, 2);                       // stride 4
    auto f3 = relu(b3c2.forward(relu(b3c1.forward(f2p))));
    auto f3p = maxpool2d(f3, 2, 2);  // stride 8
    auto f4 = relu(b4c2.forward(relu(b4c1.forward(f3p))));
    BackboneFeaturesT<T> out;
    out.levels[0] = neck2.forward(f2p);  // 2x2 stride-2: stride 4 -> 8
    out.levels[1] = neck3.forward(f3p);
    out.levels[2] = neck4.forward(f4);
    return out;
  }

  void collect(ParamList<T>& out) const {
    b2c1.collect(out, "backbone.b2.c1");
    b2c2.collect(out, "backbone.b2.c2");
    b3c1.collect(out, "backbone.b3.c1");
    b3c2.collect(out, "backbone.b3.c2");
    b4c1.collect(out, "backbone.b4.c1");
    b4c2.collect(out, "backbone.b4.c2");
    neck2.collect(out, "backbone.neck.l2");
    neck3.collect(out, "backbone.neck.l3");
    neck4.collect(out, "backbone.neck.l4");
  }
};

template <class T>
struct HeadOutT {
  TensorT<T> cls;  // [N, 2k, r, r] fused over levels
  TensorT<T> reg;  // [N, 4k, r, r]
};

// Per-level Siamese RPN branch: adjustment convs for template and search,
// depthwise cross-correlation, then a small conv head.
template <class T>
struct RpnBranch {
  ConvLayer<T> adj_z, adj_x, h1, h2;

  void init(int in_ch, int hidden, int out_ch, Rng& rng) {
    adj_z.init(hidden, in_ch, 1, 1, 1, 0, rng);
    adj_x.init(hidden, in_ch, 1, 1, 1, 0, rng);
    h1.init(hidden, hidden, 1, 1, 1, 0, rng);
    h2.init(out_ch, hidden, 1, 1, 1, 0, rng);
    // Small final-layer init keeps the initial logits near zero; there is
    // no normalization anywhere in this net to absorb a bad start.
    for (auto& v : h2.w.data()) v = static_cast<T>(0.1) * v;
  }
  TensorT<T> forward(const TensorT<T>& zf, const TensorT<T>& xf) const {
    auto corr = depthwise_xcorr(adj_x.forward(xf), adj_z.forward(zf));
    // The correlation sums Ht*Wt products per cell; rescale to keep the
    // activation variance near the input's.
    const T inv = T(1) / static_cast<T>(std::sqrt(double(zf.dim(2)) * zf.dim(3)));
    return h2.forward(relu(h1.forward(scale(corr, inv))));
  }
  void collect(ParamList<T>& out, const std::string& prefix) const {
    adj_z.collect(out, prefix + ".adj_z");
    adj_x.collect(out, prefix + ".adj_x");
    h1.collect(out, prefix + ".h1");
    h2.collect(out, prefix + ".h2");
  }
};

template <class T>
struct RpnHeadT {
  ModelConfig cfg;
  std::array<RpnBranch<T>, 3> cls_branch;
  std::array<RpnBranch<T>, 3> reg_branch;
  TensorT<T> cls_fuse_logits, reg_fuse_logits;  // [3], softmax-normalized

  void init(const ModelConfig& config, Rng& rng) {
    cfg = config;
    const int k = cfg.anchor_count();
    for (int l = 0; l < 3; ++l) {
      cls_branch[static_cast<size_t>(l)].init(cfg.level_channels[static_cast<size_t>(l)],
                                              cfg.head_channels, 2 * k, rng);
      reg_branch[static_cast<size_t>(l)].init(cfg.level_channels[static_cast<size_t>(l)],
                                              cfg.head_channels, 4 * k, rng);
    }
    cls_fuse_logits = TensorT<T>::zeros({3}, true);
    reg_fuse_logits = TensorT<T>::zeros({3}, true);
  }

  HeadOutT<T> forward(const BackboneFeaturesT<T>& zf, const BackboneFeaturesT<T>& xf) const {
    auto fuse = [](const std::array<TensorT<T>, 3>& maps, const TensorT<T>& logits) {
      auto w = softmax(logits, 0);
      auto out = mul_scalar(maps[0], select(w, 0, 0));
      out = add(out, mul_scalar(maps[1], select(w, 0, 1)));
      return add(out, mul_scalar(maps[2], select(w, 0, 2)));
    };
    std::array<TensorT<T>, 3> cls_maps, reg_maps;
    for (size_t l = 0; l < 3; ++l) {
      cls_maps[l] = cls_branch[l].forward(zf.levels[l], xf.levels[l]);
      reg_maps[l] = reg_branch[l].forward(zf.levels[l], xf.levels[l]);
    }
    return {fuse(cls_maps, cls_fuse_logits), fuse(reg_maps, reg_fuse_logits)};
  }

  void collect(ParamList<T>& out) const {
    static const char* kLevel[3] = {"l2", "l3", "l4"};
    for (size_t l = 0; l < 3; ++l) {
      cls_branch[l].collect(out, std::string("head.") + kLevel[l] + ".cls");
      reg_branch[l].collect(out, std::string("head.") + kLevel[l] + ".reg");
    }
    out.push_back({"head.fuse.cls", cls_fuse_logits});
    out.push_back({"head.fuse.reg", reg_fuse_logits});
  }
};

template <class T>
struct SiamModelT {
  ModelConfig cfg;
  BackboneT<T> backbone;
  RpnHeadT<T> head;

  void init(const ModelConfig& config, uint64_t seed) {
    cfg = config;
    Rng rng(Rng(seed).derive(0x5ea).seed());
    backbone.init(cfg, rng);
    head.init(cfg, rng);
  }

  BackboneFeaturesT<T> extract_features(const TensorT<T>& crop) const {
    return backbone.extract(crop);
  }

  HeadOutT<T> rpn_forward(const BackboneFeaturesT<T>& zf, const BackboneFeaturesT<T>& xf) const {
    return head.forward(zf, xf);
  }

  ParamList<T> params() const {
    ParamList<T> out;
    backbone.collect(out);
    head.collect(out);
    return out;
  }

  // Backbone blocks freeze during the first training phase; the stride
  // unification convs train with the heads throughout.
  static bool is_backbone_block_param(const std::string& name) {
    return name.rfind("backbone.b", 0) == 0;
  }

  std::vector<NamedTensor> to_checkpoint() const { return params_to_checkpoint(params()); }

  // Loads by name; tensors beyond the model's own (e.g. domain-adaptation
  // classifiers in a DA checkpoint) are ignored here and picked up by
  // their owning module.
  void from_checkpoint(const std::vector<NamedTensor>& tensors) {
    load_params_from_checkpoint(params(), tensors);
  }
};

template <class T>
void load_params_from_checkpoint(ParamList<T> plist, const std::vector<NamedTensor>& tensors) {
  for (auto& p : plist) {
    const NamedTensor* found = nullptr;
    for (const auto& t : tensors)
      if (t.name == p.name) {
        found = &t;
        break;
      }
    if (!found) throw FormatError("checkpoint is missing tensor '" + p.name + "'");
    if (found->shape != p.tensor.shape())
      throw FormatError("checkpoint tensor '" + p.name + "': shape mismatch");
    auto& dst = p.tensor.data();
    for (size_t j = 0; j < dst.size(); ++j) dst[j] = static_cast<T>(found->data[j]);
  }
}

template <class T>
std::vector<NamedTensor> params_to_checkpoint(const ParamList<T>& plist) {
  std::vector<NamedTensor> out;
  out.reserve(plist.size());
  for (const auto& p : plist) {
    NamedTensor t;
    t.name = p.name;
    t.shape = p.tensor.shape();
    t.data.reserve(p.tensor.data().size());
    for (auto v : p.tensor.data()) t.data.push_back(static_cast<float>(v));
    out.push_back(std::move(t));
  }
  return out;
}

using SiamModel = SiamModelT<float>;
using BackboneFeatures = BackboneFeaturesT<float>;
using HeadOut = HeadOutT<float>;

}  // namespace datk
