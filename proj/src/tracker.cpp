#include <algorithm>
#include <cmath>

#include "datk/errors.hpp"
#include "datk/siamese.hpp"

namespace datk {

double context_side(const BBox& box, double context_amount) {
  const double p = context_amount * (box.w + box.h);
  return std::sqrt((box.w + p) * (box.h + p));
}

Tensor crop_subwindow(const Image& frame, double cx, double cy, double side, int out_size) {
  if (!(side > 0)) throw ContractError("crop_subwindow: non-positive side");
  // Per-channel frame mean as padding value.
  double mean[3] = {0, 0, 0};
  const size_t n_px = static_cast<size_t>(frame.width) * frame.height;
  for (size_t i = 0; i < n_px; ++i)
    for (int c = 0; c < 3; ++c) mean[c] += frame.data[i * 3 + static_cast<size_t>(c)];
  for (double& m : mean) m /= static_cast<double>(n_px) * 255.0;

  std::vector<float> out(static_cast<size_t>(out_size) * out_size * 3);
  const double scale = side / out_size;
  const double x0 = cx - side / 2.0, y0 = cy - side / 2.0;
  for (int oy = 0; oy < out_size; ++oy) {
    for (int ox = 0; ox < out_size; ++ox) {
      // Source position of this output pixel center, in pixel-center
      // coordinates.
      const double sx = x0 + (ox + 0.5) * scale - 0.5;
      const double sy = y0 + (oy + 0.5) * scale - 0.5;
      const int ix = static_cast<int>(std::floor(sx));
      const int iy = static_cast<int>(std::floor(sy));
      const double fx = sx - ix, fy = sy - iy;
      for (int c = 0; c < 3; ++c) {
        auto tap = [&](int xx, int yy) -> double {
          if (xx < 0 || xx >= frame.width || yy < 0 || yy >= frame.height)
            return mean[c] * 255.0;
          return frame.at(xx, yy, c);
        };
        const double v = (1 - fy) * ((1 - fx) * tap(ix, iy) + fx * tap(ix + 1, iy)) +
                         fy * ((1 - fx) * tap(ix, iy + 1) + fx * tap(ix + 1, iy + 1));
        out[(static_cast<size_t>(c) * out_size + oy) * out_size + ox] =
            static_cast<float>(v / 255.0);
      }
    }
  }
  return Tensor::from_data({1, 3, out_size, out_size}, std::move(out));
}

TrainingPair make_training_pair(const Image& tpl_frame, const BBox& tpl_box,
                                const Image& srch_frame, const BBox& srch_box,
                                const ModelConfig& cfg, const AnchorGrid& grid, bool with_labels,
                                Rng* aug_rng) {
  if (!tpl_box.valid() || !srch_box.valid())
    throw ContractError("make_training_pair: degenerate box");

  TrainingPair pair;
  const double s_z = context_side(tpl_box, cfg.context_amount);
  pair.z = crop_subwindow(tpl_frame, tpl_box.cx(), tpl_box.cy(), s_z, cfg.template_size);

  const double ratio = static_cast<double>(cfg.search_size) / cfg.template_size;
  const double s_x = context_side(srch_box, cfg.context_amount) * ratio;
  double shift_x = 0.0, shift_y = 0.0;
  if (aug_rng) {
    // Off-center jitter teaches the head to localize away from the crop
    // center; without it every label lands on the central anchors.
    shift_x = aug_rng->uniform(-0.18, 0.18) * s_x;
    shift_y = aug_rng->uniform(-0.18, 0.18) * s_x;
  }
  const double crop_cx = srch_box.cx() + shift_x;
  const double crop_cy = srch_box.cy() + shift_y;
  pair.x = crop_subwindow(srch_frame, crop_cx, crop_cy, s_x, cfg.search_size);

  if (!with_labels) return pair;
  pair.has_labels = true;

  // Search box in crop coordinates.
  const double scale = cfg.search_size / s_x;
  const BBox gt = BBox::from_center((srch_box.cx() - crop_cx) * scale + cfg.search_size / 2.0,
                                    (srch_box.cy() - crop_cy) * scale + cfg.search_size / 2.0,
                                    srch_box.w * scale, srch_box.h * scale);

  const int r = grid.response, k = grid.k;
  pair.cls_label.assign(static_cast<size_t>(k) * r * r, -1.0f);
  pair.reg_target.assign(static_cast<size_t>(4 * k) * r * r, 0.0f);
  pair.reg_mask.assign(static_cast<size_t>(k) * r * r, 0.0f);

  double best_iou = -1.0;
  size_t best_idx = 0;
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      for (int a = 0; a < k; ++a) {
        const BBox& anchor = grid.at(i, j, a);
        const double ov = iou(anchor, gt);
        // Anchor-major channel layout: label index (a, i, j).
        const size_t li = (static_cast<size_t>(a) * r + i) * r + j;
        if (ov > best_iou) {
          best_iou = ov;
          best_idx = li;
        }
        if (ov >= kPosIouThreshold)
          pair.cls_label[li] = 1.0f;
        else if (ov <= kNegIouThreshold)
          pair.cls_label[li] = 0.0f;
        const auto enc = encode_box(gt, anchor);
        for (int d = 0; d < 4; ++d) {
          const size_t a_ch = static_cast<size_t>(a) * 4 + static_cast<size_t>(d);
          pair.reg_target[(a_ch * r + static_cast<size_t>(i)) * r + static_cast<size_t>(j)] =
              static_cast<float>(enc[static_cast<size_t>(d)]);
        }
      }
  // The best-overlap anchor is always positive so every pair trains.
  pair.cls_label[best_idx] = 1.0f;
  for (size_t li = 0; li < pair.cls_label.size(); ++li)
    if (pair.cls_label[li] == 1.0f) {
      pair.reg_mask[li] = 1.0f;
      ++pair.positives;
    }
  return pair;
}

std::vector<Prediction> decode_boxes(const Tensor& cls_map, const Tensor& reg_map,
                                     const AnchorGrid& grid) {
  const int r = grid.response, k = grid.k;
  if (cls_map.rank() != 4 || cls_map.dim(1) != 2 * k || cls_map.dim(2) != r ||
      reg_map.dim(1) != 4 * k)
    throw DimensionError("decode_boxes: maps do not match the anchor grid");
  const auto& cls = cls_map.data();
  const auto& reg = reg_map.data();
  const size_t plane = static_cast<size_t>(r) * r;

  std::vector<Prediction> out;
  out.reserve(static_cast<size_t>(k) * plane);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      for (int a = 0; a < k; ++a) {
        const size_t cell = static_cast<size_t>(i) * r + static_cast<size_t>(j);
        const double bg = cls[(static_cast<size_t>(2 * a)) * plane + cell];
        const double fg = cls[(static_cast<size_t>(2 * a + 1)) * plane + cell];
        const double m = std::max(bg, fg);
        const double score = std::exp(fg - m) / (std::exp(bg - m) + std::exp(fg - m));
        std::array<double, 4> d;
        for (int c = 0; c < 4; ++c)
          d[static_cast<size_t>(c)] = reg[(static_cast<size_t>(4 * a + c)) * plane + cell];
        out.push_back({decode_box(d, grid.at(i, j, a)), score});
      }
  std::stable_sort(out.begin(), out.end(),
                   [](const Prediction& a, const Prediction& b) { return a.score > b.score; });
  return out;
}

TrackState track_init(const SiamModel& model, const Image& frame, const BBox& box) {
  if (!box.valid()) throw ContractError("track_init: degenerate first-frame box");
  TrackState state;
  const double s_z = context_side(box, model.cfg.context_amount);
  state.templ = model.extract_features(
      crop_subwindow(frame, box.cx(), box.cy(), s_z, model.cfg.template_size));
  state.box = box;
  return state;
}

namespace {

double size_metric(double w, double h) {
  const double p = (w + h) / 2.0;
  return std::sqrt((w + p) * (h + p));
}

double change(double x) { return std::max(x, 1.0 / x); }

}  // namespace

Prediction track_step(const SiamModel& model, TrackState& state, const Image& frame,
                      const AnchorGrid& grid) {
  const ModelConfig& cfg = model.cfg;
  const double s_z = context_side(state.box, cfg.context_amount);
  const double s_x = s_z * cfg.search_size / cfg.template_size;
  const double scale_z = cfg.search_size / s_x;  // image px -> crop px

  auto xf = model.extract_features(
      crop_subwindow(frame, state.box.cx(), state.box.cy(), s_x, cfg.search_size));
  const HeadOut head = model.rpn_forward(state.templ, xf);

  const int r = grid.response, k = grid.k;
  const BBox prev_in_crop = BBox::from_center(0, 0, state.box.w * scale_z, state.box.h * scale_z);
  const double prev_metric = size_metric(prev_in_crop.w, prev_in_crop.h);
  const double prev_ratio = state.box.w / state.box.h;

  double best_pscore = -1.0;
  Prediction best;
  double best_penalty = 1.0;
  const auto& cls = head.cls.data();
  const auto& reg = head.reg.data();
  const size_t plane = static_cast<size_t>(r) * r;
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      for (int a = 0; a < k; ++a) {
        const size_t cell = static_cast<size_t>(i) * r + static_cast<size_t>(j);
        const double bg = cls[(static_cast<size_t>(2 * a)) * plane + cell];
        const double fg = cls[(static_cast<size_t>(2 * a + 1)) * plane + cell];
        const double m = std::max(bg, fg);
        const double score = std::exp(fg - m) / (std::exp(bg - m) + std::exp(fg - m));
        std::array<double, 4> d;
        for (int c = 0; c < 4; ++c)
          d[static_cast<size_t>(c)] = reg[(static_cast<size_t>(4 * a + c)) * plane + cell];
        const BBox box = decode_box(d, grid.at(i, j, a));

        const double s_c = change(size_metric(box.w, box.h) / prev_metric);
        const double r_c = change(prev_ratio / (box.w / box.h));
        const double penalty = std::exp(-(r_c * s_c - 1.0) * cfg.penalty_k);
        // Cosine window pulls scores toward the previous location.
        const double wy = 0.5 - 0.5 * std::cos(2.0 * 3.14159265358979323846 * (i + 1) / (r + 1));
        const double wx = 0.5 - 0.5 * std::cos(2.0 * 3.14159265358979323846 * (j + 1) / (r + 1));
        const double window = wy * wx;
        const double pscore =
            penalty * score * (1.0 - cfg.window_weight) + window * cfg.window_weight;
        if (pscore > best_pscore) {
          best_pscore = pscore;
          best = {box, score};
          best_penalty = penalty;
        }
      }

  // Map crop coordinates back to the image plane.
  const double inv = 1.0 / scale_z;
  const double bx = (best.box.cx() - cfg.search_size / 2.0) * inv + state.box.cx();
  const double by = (best.box.cy() - cfg.search_size / 2.0) * inv + state.box.cy();
  const double lr = cfg.box_lr * best_penalty * best.score;
  double bw = state.box.w * (1.0 - lr) + best.box.w * inv * lr;
  double bh = state.box.h * (1.0 - lr) + best.box.h * inv * lr;

  // Clamp into the frame with a minimum size.
  bw = std::min(std::max(bw, 4.0), static_cast<double>(frame.width));
  bh = std::min(std::max(bh, 4.0), static_cast<double>(frame.height));
  const double cx = std::min(std::max(bx, 0.0), static_cast<double>(frame.width));
  const double cy = std::min(std::max(by, 0.0), static_cast<double>(frame.height));

  state.box = BBox::from_center(cx, cy, bw, bh);
  state.score = best.score;
  return {state.box, best.score};
}

std::vector<Prediction> track_sequence(const SiamModel& model, const SequenceDataset& seq,
                                       std::optional<int> init_frame) {
  const int start = init_frame.value_or(0);
  if (start < 0 || start >= seq.size()) throw ContractError("track_sequence: bad init frame");
  const AnchorGrid grid = model.cfg.make_anchors();
  TrackState state = track_init(model, seq.frame(start), seq.boxes.at(static_cast<size_t>(start)));
  std::vector<Prediction> out;
  out.push_back({state.box, 1.0});
  for (int f = start + 1; f < seq.size(); ++f)
    out.push_back(track_step(model, state, seq.frame(f), grid));
  return out;
}

}  // namespace datk
