#include "datk/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>

#include "datk/errors.hpp"
#include "datk/parallel.hpp"

namespace fs = std::filesystem;

namespace datk {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (warmup_epochs >= epochs) throw ConfigError("train: warmup epochs must be < total epochs");
  if (base_lr <= 0 || warmup_lr <= 0 || final_lr <= 0)
    throw ConfigError("train: learning rates must be > 0");
  if (batch_size < 1 || steps_per_epoch < 1)
    throw ConfigError("train: batch size and steps per epoch must be >= 1");
  if (lambda_da < 0) throw ConfigError("train: lambda_da must be >= 0");
  if (lambda_grl < 0) throw ConfigError("train: lambda_grl must be >= 0");
#ifdef DATK_NO_DA
  if (lambda_da != 0.0)
    throw ConfigError("train: this build has the DA modules compiled out; lambda_da must be 0");
#endif
}

double TrainConfig::lr_at(int epoch) const {
  if (epoch <= warmup_epochs) return warmup_lr;
  if (epochs == warmup_epochs + 1) return base_lr;
  const double t = static_cast<double>(epoch - warmup_epochs - 1) /
                   static_cast<double>(epochs - warmup_epochs - 1);
  return base_lr * std::pow(final_lr / base_lr, t);
}

double TrainConfig::grl_at(int epoch) const {
  if (grl_warmup_epochs <= 0) return lambda_grl;
  return lambda_grl * std::min(1.0, static_cast<double>(epoch) / grl_warmup_epochs);
}

TrainConfig TrainConfig::from_kv(const KvConfig& kv) {
  TrainConfig c;
  c.epochs = kv.get_int("epochs", c.epochs);
  c.batch_size = kv.get_int("batch_size", c.batch_size);
  c.steps_per_epoch = kv.get_int("steps_per_epoch", c.steps_per_epoch);
  c.base_lr = kv.get_double("base_lr", c.base_lr);
  c.warmup_lr = kv.get_double("warmup_lr", c.warmup_lr);
  c.warmup_epochs = kv.get_int("warmup_epochs", c.warmup_epochs);
  c.final_lr = kv.get_double("final_lr", c.final_lr);
  c.momentum = kv.get_double("momentum", c.momentum);
  c.weight_decay = kv.get_double("weight_decay", c.weight_decay);
  c.freeze_backbone_until = kv.get_int("freeze_backbone_until", c.freeze_backbone_until);
  c.lambda_da = kv.get_double("lambda_da", c.lambda_da);
  c.lambda_grl = kv.get_double("lambda_grl", c.lambda_grl);
  c.grl_warmup_epochs = kv.get_int("grl_warmup_epochs", c.grl_warmup_epochs);
  c.frame_gap = kv.get_int("frame_gap", c.frame_gap);
  c.pseudo_score_threshold = kv.get_double("pseudo_score_threshold", c.pseudo_score_threshold);
  c.seed = static_cast<uint64_t>(kv.get_int("seed", 0));
  c.out_dir = kv.get_str("out_dir", c.out_dir);
  return c;
}

void SgdOptimizer::step(const ParamList<float>& params, double lr,
                        const std::function<bool(const std::string&)>& frozen) {
  if (velocity_.size() != params.size()) {
    velocity_.assign(params.size(), {});
    for (size_t i = 0; i < params.size(); ++i)
      velocity_[i].assign(params[i].tensor.data().size(), 0.0f);
  }
  for (size_t i = 0; i < params.size(); ++i) {
    if (frozen && frozen(params[i].name)) continue;
    auto t = params[i].tensor;
    const auto& g = t.grad();
    auto& w = t.data();
    auto& v = velocity_[i];
    for (size_t j = 0; j < w.size(); ++j) {
      v[j] = static_cast<float>(momentum_) * v[j] + g[j] + static_cast<float>(wd_) * w[j];
      w[j] -= static_cast<float>(lr) * v[j];
    }
  }
}

PreparedBatch stack_pairs(const std::vector<TrainingPair>& pairs, const ModelConfig& cfg,
                          const AnchorGrid& grid) {
  if (pairs.empty()) throw ContractError("stack_pairs: empty batch");
  PreparedBatch out;
  out.count = static_cast<int>(pairs.size());
  out.has_labels = pairs.front().has_labels;
  const int b = out.count;
  const int t = cfg.template_size, s = cfg.search_size;
  const int k = grid.k, r = grid.response;

  std::vector<float> z, x;
  z.reserve(static_cast<size_t>(b) * 3 * t * t);
  x.reserve(static_cast<size_t>(b) * 3 * s * s);
  std::vector<float> cls_label, pos_mask, neg_mask, reg_target;
  for (const auto& p : pairs) {
    if (p.has_labels != out.has_labels)
      throw ContractError("stack_pairs: mixed labeled/unlabeled pairs in one half-batch");
    z.insert(z.end(), p.z.data().begin(), p.z.data().end());
    x.insert(x.end(), p.x.data().begin(), p.x.data().end());
    if (out.has_labels) {
      for (float v : p.cls_label) {
        cls_label.push_back(v > 0.5f ? 1.0f : 0.0f);
        pos_mask.push_back(v > 0.5f ? 1.0f : 0.0f);
        neg_mask.push_back(v == 0.0f ? 1.0f : 0.0f);  // -1 = ignore
      }
      reg_target.insert(reg_target.end(), p.reg_target.begin(), p.reg_target.end());
    }
  }
  out.z = Tensor::from_data({b, 3, t, t}, std::move(z));
  out.x = Tensor::from_data({b, 3, s, s}, std::move(x));
  if (out.has_labels) {
    for (float v : pos_mask) out.pos_count += v;
    for (float v : neg_mask) out.neg_count += v;
    out.cls_label = Tensor::from_data({b, k, r, r}, std::move(cls_label));
    out.cls_pos_mask = Tensor::from_data({b, k, r, r}, std::move(pos_mask));
    out.cls_neg_mask = Tensor::from_data({b, k, r, r}, std::move(neg_mask));
    out.reg_target = Tensor::from_data({b, 4 * k, r, r}, std::move(reg_target));
    // Per-anchor mask expanded to the anchor-major 4k channel layout.
    std::vector<float> rm(static_cast<size_t>(b) * 4 * k * r * r);
    const size_t plane = static_cast<size_t>(r) * r;
    for (int n = 0; n < b; ++n)
      for (int a = 0; a < k; ++a)
        for (int c = 0; c < 4; ++c)
          for (size_t i = 0; i < plane; ++i)
            rm[((static_cast<size_t>(n) * 4 * k) + static_cast<size_t>(a * 4 + c)) * plane + i] =
                pairs[static_cast<size_t>(n)].reg_mask[static_cast<size_t>(a) * plane + i];
    out.reg_mask = Tensor::from_data({b, 4 * k, r, r}, std::move(rm));
    for (const auto& p : pairs) out.reg_count += 4.0 * p.positives;
  }
  return out;
}

namespace {

// Foreground probability map [B,k,r,r] from the anchor-major cls map.
Tensor foreground_prob(const Tensor& cls_map, int k, int r) {
  const int b = cls_map.dim(0);
  auto split = reshape(cls_map, {b, k, 2, r, r});
  return select(softmax(split, 2), 2, 1);
}

struct RoiSource {
  const PreparedBatch* batch;
  const BackboneFeaturesT<float>* feats;
  const HeadOutT<float>* head;
  DomainLabel domain;
};

}  // namespace

LossParts total_loss(const SiamModel& model, DomainAdaptT<float>* da,
                     const PreparedBatch& source, const PreparedBatch* target, double lambda_da,
                     double lambda_grl) {
  if (!source.has_labels) throw ContractError("total_loss: source batch must carry labels");
  const ModelConfig& cfg = model.cfg;
  const AnchorGrid grid = cfg.make_anchors();
  const int k = grid.k, r = grid.response;

  LossParts parts;

  auto zf_s = model.extract_features(source.z);
  auto xf_s = model.extract_features(source.x);
  auto head_s = model.rpn_forward(zf_s, xf_s);

  // Tracking loss, source only: pos/neg balanced BCE on foreground
  // probabilities plus masked smooth-L1 on the regression map.
  auto p_fg = foreground_prob(head_s.cls, k, r);
  auto bce = bce_map(p_fg, source.cls_label);
  auto cls_loss =
      add(scale(sum(mul(bce, source.cls_pos_mask)),
                static_cast<float>(0.5 / std::max(1.0, source.pos_count))),
          scale(sum(mul(bce, source.cls_neg_mask)),
                static_cast<float>(0.5 / std::max(1.0, source.neg_count))));
  auto reg_loss = scale(sum(mul(smooth_l1_map(head_s.reg, source.reg_target), source.reg_mask)),
                        static_cast<float>(1.0 / std::max(1.0, source.reg_count)));
  auto l_t = add(cls_loss, reg_loss);
  parts.l_t = l_t.item();
  parts.total = l_t;

#ifndef DATK_NO_DA
  if (da && lambda_da > 0.0) {
    if (!target) throw ContractError("total_loss: lambda_da > 0 requires a target batch");
    if (target->has_labels)
      throw ContractError("total_loss: target pairs must not carry cls/reg supervision");
    auto zf_t = model.extract_features(target->z);
    auto xf_t = model.extract_features(target->x);
    auto head_t = model.rpn_forward(zf_t, xf_t);

    const float lam = static_cast<float>(lambda_grl);

    // Top-scoring predicted boxes per sample feed ROI Align; both domains
    // use predictions, never annotations.
    auto collect_rois = [&](const PreparedBatch& batch, const BackboneFeaturesT<float>& xf,
                            const HeadOutT<float>& head, size_t level) {
      std::vector<std::vector<TensorT<float>>> per_sample(static_cast<size_t>(batch.count));
      const size_t plane = static_cast<size_t>(r) * r;
      for (int n = 0; n < batch.count; ++n) {
        // Slice this sample's maps out of the batch (constant copies).
        std::vector<float> cls_one(static_cast<size_t>(2 * k) * plane);
        std::vector<float> reg_one(static_cast<size_t>(4 * k) * plane);
        const auto& cd = head.cls.data();
        const auto& rd = head.reg.data();
        std::copy_n(cd.begin() + static_cast<long>(n * 2 * k * static_cast<int>(plane)),
                    cls_one.size(), cls_one.begin());
        std::copy_n(rd.begin() + static_cast<long>(n * 4 * k * static_cast<int>(plane)),
                    reg_one.size(), reg_one.begin());
        auto preds = decode_boxes(Tensor::from_data({1, 2 * k, r, r}, std::move(cls_one)),
                                  Tensor::from_data({1, 4 * k, r, r}, std::move(reg_one)), grid);
        auto& rois = per_sample[static_cast<size_t>(n)];
        for (const auto& p : preds) {
          if (static_cast<int>(rois.size()) >= cfg.n_roi) break;
          // Early-training decodes can land anywhere; clamp the center
          // into the crop and keep a minimum extent so the ROI always
          // samples real feature cells.
          const double s = cfg.search_size;
          const double w = std::min(std::max(p.box.w, 8.0), s);
          const double h = std::min(std::max(p.box.h, 8.0), s);
          const double cx = std::min(std::max(p.box.cx(), w / 2), s - w / 2);
          const double cy = std::min(std::max(p.box.cy(), h / 2), s - h / 2);
          rois.push_back(roi_align(xf.levels[level], n, BBox::from_center(cx, cy, w, h),
                                   cfg.stride, cfg.roi_size));
        }
      }
      return per_sample;
    };

    for (size_t level = 0; level < 3; ++level) {
      auto pda_s = pda_loss(zf_s.levels[level], xf_s.levels[level], DomainLabel::kSource,
                            da->pda[level], lam);
      auto pda_t = pda_loss(zf_t.levels[level], xf_t.levels[level], DomainLabel::kTarget,
                            da->pda[level], lam);
      auto l_pda = scale(add(pda_s, pda_t), 0.5f);

      auto domain_sda = [&](const PreparedBatch& batch, const BackboneFeaturesT<float>& xf,
                            const HeadOutT<float>& head, DomainLabel d) {
        auto rois_per_sample = collect_rois(batch, xf, head, level);
        TensorT<float> acc;
        for (auto& rois : rois_per_sample) {
          auto term = sda_loss(rois, d, da->sda[level], lam);
          acc = acc.defined() ? add(acc, term) : term;
        }
        return scale(acc, 1.0f / static_cast<float>(batch.count));
      };
      auto l_sda = scale(add(domain_sda(source, xf_s, head_s, DomainLabel::kSource),
                             domain_sda(*target, xf_t, head_t, DomainLabel::kTarget)),
                         0.5f);

      parts.l_pda += l_pda.item();
      parts.l_sda += l_sda.item();
      parts.total = add(parts.total, scale(add(l_pda, l_sda), static_cast<float>(lambda_da)));
    }
  }
#else
  (void)da;
  (void)target;
  (void)lambda_da;
  (void)lambda_grl;
#endif
  return parts;
}

PseudoPool prepare_pseudo_crops(const std::vector<SequenceDataset>& target,
                                const SiamModel& baseline, double score_threshold, int jobs) {
  return prepare_pseudo_crops(
      target, [&baseline](const SequenceDataset& seq) { return track_sequence(baseline, seq); },
      score_threshold, jobs);
}

PseudoPool prepare_pseudo_crops(const std::vector<SequenceDataset>& target,
                                const PseudoTracker& baseline, double score_threshold, int jobs) {
  PseudoPool pool;
  pool.per_sequence.resize(target.size());
  parallel_for_indexed(static_cast<int64_t>(target.size()), jobs, [&](int64_t i) {
    const auto& seq = target[static_cast<size_t>(i)];
    const auto preds = baseline(seq);
    double best = 0.0;
    for (size_t f = 1; f < preds.size(); ++f) best = std::max(best, preds[f].score);
    if (best < score_threshold) return;  // counted after the join
    auto& entries = pool.per_sequence[static_cast<size_t>(i)];
    for (size_t f = 0; f < preds.size(); ++f)
      entries.push_back({static_cast<int>(f), preds[f].box, preds[f].score});
  });
  for (size_t i = 0; i < target.size(); ++i)
    if (pool.per_sequence[i].empty()) {
      ++pool.skipped_sequences;
      std::fprintf(stderr, "[datk] warning: pseudo labels skipped for sequence %s (max score below %.2f)\n",
                   target[i].name.c_str(), score_threshold);
    }
  return pool;
}

namespace {

struct BatchDraw {
  std::vector<TrainingPair> source;
  std::vector<TrainingPair> target;
};

BatchDraw draw_batch(const std::vector<SequenceDataset>& source, const TargetDomain* target,
                     bool use_target, const TrainConfig& cfg, const ModelConfig& mc,
                     const AnchorGrid& grid, Rng& rng) {
  BatchDraw out;
  std::vector<size_t> usable_target;
  if (use_target)
    for (size_t i = 0; i < target->pool.per_sequence.size(); ++i)
      if (!target->pool.per_sequence[i].empty()) usable_target.push_back(i);

  for (int slot = 0; slot < cfg.batch_size; ++slot) {
    {
      const auto& seq = source[rng.uniform_int(source.size())];
      const int len = seq.size();
      const int i = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(len)));
      const int span = std::min(cfg.frame_gap, len - 1);
      const int j = (i + 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(span)))) % len;
      out.source.push_back(make_training_pair(seq.frame(i), seq.boxes[static_cast<size_t>(i)],
                                              seq.frame(j), seq.boxes[static_cast<size_t>(j)], mc,
                                              grid, true, &rng));
    }
    if (use_target) {
      const size_t ti = usable_target[rng.uniform_int(usable_target.size())];
      const auto& seq = (*target->data)[ti];
      const auto& entries = target->pool.per_sequence[ti];
      const int len = static_cast<int>(entries.size());
      const int i = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(len)));
      const int span = std::min(cfg.frame_gap, len - 1);
      const int j = (i + 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(span)))) % len;
      out.target.push_back(make_training_pair(
          seq.frame(entries[static_cast<size_t>(i)].frame), entries[static_cast<size_t>(i)].box,
          seq.frame(entries[static_cast<size_t>(j)].frame), entries[static_cast<size_t>(j)].box,
          mc, grid, false, &rng));
    }
  }
  return out;
}

}  // namespace

TrainStats train(const std::vector<SequenceDataset>& source, const TargetDomain* target,
                 const TrainConfig& config, const ModelConfig& model_cfg) {
  config.validate();
  if (source.empty()) throw ContractError("train: empty source corpus");
  const bool use_da = config.lambda_da > 0.0;
#ifndef DATK_NO_DA
  if (use_da && (!target || !target->data || target->pool.usable_sequences() == 0))
    throw ContractError("train: lambda_da > 0 requires a usable target domain");
#endif

  SiamModel model;
  model.init(model_cfg, config.seed);
  const AnchorGrid grid = model_cfg.make_anchors();

  std::unique_ptr<DomainAdaptT<float>> da;
#ifndef DATK_NO_DA
  if (use_da) {
    da = std::make_unique<DomainAdaptT<float>>();
    da->init(model_cfg, config.seed);
  }
#endif

  auto all_params = [&] {
    ParamList<float> p = model.params();
    if (da)
      for (auto& q : da->params()) p.push_back(q);
    return p;
  }();

  SgdOptimizer opt(config.momentum, config.weight_decay);
  Rng rng(Rng(config.seed).derive(0x7a).seed());

  TrainStats stats;
  fs::create_directories(config.out_dir);
  const std::string csv_path = (fs::path(config.out_dir) / "metrics.csv").string();
  std::ofstream csv(csv_path, std::ios::trunc);
  csv << "epoch,iter,L_t,L_pda,L_sda,L_total,lr\n";
  stats.metrics_csv = csv_path;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = config.lr_at(epoch);
    const double lam_grl = config.grl_at(epoch);
    const bool frozen_phase = epoch <= config.freeze_backbone_until;
    double epoch_loss = 0.0;

    for (int iter = 0; iter < config.steps_per_epoch; ++iter) {
      BatchDraw draw = draw_batch(source, target, use_da, config, model_cfg, grid, rng);
      PreparedBatch sb = stack_pairs(draw.source, model_cfg, grid);
      std::optional<PreparedBatch> tb;
      if (use_da) tb = stack_pairs(draw.target, model_cfg, grid);

      for (auto& p : all_params) p.tensor.zero_grad();
      LossParts parts = total_loss(model, da.get(), sb, tb ? &*tb : nullptr, config.lambda_da,
                                   lam_grl);
      const double total = parts.total.item();
      if (!std::isfinite(total)) {
        std::fprintf(stderr,
                     "[datk] NaN loss at epoch %d iter %d (L_t=%g L_pda=%g L_sda=%g); aborting\n",
                     epoch, iter, parts.l_t, parts.l_pda, parts.l_sda);
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch) + " iter " +
                    std::to_string(iter));
      }
      backward(parts.total);
      opt.step(all_params, lr, [&](const std::string& name) {
        return frozen_phase && SiamModel::is_backbone_block_param(name);
      });

      stats.source_pairs += sb.count;
      stats.target_pairs += tb ? tb->count : 0;
      epoch_loss += total;
      char line[256];
      std::snprintf(line, sizeof(line), "%d,%d,%.6f,%.6f,%.6f,%.6f,%.6g\n", epoch, iter,
                    parts.l_t, parts.l_pda, parts.l_sda, total, lr);
      csv << line;
    }
    csv.flush();
    stats.epoch_mean_loss.push_back(epoch_loss / config.steps_per_epoch);

    char name[64];
    std::snprintf(name, sizeof(name), "ckpt_epoch_%02d.datk", epoch);
    const std::string path = (fs::path(config.out_dir) / name).string();
    auto tensors = model.to_checkpoint();
    if (da)
      for (auto& t : params_to_checkpoint(da->params())) tensors.push_back(std::move(t));
    save_checkpoint(path, tensors);
    stats.checkpoints.push_back(path);
    std::fprintf(stderr, "[datk] epoch %d/%d mean loss %.4f lr %.2g%s\n", epoch, config.epochs,
                 stats.epoch_mean_loss.back(), lr, frozen_phase ? " (backbone frozen)" : "");
  }

  // Stable alias for the last checkpoint.
  const std::string final_path = (fs::path(config.out_dir) / "ckpt_final.datk").string();
  fs::copy_file(stats.checkpoints.back(), final_path, fs::copy_options::overwrite_existing);
  stats.checkpoints.push_back(final_path);
  return stats;
}

}  // namespace datk
