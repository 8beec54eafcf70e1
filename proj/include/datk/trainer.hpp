#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "datk/config.hpp"
#include "datk/dataset.hpp"
#include "datk/domain_adapt.hpp"
#include "datk/model.hpp"
#include "datk/siamese.hpp"

namespace datk {

// Training schedule: constant warmup for the first warmup_epochs, then
// exponential decay base_lr -> final_lr over the remaining epochs.
// The backbone blocks stay frozen through freeze_backbone_until epochs;
// DA modules train in both phases.
struct TrainConfig {
  int epochs = 19;
  int batch_size = 4;
  int steps_per_epoch = 50;
  double base_lr = 5e-3;
  double warmup_lr = 1e-3;
  int warmup_epochs = 5;
  double final_lr = 5e-4;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int freeze_backbone_until = 10;
  double lambda_da = 0.1;
  double lambda_grl = 1.0;
  int grl_warmup_epochs = 0;  // 0 = constant lambda_grl
  int frame_gap = 10;
  double pseudo_score_threshold = 0.2;
  uint64_t seed = 0;
  std::string out_dir;

  void validate() const;
  double lr_at(int epoch) const;   // epochs are 1-based
  double grl_at(int epoch) const;
  static TrainConfig from_kv(const KvConfig& kv);
};

// SGD with momentum and decoupled-from-nothing classic weight decay:
// v = momentum*v + (g + wd*w); w -= lr*v. Frozen parameters are skipped
// entirely (no velocity update), so their bytes cannot move.
class SgdOptimizer {
 public:
  SgdOptimizer(double momentum, double weight_decay) : momentum_(momentum), wd_(weight_decay) {}

  void step(const ParamList<float>& params, double lr,
            const std::function<bool(const std::string&)>& frozen = {});

 private:
  double momentum_, wd_;
  std::vector<std::vector<float>> velocity_;
};

// Stacked tensors for one domain's half of a batch. Positive and
// negative anchors are weighted separately so the (rare) positives are
// not drowned out by background cells.
struct PreparedBatch {
  Tensor z, x;
  Tensor cls_label;     // [B,k,r,r], ignore encoded by zero masks
  Tensor cls_pos_mask;  // [B,k,r,r]
  Tensor cls_neg_mask;  // [B,k,r,r]
  Tensor reg_target;    // [B,4k,r,r]
  Tensor reg_mask;      // [B,4k,r,r]
  double pos_count = 0;
  double neg_count = 0;
  double reg_count = 0;  // positive anchors * 4
  int count = 0;
  bool has_labels = false;
};

PreparedBatch stack_pairs(const std::vector<TrainingPair>& pairs, const ModelConfig& cfg,
                          const AnchorGrid& grid);

struct LossParts {
  Tensor total;
  double l_t = 0.0;
  double l_pda = 0.0;  // sum over levels, before lambda_da
  double l_sda = 0.0;
};

// Joint loss: L = L_t + lambda_da * sum_k (L_pda^k + L_sda^k). L_t is
// computed on the source half only; per-level DA losses average the two
// domains. Passing da = nullptr (or lambda_da = 0) reduces the graph to
// the plain tracking loss.
LossParts total_loss(const SiamModel& model, DomainAdaptT<float>* da,
                     const PreparedBatch& source, const PreparedBatch* target, double lambda_da,
                     double lambda_grl);

// Pseudo-label preparation: the baseline tracker runs over each target
// sequence; its per-frame predictions become crop centers. Predictions
// are never used as supervision. Sequences whose best score stays under
// the threshold are skipped with a warning.
struct PseudoPool {
  struct Entry {
    int frame = 0;
    BBox box;
    double score = 0.0;
  };
  std::vector<std::vector<Entry>> per_sequence;  // index-aligned with the dataset
  int skipped_sequences = 0;
  int usable_sequences() const {
    int n = 0;
    for (const auto& s : per_sequence) n += !s.empty();
    return n;
  }
};

using PseudoTracker =
    std::function<std::vector<Prediction>(const SequenceDataset& seq)>;

PseudoPool prepare_pseudo_crops(const std::vector<SequenceDataset>& target,
                                const PseudoTracker& baseline, double score_threshold,
                                int jobs = 1);
PseudoPool prepare_pseudo_crops(const std::vector<SequenceDataset>& target,
                                const SiamModel& baseline, double score_threshold, int jobs = 1);

struct TrainStats {
  std::vector<double> epoch_mean_loss;
  long source_pairs = 0;
  long target_pairs = 0;
  std::vector<std::string> checkpoints;
  std::string metrics_csv;
};

struct TargetDomain {
  const std::vector<SequenceDataset>* data = nullptr;
  PseudoPool pool;
};

// Full training loop; deterministic per config.seed. Writes per-epoch
// checkpoints and a metrics CSV (epoch,iter,L_t,L_pda,L_sda,L_total,lr)
// under config.out_dir. A NaN loss aborts with a diagnostic dump.
TrainStats train(const std::vector<SequenceDataset>& source, const TargetDomain* target,
                 const TrainConfig& config, const ModelConfig& model_cfg = {});

}  // namespace datk
