#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "datk/bbox.hpp"
#include "datk/dataset.hpp"

namespace datk {

// OTB one-pass evaluation: precision = fraction of frames whose center
// distance is within t pixels (t = 0..50), reported at 20; success =
// fraction of frames with IoU >= tau (tau = 0, 0.05, .., 1.0); AUC is the
// mean of the success curve.
struct OtbScores {
  std::vector<double> precision_curve;  // 51 entries
  std::vector<double> success_curve;    // 21 entries
  double precision_at_20 = 0.0;
  double success_auc = 0.0;
};

OtbScores otb_scores(const std::vector<BBox>& preds, const std::vector<BBox>& gts);

// Produces predictions for frames start..end of the sequence, the first
// entry echoing the initialization. Lets the VOT protocol reinitialize a
// real tracker and lets fixtures script exact overlaps.
using TrackerFn =
    std::function<std::vector<BBox>(const SequenceDataset& seq, int start_frame)>;

struct VotOptions {
  int skip_after_failure = 5;
  int burn_in = 10;
  int eao_lo = 10;
  int eao_hi = 100;
};

// Supervised VOT-style protocol: failure when IoU hits 0, reinit from
// ground truth after a skip, burn-in frames excluded from accuracy.
// The EAO approximation averages the expected-overlap curve over a fixed
// N_s interval: failed fragments are zero-padded to any length, fragments
// that ended with the sequence contribute only to N_s within their span.
struct VotScores {
  double accuracy = 0.0;
  double robustness = 0.0;  // failures per sequence
  double eao = 0.0;
  int sequences = 0;
  int excluded = 0;  // shorter than the burn-in window
  std::string note;
};

VotScores vot_scores(const TrackerFn& tracker, const std::vector<SequenceDataset>& dataset,
                     const VotOptions& opts = {});

// Serializable evaluation result (JSON schema 1, plus CSV export).
struct EvalReport {
  std::string protocol;  // "otb" | "vot"
  std::string dataset;
  std::string checkpoint;
  uint64_t seed = 0;
  int epoch = -1;
  std::map<std::string, double> aggregate;
  struct SeqEntry {
    std::string name;
    std::map<std::string, double> metrics;
  };
  std::vector<SeqEntry> sequences;
  std::string note;

  std::string to_json() const;
  static EvalReport from_json(const std::string& text, const std::string& origin);
  std::string to_csv() const;
};

// Per-metric absolute and relative deltas between a baseline report and a
// DA report of the same protocol.
struct CompareRow {
  std::string metric;
  double baseline = 0.0;
  double da = 0.0;
  double abs_delta = 0.0;
  double rel_delta_pct = 0.0;  // rounded to one decimal
};

std::vector<CompareRow> compare_report(const EvalReport& baseline, const EvalReport& da);

// Plain-text table of one or more comparison rows (per-epoch rows when
// multiple report pairs are given).
std::string render_compare_table(const std::vector<std::pair<std::string, std::vector<CompareRow>>>& rows);

}  // namespace datk
