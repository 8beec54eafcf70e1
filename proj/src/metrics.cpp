#include "datk/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "datk/errors.hpp"

using nlohmann::json;

namespace datk {

OtbScores otb_scores(const std::vector<BBox>& preds, const std::vector<BBox>& gts) {
  if (preds.size() != gts.size())
    throw ProtocolError("otb_scores: " + std::to_string(preds.size()) + " predictions vs " +
                        std::to_string(gts.size()) + " ground-truth boxes");
  if (preds.empty()) throw ProtocolError("otb_scores: empty trajectory");

  OtbScores out;
  out.precision_curve.assign(51, 0.0);
  out.success_curve.assign(21, 0.0);
  const double n = static_cast<double>(preds.size());
  for (size_t f = 0; f < preds.size(); ++f) {
    const double dist = center_distance(preds[f], gts[f]);
    const double ov = iou(preds[f], gts[f]);
    for (int t = 0; t <= 50; ++t)
      if (dist <= static_cast<double>(t)) out.precision_curve[static_cast<size_t>(t)] += 1.0;
    for (int i = 0; i <= 20; ++i)
      if (ov >= 0.05 * i - 1e-12) out.success_curve[static_cast<size_t>(i)] += 1.0;
  }
  for (auto& v : out.precision_curve) v /= n;
  for (auto& v : out.success_curve) v /= n;
  out.precision_at_20 = out.precision_curve[20];
  double auc = 0.0;
  for (double v : out.success_curve) auc += v;
  out.success_auc = auc / static_cast<double>(out.success_curve.size());
  return out;
}

namespace {

struct Fragment {
  std::vector<double> overlaps;  // per tracked frame after the init frame
  bool failed = false;
};

}  // namespace

VotScores vot_scores(const TrackerFn& tracker, const std::vector<SequenceDataset>& dataset,
                     const VotOptions& opts) {
  VotScores out;
  out.note = "eao interval fixed to [" + std::to_string(opts.eao_lo) + "," +
             std::to_string(opts.eao_hi) + "]; stand-in for the dataset-derived VOT span";

  std::vector<Fragment> fragments;
  double acc_sum = 0.0;
  long acc_count = 0;
  int failures_total = 0;

  for (const auto& seq : dataset) {
    if (seq.size() < opts.burn_in + 2) {
      ++out.excluded;
      std::fprintf(stderr, "[datk] warning: sequence %s shorter than burn-in, excluded\n",
                   seq.name.c_str());
      continue;
    }
    ++out.sequences;
    int init = 0;
    while (init < seq.size() - 1) {
      const auto preds = tracker(seq, init);
      Fragment frag;
      int t = init + 1;
      for (; t < seq.size(); ++t) {
        const double ov = iou(preds.at(static_cast<size_t>(t - init)),
                              seq.boxes.at(static_cast<size_t>(t)));
        frag.overlaps.push_back(ov);
        if (ov == 0.0) {
          frag.failed = true;
          break;
        }
      }
      // Accuracy counts post-burn-in frames, excluding the failure frame.
      const int usable = static_cast<int>(frag.overlaps.size()) - (frag.failed ? 1 : 0);
      for (int i = opts.burn_in; i < usable; ++i) {
        acc_sum += frag.overlaps[static_cast<size_t>(i)];
        ++acc_count;
      }
      const bool failed = frag.failed;
      if (failed) ++failures_total;
      fragments.push_back(std::move(frag));
      if (!failed) break;  // reached the end of the sequence
      init = t + opts.skip_after_failure;
    }
  }

  out.accuracy = acc_count ? acc_sum / static_cast<double>(acc_count) : 0.0;
  out.robustness =
      out.sequences ? static_cast<double>(failures_total) / out.sequences : 0.0;

  // Expected-overlap curve over the fixed interval.
  double phi_sum = 0.0;
  int phi_count = 0;
  for (int ns = opts.eao_lo; ns <= opts.eao_hi; ++ns) {
    double sum = 0.0;
    int contributors = 0;
    for (const auto& frag : fragments) {
      const int len = static_cast<int>(frag.overlaps.size());
      if (!frag.failed && len < ns) continue;  // unknown future, no padding
      double acc = 0.0;
      for (int i = 0; i < std::min(ns, len); ++i) acc += frag.overlaps[static_cast<size_t>(i)];
      sum += acc / static_cast<double>(ns);  // zero-padded beyond a failure
      ++contributors;
    }
    if (contributors) {
      phi_sum += sum / contributors;
      ++phi_count;
    }
  }
  out.eao = phi_count ? phi_sum / phi_count : 0.0;
  return out;
}

std::string EvalReport::to_json() const {
  json j;
  j["schema"] = 1;
  j["protocol"] = protocol;
  j["dataset"] = dataset;
  j["checkpoint"] = checkpoint;
  j["seed"] = seed;
  if (epoch >= 0) j["epoch"] = epoch;
  j["aggregate"] = aggregate;
  if (!note.empty()) j["note"] = note;
  json seqs = json::array();
  for (const auto& s : sequences) {
    json e;
    e["name"] = s.name;
    e["metrics"] = s.metrics;
    seqs.push_back(e);
  }
  j["sequences"] = seqs;
  return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(const std::string& text, const std::string& origin) {
  EvalReport r;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(origin + ": " + e.what());
  }
  r.protocol = j.value("protocol", "");
  r.dataset = j.value("dataset", "");
  r.checkpoint = j.value("checkpoint", "");
  r.seed = j.value("seed", 0ULL);
  r.epoch = j.value("epoch", -1);
  r.note = j.value("note", "");
  if (j.contains("aggregate"))
    for (auto& [key, value] : j["aggregate"].items()) r.aggregate[key] = value.get<double>();
  if (j.contains("sequences"))
    for (const auto& e : j["sequences"]) {
      SeqEntry s;
      s.name = e.value("name", "");
      if (e.contains("metrics"))
        for (auto& [key, value] : e["metrics"].items()) s.metrics[key] = value.get<double>();
      r.sequences.push_back(std::move(s));
    }
  return r;
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "sequence";
  for (const auto& [key, value] : aggregate) out << "," << key;
  out << "\n";
  auto row = [&](const std::string& name, const std::map<std::string, double>& metrics) {
    out << name;
    for (const auto& [key, value] : aggregate) {
      const auto it = metrics.find(key);
      out << "," << (it == metrics.end() ? 0.0 : it->second);
    }
    out << "\n";
  };
  for (const auto& s : sequences) row(s.name, s.metrics);
  row("AGGREGATE", aggregate);
  return out.str();
}

std::vector<CompareRow> compare_report(const EvalReport& baseline, const EvalReport& da) {
  if (baseline.protocol != da.protocol)
    throw ProtocolError("compare: protocol mismatch " + baseline.protocol + " vs " + da.protocol);
  if (!baseline.dataset.empty() && !da.dataset.empty() && baseline.dataset != da.dataset)
    throw ProtocolError("compare: dataset mismatch " + baseline.dataset + " vs " + da.dataset);
  std::vector<CompareRow> rows;
  for (const auto& [metric, base_v] : baseline.aggregate) {
    const auto it = da.aggregate.find(metric);
    if (it == da.aggregate.end()) continue;
    CompareRow row;
    row.metric = metric;
    row.baseline = base_v;
    row.da = it->second;
    row.abs_delta = it->second - base_v;
    row.rel_delta_pct =
        base_v != 0.0 ? std::round((row.abs_delta / base_v) * 1000.0) / 10.0 : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::string render_compare_table(
    const std::vector<std::pair<std::string, std::vector<CompareRow>>>& rows) {
  std::ostringstream out;
  char buf[256];
  // Header mirrors Table-1 style: metric columns with baseline/DA/delta.
  out << "row        | metric          | baseline |       DA |    delta | delta_%\n";
  out << "-----------+-----------------+----------+----------+----------+--------\n";
  for (const auto& [label, comparison] : rows) {
    for (const auto& r : comparison) {
      std::snprintf(buf, sizeof(buf), "%-10s | %-15s | %8.4f | %8.4f | %+8.4f | %+6.1f\n",
                    label.c_str(), r.metric.c_str(), r.baseline, r.da, r.abs_delta,
                    r.rel_delta_pct);
      out << buf;
    }
  }
  return out.str();
}

}  // namespace datk
