#include "datk/domain_adapt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "datk/errors.hpp"
#include "datk/siamese.hpp"

namespace datk {

namespace {

using DTensor = TensorT<double>;

// Two-layer probe/head used by both the a-distance estimate and the
// confusion benchmark.
struct Mlp {
  LinearLayer<double> l1, l2;

  void init(int in_dim, int hidden, Rng& rng) {
    l1.init(hidden, in_dim, rng);
    l2.init(1, hidden, rng);
  }
  DTensor forward(const DTensor& x) const { return sigmoid(l2.forward(relu(l1.forward(x)))); }
  std::vector<DTensor> tensors() const { return {l1.w, l1.b, l2.w, l2.b}; }
};

void gd_step(const std::vector<DTensor>& params, double lr) {
  for (const auto& p : params) {
    auto t = p;  // handle copy, shared node
    const auto& g = t.grad();
    auto& v = t.data();
    for (size_t i = 0; i < v.size(); ++i) v[i] -= static_cast<double>(lr * g[i]);
    t.zero_grad();
  }
}

DTensor rows_tensor(const std::vector<std::vector<double>>& rows) {
  const int n = static_cast<int>(rows.size());
  const int d = static_cast<int>(rows.front().size());
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(n) * d);
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != d) throw ContractError("a_distance: ragged feature rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return DTensor::from_data({n, d}, std::move(flat));
}

}  // namespace

double a_distance(const std::vector<std::vector<double>>& source,
                  const std::vector<std::vector<double>>& target, uint64_t seed,
                  const ADistanceOptions& opts) {
  if (source.size() < 32 || target.size() < 32)
    throw ContractError("a_distance: need at least 32 samples per domain, got " +
                        std::to_string(source.size()) + "/" + std::to_string(target.size()));
  if (source.front().empty()) throw ContractError("a_distance: empty feature vectors");
  const int d = static_cast<int>(source.front().size());

  Rng rng(Rng(seed).derive(0xad).seed());

  // Stratified split: shuffle each domain, take train_frac for training.
  auto split = [&](const std::vector<std::vector<double>>& rows) {
    std::vector<size_t> idx(rows.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
    const size_t n_train = static_cast<size_t>(opts.train_frac * static_cast<double>(rows.size()));
    std::pair<std::vector<std::vector<double>>, std::vector<std::vector<double>>> out;
    for (size_t i = 0; i < idx.size(); ++i)
      (i < n_train ? out.first : out.second).push_back(rows[idx[i]]);
    return out;
  };
  auto [s_train, s_test] = split(source);
  auto [t_train, t_test] = split(target);

  // Standardize with train statistics.
  std::vector<double> mu(static_cast<size_t>(d), 0.0), sd(static_cast<size_t>(d), 0.0);
  const double n_train = static_cast<double>(s_train.size() + t_train.size());
  for (const auto* set : {&s_train, &t_train})
    for (const auto& r : *set)
      for (int j = 0; j < d; ++j) mu[static_cast<size_t>(j)] += r[static_cast<size_t>(j)];
  for (auto& m : mu) m /= n_train;
  for (const auto* set : {&s_train, &t_train})
    for (const auto& r : *set)
      for (int j = 0; j < d; ++j) {
        const double v = r[static_cast<size_t>(j)] - mu[static_cast<size_t>(j)];
        sd[static_cast<size_t>(j)] += v * v;
      }
  for (auto& s : sd) s = std::max(std::sqrt(s / n_train), 1e-8);
  auto standardize = [&](std::vector<std::vector<double>> rows) {
    for (auto& r : rows)
      for (int j = 0; j < d; ++j)
        r[static_cast<size_t>(j)] = (r[static_cast<size_t>(j)] - mu[static_cast<size_t>(j)]) /
                                    sd[static_cast<size_t>(j)];
    return rows;
  };
  s_train = standardize(std::move(s_train));
  t_train = standardize(std::move(t_train));
  s_test = standardize(std::move(s_test));
  t_test = standardize(std::move(t_test));

  // Assemble train matrix: source label 0, target label 1.
  std::vector<std::vector<double>> train_rows = s_train;
  train_rows.insert(train_rows.end(), t_train.begin(), t_train.end());
  std::vector<double> labels(train_rows.size(), 0.0);
  for (size_t i = s_train.size(); i < train_rows.size(); ++i) labels[i] = 1.0;

  auto x = rows_tensor(train_rows);
  auto y = DTensor::from_data({static_cast<int>(labels.size()), 1}, labels);

  Mlp probe;
  probe.init(d, opts.hidden, rng);
  std::vector<DTensor> params;
  for (auto& t : probe.tensors()) {
    params.push_back(t);
    t.zero_grad();
  }

  for (int e = 0; e < opts.epochs; ++e) {
    auto loss = binary_cross_entropy(probe.forward(x), y);
    backward(loss);
    gd_step(params, opts.lr);
  }

  // Held-out error.
  int errors = 0, total = 0;
  auto count = [&](const std::vector<std::vector<double>>& rows, double label) {
    if (rows.empty()) return;
    auto pred = probe.forward(rows_tensor(rows));
    for (int i = 0; i < pred.dim(0); ++i) {
      const double p = pred.data()[static_cast<size_t>(i)];
      errors += ((p >= 0.5 ? 1.0 : 0.0) != label);
      ++total;
    }
  };
  count(s_test, 0.0);
  count(t_test, 1.0);
  if (total == 0) throw ContractError("a_distance: empty held-out split");
  return a_distance_from_error(static_cast<double>(errors) / total);
}

ContractReport adversarial_contract_check(SiamModelT<float>& model, DomainAdaptT<float>& da,
                                          const TensorT<float>& source_crop,
                                          const TensorT<float>& target_crop, int level,
                                          double eta) {
  ContractReport report;
  const size_t li = static_cast<size_t>(level);
  auto& cls = da.pda[li];

  auto domain_loss = [&](float lambda) {
    auto fs = model.extract_features(source_crop);
    auto ft = model.extract_features(target_crop);
    auto ls = pda_loss(fs.levels[li], fs.levels[li], DomainLabel::kSource, cls, lambda);
    auto lt = pda_loss(ft.levels[li], ft.levels[li], DomainLabel::kTarget, cls, lambda);
    return scale(add(ls, lt), 0.5f);
  };

  auto backbone_params = model.params();
  ParamList<float> cls_params;
  cls.collect(cls_params, "pda");
  auto zero_all = [&] {
    for (auto& p : backbone_params) p.tensor.zero_grad();
    for (auto& p : cls_params) p.tensor.zero_grad();
  };
  auto flat_backbone_grad = [&] {
    std::vector<double> g;
    for (auto& p : backbone_params)
      for (float v : p.tensor.grad()) g.push_back(static_cast<double>(v));
    return g;
  };

  // Gradients through GRL (lambda = 1).
  zero_all();
  auto loss_grl = domain_loss(1.0f);
  report.classifier_loss_before = report.backbone_loss_before = loss_grl.item();
  backward(loss_grl);
  const auto g_rev = flat_backbone_grad();
  std::vector<std::vector<float>> cls_grads;
  for (auto& p : cls_params) cls_grads.push_back(p.tensor.grad());

  // Gradients without GRL (lambda folded away by a plain forward).
  zero_all();
  backward(domain_loss(0.0f));  // lambda 0 blocks the backbone branch
  double norm0 = 0.0;
  for (double v : flat_backbone_grad()) norm0 += v * v;
  report.grad_norm_lambda0 = norm0;

  // "Without GRL" reference: classifier applied directly, no reversal.
  zero_all();
  {
    auto fs = model.extract_features(source_crop);
    auto ft = model.extract_features(target_crop);
    auto per = [&](const TensorT<float>& f, float d) {
      auto p = cls.forward(f);
      return mean(bce_map(p, TensorT<float>::filled(p.shape(), d)));
    };
    backward(scale(add(per(fs.levels[li], 0.0f), per(ft.levels[li], 1.0f)), 0.5f));
  }
  const auto g_fwd = flat_backbone_grad();
  double dot = 0.0, norm_fwd = 0.0;
  for (size_t i = 0; i < g_fwd.size(); ++i) {
    dot += g_fwd[i] * g_rev[i];
    norm_fwd += g_fwd[i] * g_fwd[i];
  }
  report.grl_dot = dot;
  report.grad_norm_no_grl = std::sqrt(norm_fwd);

  // Classifier descent probe: step classifier along -grad, loss drops.
  for (size_t p = 0; p < cls_params.size(); ++p) {
    auto& v = cls_params[p].tensor.data();
    for (size_t i = 0; i < v.size(); ++i)
      v[i] -= static_cast<float>(eta) * cls_grads[p][i];
  }
  report.classifier_loss_after = domain_loss(1.0f).item();
  for (size_t p = 0; p < cls_params.size(); ++p) {  // restore
    auto& v = cls_params[p].tensor.data();
    for (size_t i = 0; i < v.size(); ++i)
      v[i] += static_cast<float>(eta) * cls_grads[p][i];
  }

  // Backbone ascent probe: apply the actual training step (-eta * g_rev)
  // with the classifier frozen; the domain loss must increase.
  size_t off = 0;
  for (auto& p : backbone_params) {
    auto& v = p.tensor.data();
    for (size_t i = 0; i < v.size(); ++i) v[i] -= static_cast<float>(eta * g_rev[off + i]);
    off += p.tensor.data().size();
  }
  report.backbone_loss_after = domain_loss(1.0f).item();
  off = 0;
  for (auto& p : backbone_params) {  // restore
    auto& v = p.tensor.data();
    for (size_t i = 0; i < v.size(); ++i) v[i] += static_cast<float>(eta * g_rev[off + i]);
    off += p.tensor.data().size();
  }
  zero_all();
  return report;
}

ConfusionBenchResult domain_confusion_benchmark(uint64_t seed, int steps) {
  Rng data_rng(Rng(seed).derive(0xbe).seed());
  const int n = 128, dim = 2;

  auto sample_domain = [&](double mean_x, int count) {
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i)
      rows.push_back({data_rng.normal(mean_x, 1.0), data_rng.normal(-mean_x, 1.0)});
    return rows;
  };
  const auto src_train = sample_domain(+2.0, n);
  const auto tgt_train = sample_domain(-2.0, n);
  const auto src_eval = sample_domain(+2.0, n);
  const auto tgt_eval = sample_domain(-2.0, n);

  auto run = [&](double lambda) {
    Rng init_rng(Rng(seed).derive(0x17).seed());
    LinearLayer<double> f1, f2;  // extractor
    f1.init(16, dim, init_rng);
    f2.init(8, 16, init_rng);
    // Start with small-scale features: the head then opens near chance
    // and the reversed gradient can keep up instead of racing a
    // saturated classifier whose BCE gradient has already vanished.
    for (auto& v : f2.w.data()) v *= 0.1;
    Mlp head;
    head.init(8, 16, init_rng);

    auto extract = [&](const DTensor& x) { return f2.forward(relu(f1.forward(x))); };

    auto x_src = rows_tensor(src_train);
    auto x_tgt = rows_tensor(tgt_train);
    auto y_src = DTensor::filled({n, 1}, 0.0);
    auto y_tgt = DTensor::filled({n, 1}, 1.0);

    std::vector<DTensor> params = {f1.w, f1.b, f2.w, f2.b};
    for (auto& t : head.tensors()) params.push_back(t);
    for (auto& t : params) t.zero_grad();

    for (int s = 0; s < steps; ++s) {
      auto ps = head.forward(grad_reverse(extract(x_src), lambda));
      auto pt = head.forward(grad_reverse(extract(x_tgt), lambda));
      auto loss = scale(
          add(binary_cross_entropy(ps, y_src), binary_cross_entropy(pt, y_tgt)), 0.5);
      backward(loss);
      gd_step(params, 0.05);
    }

    auto pooled = [&](const std::vector<std::vector<double>>& rows) {
      auto feats = extract(rows_tensor(rows));
      std::vector<std::vector<double>> out;
      for (int i = 0; i < feats.dim(0); ++i) {
        std::vector<double> row(static_cast<size_t>(feats.dim(1)));
        for (int j = 0; j < feats.dim(1); ++j)
          row[static_cast<size_t>(j)] =
              feats.data()[static_cast<size_t>(i) * feats.dim(1) + static_cast<size_t>(j)];
        out.push_back(std::move(row));
      }
      return out;
    };
    return a_distance(pooled(src_eval), pooled(tgt_eval), Rng(seed).derive(0xed).seed());
  };

  ConfusionBenchResult result;
  result.d_adversarial = run(1.0);
  result.d_control = run(0.0);
  return result;
}

std::vector<std::vector<double>> sample_pooled_features(const SiamModel& model,
                                                        const std::vector<SequenceDataset>& data,
                                                        int level, int max_samples,
                                                        uint64_t seed) {
  if (level < 2 || level > 4) throw ConfigError("feature level must be 2, 3 or 4");
  // Deterministic (sequence, frame) sample order.
  std::vector<std::pair<size_t, int>> slots;
  for (size_t s = 0; s < data.size(); ++s)
    for (int f = 0; f < data[s].size(); ++f) slots.emplace_back(s, f);
  Rng rng(Rng(seed).derive(0xfe).seed());
  for (size_t i = slots.size(); i > 1; --i) std::swap(slots[i - 1], slots[rng.uniform_int(i)]);
  if (static_cast<int>(slots.size()) > max_samples)
    slots.resize(static_cast<size_t>(max_samples));

  std::vector<std::vector<double>> out;
  out.reserve(slots.size());
  for (const auto& [s, f] : slots) {
    const auto& seq = data[s];
    const BBox box = seq.boxes.at(static_cast<size_t>(f));
    if (!box.valid()) continue;
    const Image frame = seq.frame(f);
    auto crop = crop_subwindow(frame, box.cx(), box.cy(),
                               context_side(box, model.cfg.context_amount),
                               model.cfg.template_size);
    auto feats = model.extract_features(crop);
    const auto& t = feats.levels[static_cast<size_t>(level - 2)];
    const int c = t.dim(1);
    const int64_t plane = static_cast<int64_t>(t.dim(2)) * t.dim(3);
    std::vector<double> row(static_cast<size_t>(c), 0.0);
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (int64_t i = 0; i < plane; ++i)
        acc += t.data()[static_cast<size_t>(ch * plane + i)];
      row[static_cast<size_t>(ch)] = acc / static_cast<double>(plane);
    }
    out.push_back(std::move(row));
  }
  return out;
}

void write_feature_csv(const std::string& path,
                       const std::vector<std::vector<double>>& source_feats,
                       const std::vector<std::vector<double>>& target_feats) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot create " + path);
  const size_t dim = source_feats.empty()
                         ? (target_feats.empty() ? 0 : target_feats.front().size())
                         : source_feats.front().size();
  out << "domain";
  for (size_t j = 0; j < dim; ++j) out << ",f" << j;
  out << "\n";
  auto dump = [&](const std::vector<std::vector<double>>& rows, int label) {
    char buf[32];
    for (const auto& r : rows) {
      out << label;
      for (double v : r) {
        std::snprintf(buf, sizeof(buf), ",%.6g", v);
        out << buf;
      }
      out << "\n";
    }
  };
  dump(source_feats, 0);
  dump(target_feats, 1);
}

}  // namespace datk
