#include "dgwm/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "dgwm/errors.hpp"
#include "dgwm/gradcheck.hpp"

namespace dgwm {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

FeaturePartition partition_features(std::span<const double> v_f) {
  FeaturePartition p;
  for (std::size_t j = 0; j < v_f.size(); ++j) {
    if (v_f[j] >= 0.0) {
      p.J_plus.push_back(static_cast<int>(j));
    } else {
      p.J_minus.push_back(static_cast<int>(j));
    }
  }
  return p;
}

std::vector<double> restriction_selector(const FeaturePartition& p,
                                         std::span<const double> v_cls, int d,
                                         bool flip_sets) {
  const int C = static_cast<int>(v_cls.size());
  std::vector<double> sel(static_cast<std::size_t>(C) * d, 0.0);
  for (int c = 0; c < C; ++c) {
    if (v_cls[c] == 0.0) {
      for (int j = 0; j < d; ++j) sel[c * d + j] = 1.0;
      continue;
    }
    const bool wants_plus = (v_cls[c] > 0.0) != flip_sets;
    const std::vector<int>& keep = wants_plus ? p.J_plus : p.J_minus;
    for (int j : keep) sel[c * d + j] = 1.0;
  }
  return sel;
}

PseudoLabelResult restricted_pseudo_label(
    const std::vector<std::vector<double>>& views, const ModelBundle& bundle,
    const MaskValues& mv, double tau, const std::vector<int>* truth,
    bool flip_sets, int classifier_idx) {
  const int C = bundle.cfg.num_classes;
  const int d = bundle.cfg.feature_dim;
  FeaturePartition p = partition_features(mv.v_f);
  std::vector<double> sel = restriction_selector(p, mv.v_cls, d, flip_sets);
  std::vector<double> cls = bundle.classifier(classifier_idx).value();
  if (mv.M_ss.size() != cls.size() || sel.size() != cls.size()) {
    throw DimensionError("restricted_pseudo_label: mask size mismatch");
  }
  for (std::size_t i = 0; i < cls.size(); ++i) {
    cls[i] *= mv.M_ss[i] * sel[i];
  }
  return pseudo_label_on_views(views, bundle, cls, tau, truth);
}

double pl_agreement(const PseudoLabelResult& a, const PseudoLabelResult& b) {
  std::unordered_map<int, int> la;
  for (std::size_t i = 0; i < a.accepted.size(); ++i) {
    la[a.accepted[i]] = a.labels[i];
  }
  std::unordered_map<int, int> lb;
  for (std::size_t i = 0; i < b.accepted.size(); ++i) {
    lb[b.accepted[i]] = b.labels[i];
  }
  std::size_t both_equal = 0;
  std::size_t union_size = la.size();
  for (const auto& [idx, lab] : lb) {
    auto it = la.find(idx);
    if (it == la.end()) {
      ++union_size;
    } else if (it->second == lab) {
      ++both_equal;
    }
  }
  if (union_size == 0) return 1.0;
  return static_cast<double>(both_equal) / union_size;
}

GradientIdentityReport verify_gradient_identity(const Tensor& W,
                                                const Tensor& M,
                                                std::span<const double> f_x,
                                                int target) {
  if (W.shape().size() != 2 || M.shape() != W.shape()) {
    throw DimensionError("verify_gradient_identity: W and M must match CxD");
  }
  const int C = W.dim(0);
  const int d = W.dim(1);
  if (static_cast<int>(f_x.size()) != d) {
    throw DimensionError("verify_gradient_identity: feature width mismatch");
  }
  Tensor W_var =
      Tensor::from_values(W.shape(), W.value(), /*requires_grad=*/true);
  Tensor M_const = Tensor::from_values(M.shape(), M.value());
  Tensor feats =
      Tensor::from_values({1, d}, std::vector<double>(f_x.begin(), f_x.end()));

  auto loss_graph = [&]() {
    Tensor W_mod = modulate(W_var, M_const);
    Tensor logits = matmul_nt(feats, W_mod);
    return cross_entropy(pick_row(logits, 0), target);
  };

  GradientIdentityReport rep;
  Tensor loss = loss_graph();
  loss.backward();
  rep.grad_backward = W_var.grad();

  // Closed form: (softmax(z) - onehot(y)) f_x^T, entrywise times M.
  std::vector<double> z(C, 0.0);
  const auto& wv = W_var.value();
  const auto& mv = M_const.value();
  for (int c = 0; c < C; ++c) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) acc += wv[c * d + j] * mv[c * d + j] * f_x[j];
    z[c] = acc;
  }
  std::vector<double> probs = softmax_values(z);
  rep.grad_closed.assign(static_cast<std::size_t>(C) * d, 0.0);
  for (int c = 0; c < C; ++c) {
    const double gz = probs[c] - (c == target ? 1.0 : 0.0);
    for (int j = 0; j < d; ++j) {
      rep.grad_closed[c * d + j] = gz * f_x[j] * mv[c * d + j];
    }
  }

  auto value_fn = [&]() { return loss_graph().item(); };
  rep.grad_fd = finite_diff_grad(value_fn, W_var);

  rep.backward_vs_closed = max_rel_error(rep.grad_backward, rep.grad_closed);
  // Central differences carry ~1e-11 of absolute roundoff noise; entries far
  // below the 1e-4 floor are compared absolutely so that noise on near-zero
  // gradients does not masquerade as relative error.
  rep.backward_vs_fd = max_rel_error(rep.grad_backward, rep.grad_fd, 1e-4);
  rep.closed_vs_fd = max_rel_error(rep.grad_closed, rep.grad_fd, 1e-4);
  rep.max_discrepancy = std::max(
      rep.backward_vs_closed, std::max(rep.backward_vs_fd, rep.closed_vs_fd));
  return rep;
}

SweepResult threshold_sweep(const ModelBundle& bundle,
                            const TrainingView& view,
                            const std::vector<double>& taus, int num_batches,
                            int unlabeled_batch, const Augmenter& aug,
                            Rng& rng) {
  for (double t : taus) {
    if (!(t > 0.0 && t <= 1.0)) {
      throw ParameterError("threshold_sweep: tau outside (0, 1]");
    }
  }
  struct Scored {
    double conf;
    int pred;
    int truth;
  };
  std::vector<Scored> mod_scores;
  std::vector<Scored> base_scores;

  const std::vector<double> raw_cls = bundle.classifier(0).value();
  for (int b = 0; b < num_batches; ++b) {
    StepBatch sb = sample_step_batches(view, 1, unlabeled_batch, rng);
    for (std::size_t k = 0; k < sb.domains.size(); ++k) {
      const DomainBatch& batch = sb.domains[k];
      const std::vector<int>& truth = sb.diagnostics[k].unlabeled_truth;
      std::vector<std::vector<double>> views;
      views.reserve(batch.unlabeled_x.size());
      for (const auto& u : batch.unlabeled_x) views.push_back(aug.weak(u, rng));

      MaskValues mv = mask_values_for_batch(bundle, batch.unlabeled_x);
      std::vector<double> mod_cls = raw_cls;
      for (std::size_t i = 0; i < mod_cls.size(); ++i) mod_cls[i] *= mv.M_ss[i];

      const int C = bundle.cfg.num_classes;
      const int d = bundle.cfg.feature_dim;
      for (std::size_t i = 0; i < views.size(); ++i) {
        std::vector<double> feat = bundle.f.forward_values(views[i]);
        std::vector<double> z_mod(C, 0.0);
        std::vector<double> z_base(C, 0.0);
        for (int c = 0; c < C; ++c) {
          double am = 0.0;
          double ab = 0.0;
          for (int j = 0; j < d; ++j) {
            am += mod_cls[c * d + j] * feat[j];
            ab += raw_cls[c * d + j] * feat[j];
          }
          z_mod[c] = am;
          z_base[c] = ab;
        }
        std::vector<double> pm = softmax_values(z_mod);
        std::vector<double> pb = softmax_values(z_base);
        const int am = argmax(pm);
        const int ab = argmax(pb);
        mod_scores.push_back({pm[am], am, truth[i]});
        base_scores.push_back({pb[ab], ab, truth[i]});
      }
    }
  }

  auto tally = [](const std::vector<Scored>& scores, double tau,
                  double& pl_acc, double& util) {
    long accepted = 0;
    long correct = 0;
    for (const Scored& s : scores) {
      if (s.conf >= tau) {
        ++accepted;
        if (s.pred == s.truth) ++correct;
      }
    }
    util = scores.empty()
               ? 0.0
               : static_cast<double>(accepted) / scores.size();
    pl_acc = accepted > 0 ? static_cast<double>(correct) / accepted : 0.0;
  };

  SweepResult res;
  res.thresholds = taus;
  for (double tau : taus) {
    double acc = 0.0;
    double util = 0.0;
    tally(mod_scores, tau, acc, util);
    res.modulated_pl_accuracy.push_back(acc);
    res.modulated_utilization.push_back(util);
    tally(base_scores, tau, acc, util);
    res.baseline_pl_accuracy.push_back(acc);
    res.baseline_utilization.push_back(util);
  }
  return res;
}

double late_epoch_pl_accuracy(const RunRecord& rec, int total_epochs) {
  const int first = total_epochs / 2;
  double sum = 0.0;
  long count = 0;
  for (const RunRecord::Row& r : rec.rows) {
    if (r.epoch >= first) {
      sum += r.pl_accuracy;
      ++count;
    }
  }
  return count > 0 ? sum / count : 0.0;
}

AddingDomainsResult adding_domains_study(const MultiDomainDataset& ds,
                                         const SplitPlan& proto,
                                         const TrainConfig& tcfg,
                                         const ModelConfig& mcfg) {
  std::vector<SplitPlan> plans = adding_domain_plans(ds, proto);
  if (plans.size() < 2) {
    throw ParameterError("adding_domains_study: need at least 2 sources");
  }
  AddingDomainsResult res;
  for (const SplitPlan& plan : plans) {
    TrainingView view = split(ds, plan);
    res.prefix_sizes.push_back(static_cast<int>(plan.source_domains.size()));

    TrainConfig on = tcfg;
    on.modulation = true;
    TrainResult tr_on = train(view, on, mcfg);
    res.modulated_pl.push_back(
        late_epoch_pl_accuracy(tr_on.record, on.epochs));
    res.modulated_runs.push_back(std::move(tr_on.record));

    TrainConfig off = tcfg;
    off.modulation = false;
    TrainResult tr_off = train(view, off, mcfg);
    res.baseline_pl.push_back(
        late_epoch_pl_accuracy(tr_off.record, off.epochs));
    res.baseline_runs.push_back(std::move(tr_off.record));
  }
  return res;
}

OverheadReport overhead_report(const TrainingView& view,
                               const TrainConfig& tcfg,
                               const ModelConfig& mcfg) {
  auto mean_epoch_seconds = [&](bool modulation) {
    TrainConfig c = tcfg;
    c.modulation = modulation;
    TrainResult tr = train(view, c, mcfg);
    // One wall_seconds value per epoch (rows repeat it per domain); skip the
    // warm-up epoch.
    std::unordered_map<int, double> per_epoch;
    for (const RunRecord::Row& r : tr.record.rows) {
      per_epoch[r.epoch] = r.wall_seconds;
    }
    double sum = 0.0;
    int count = 0;
    for (const auto& [epoch, secs] : per_epoch) {
      if (epoch == 0) continue;
      sum += secs;
      ++count;
    }
    if (count == 0) throw ParameterError("overhead_report: needs >= 2 epochs");
    return std::pair<double, int>(sum / count, count);
  };
  OverheadReport rep;
  auto [off_mean, off_count] = mean_epoch_seconds(false);
  auto [on_mean, on_count] = mean_epoch_seconds(true);
  rep.mean_epoch_seconds_off = off_mean;
  rep.mean_epoch_seconds_on = on_mean;
  rep.epochs_measured = off_count;
  rep.overhead_percent = (on_mean - off_mean) / off_mean * 100.0;
  return rep;
}

void export_domain_info(const DomainInfoLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("domain info: cannot open " + path);
  const std::size_t d = log.empty() ? 0 : log.front().I.size();
  out << "epoch,step,domain_id";
  for (std::size_t j = 0; j < d; ++j) out << ",I_" << j;
  out << "\n";
  for (const DomainInfoRecord& r : log) {
    if (r.I.size() != d) {
      throw ContractError("domain info: inconsistent vector widths");
    }
    out << r.epoch << "," << r.step << "," << r.domain_id;
    for (double v : r.I) out << "," << format_double(v);
    out << "\n";
  }
  if (!out) throw IoError("domain info: write failed: " + path);
}

DomainInfoLog import_domain_info(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("domain info: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("domain info: empty file");
  DomainInfoLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    DomainInfoRecord rec;
    if (!std::getline(ls, tok, ',')) throw IoError("domain info: bad row");
    rec.epoch = std::stoi(tok);
    if (!std::getline(ls, tok, ',')) throw IoError("domain info: bad row");
    rec.step = std::stoi(tok);
    if (!std::getline(ls, tok, ',')) throw IoError("domain info: bad row");
    rec.domain_id = std::stoi(tok);
    while (std::getline(ls, tok, ',')) {
      rec.I.push_back(std::strtod(tok.c_str(), nullptr));
    }
    log.push_back(std::move(rec));
  }
  return log;
}

}  // namespace dgwm
