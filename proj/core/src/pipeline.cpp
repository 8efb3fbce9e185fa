#include "dgwm/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dgwm/errors.hpp"

namespace dgwm {

namespace {

constexpr std::uint64_t kDataStreamSalt = 0x9E3779B97F4A7C15ULL;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Tensor rows_tensor(const std::vector<std::vector<double>>& rows) {
  const int m = static_cast<int>(rows.size());
  const int n = static_cast<int>(rows.front().size());
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m) * n);
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return Tensor::from_values({m, n}, std::move(flat));
}

// Mean cross-entropy over a batch of views. Heavily mirrored by tests: the
// loss is the left fold of per-sample CE terms scaled by 1/m.
Tensor mean_ce_loss(const std::vector<std::vector<double>>& views,
                    const std::vector<int>& labels, const ModelBundle& bundle,
                    const Tensor& W_used) {
  Tensor x = rows_tensor(views);
  Tensor feats = bundle.f.forward(x);
  Tensor logits = matmul_nt(feats, W_used);
  Tensor acc;
  for (std::size_t i = 0; i < views.size(); ++i) {
    Tensor ce = cross_entropy(pick_row(logits, static_cast<int>(i)),
                              labels[i]);
    acc = i == 0 ? ce : add(acc, ce);
  }
  return scale(acc, 1.0 / static_cast<double>(views.size()));
}

Tensor mean_entropy_loss(const std::vector<std::vector<double>>& views,
                         const ModelBundle& bundle, const Tensor& W_used) {
  Tensor x = rows_tensor(views);
  Tensor feats = bundle.f.forward(x);
  Tensor logits = matmul_nt(feats, W_used);
  Tensor acc;
  for (std::size_t i = 0; i < views.size(); ++i) {
    Tensor h = entropy(pick_row(logits, static_cast<int>(i)));
    acc = i == 0 ? h : add(acc, h);
  }
  return scale(acc, 1.0 / static_cast<double>(views.size()));
}

// The learning-branch classifier for one domain, rebuilt from frozen state.
Tensor learning_classifier(const FrozenDomainStep& fd,
                           const ModelBundle& bundle) {
  const Tensor& W = bundle.classifier(fd.classifier_idx);
  if (!fd.build_mask_branch) return W;
  const ModelConfig& cfg = bundle.cfg;
  Tensor I_t;
  if (fd.mask_from_graph) {
    Tensor u = rows_tensor(fd.unlabeled_raw);
    I_t = aggregate_domain_info(extract_features(bundle, u), cfg.aggregation);
  } else {
    I_t = Tensor::from_values({cfg.feature_dim}, fd.I_value);
  }
  Tensor z = bundle.E.forward(I_t);
  Tensor dec_in;
  switch (cfg.noise_mode) {
    case NoiseMode::concat:
      dec_in = concat(z, Tensor::from_values({z.dim(0)}, fd.noise));
      break;
    case NoiseMode::add:
      dec_in = add(z, Tensor::from_values({z.dim(0)}, fd.noise));
      break;
    case NoiseMode::none:
      dec_in = z;
      break;
  }
  Tensor I_lrn = bundle.D_dec.forward(dec_in);
  Tensor M_lrn = build_mask(bundle, I_lrn, cfg.mask_variant);
  return modulate(W, M_lrn);
}

}  // namespace

std::string to_string(Baseline b) {
  switch (b) {
    case Baseline::fixmatch: return "fixmatch";
    case Baseline::entmin: return "entmin";
    case Baseline::supervised_only: return "supervised_only";
  }
  return "fixmatch";
}

Baseline parse_baseline(const std::string& s) {
  std::string t = s;
  for (char& c : t)
    if (c == '-') c = '_';
  if (t == "fixmatch") return Baseline::fixmatch;
  if (t == "entmin") return Baseline::entmin;
  if (t == "supervised_only") return Baseline::supervised_only;
  throw ParameterError("unknown baseline: " + s);
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ParameterError("TrainConfig: epochs must be >= 0");
  if (steps_per_epoch < 1) {
    throw ParameterError("TrainConfig: steps_per_epoch must be >= 1");
  }
  if (labeled_batch < 1 || unlabeled_batch < 1) {
    throw ParameterError("TrainConfig: batch sizes must be >= 1");
  }
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw ParameterError("TrainConfig: tau must lie in (0, 1]");
  }
  if (entmin_weight < 0.0) {
    throw ParameterError("TrainConfig: entmin_weight must be >= 0");
  }
  sgd.validate();
}

PseudoLabelResult pseudo_label_on_views(
    const std::vector<std::vector<double>>& views, const ModelBundle& bundle,
    std::span<const double> classifier, double tau,
    const std::vector<int>* truth) {
  const int C = bundle.cfg.num_classes;
  const int d = bundle.cfg.feature_dim;
  PseudoLabelResult out;
  out.candidates = static_cast<int>(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) {
    std::vector<double> feat = bundle.f.forward_values(views[i]);
    std::vector<double> logits(C, 0.0);
    for (int c = 0; c < C; ++c) {
      double acc = 0.0;
      for (int j = 0; j < d; ++j) acc += classifier[c * d + j] * feat[j];
      logits[c] = acc;
    }
    std::vector<double> probs = softmax_values(logits);
    const int label = argmax(probs);
    const double conf = probs[label];
    if (conf >= tau) {
      out.accepted.push_back(static_cast<int>(i));
      out.labels.push_back(label);
      out.confidences.push_back(conf);
      if (truth && (*truth)[i] == label) ++out.correct;
    }
  }
  if (!out.accepted.empty() && truth) {
    out.pl_accuracy =
        static_cast<double>(out.correct) / out.accepted.size();
  }
  if (out.candidates > 0) {
    out.utilization =
        static_cast<double>(out.accepted.size()) / out.candidates;
  }
  return out;
}

PseudoLabelResult pseudo_label(const DomainBatch& batch,
                               const ModelBundle& bundle,
                               std::span<const double> mask_values, double tau,
                               const Augmenter& aug, Rng& rng,
                               const std::vector<int>* truth,
                               int classifier_idx) {
  const Tensor& W = bundle.classifier(classifier_idx);
  std::vector<double> cls = W.value();
  if (!mask_values.empty()) {
    if (mask_values.size() != cls.size()) {
      throw DimensionError("pseudo_label: mask size mismatch");
    }
    for (std::size_t i = 0; i < cls.size(); ++i) cls[i] *= mask_values[i];
  }
  std::vector<std::vector<double>> views;
  views.reserve(batch.unlabeled_x.size());
  for (const auto& u : batch.unlabeled_x) views.push_back(aug.weak(u, rng));
  return pseudo_label_on_views(views, bundle, cls, tau, truth);
}

Tensor unlabeled_loss(const DomainBatch& batch, const ModelBundle& bundle,
                      const Tensor& W_lrn, const PseudoLabelResult& plr,
                      const Augmenter& aug, Rng& rng) {
  if (plr.accepted.empty()) return Tensor::scalar(0.0);
  std::vector<std::vector<double>> views;
  views.reserve(plr.accepted.size());
  for (int idx : plr.accepted) {
    if (idx < 0 || idx >= static_cast<int>(batch.unlabeled_x.size())) {
      throw ContractError("unlabeled_loss: accepted index out of range");
    }
    views.push_back(aug.strong(batch.unlabeled_x[idx], rng));
  }
  return mean_ce_loss(views, plr.labels, bundle, W_lrn);
}

Tensor labeled_loss(const DomainBatch& batch, const ModelBundle& bundle,
                    const Tensor& W_lrn, const Augmenter& aug, Rng& rng) {
  if (batch.labeled_x.empty()) {
    throw ParameterError("labeled_loss: empty labeled set");
  }
  std::vector<std::vector<double>> views;
  views.reserve(batch.labeled_x.size());
  for (const auto& x : batch.labeled_x) views.push_back(aug.weak(x, rng));
  return mean_ce_loss(views, batch.labeled_y, bundle, W_lrn);
}

Tensor entmin_loss(const DomainBatch& batch, const ModelBundle& bundle,
                   const Tensor& W_lrn, const Augmenter& aug, Rng& rng) {
  if (batch.unlabeled_x.empty()) {
    throw ParameterError("entmin_loss: empty unlabeled set");
  }
  std::vector<std::vector<double>> views;
  views.reserve(batch.unlabeled_x.size());
  for (const auto& u : batch.unlabeled_x) views.push_back(aug.weak(u, rng));
  return mean_entropy_loss(views, bundle, W_lrn);
}

FrozenDomainStep prepare_domain_step(const DomainBatch& batch,
                                     const BatchDiagnostics& diag,
                                     int classifier_idx,
                                     const ModelBundle& bundle,
                                     const TrainConfig& tcfg,
                                     const Augmenter& aug, Rng& rng) {
  const ModelConfig& cfg = bundle.cfg;
  FrozenDomainStep fd;
  fd.domain_id = batch.domain_id;
  fd.classifier_idx = classifier_idx;
  fd.build_mask_branch = tcfg.modulation;

  std::vector<double> mss_values;
  if (tcfg.modulation) {
    MaskValues mv = mask_values_for_batch(bundle, batch.unlabeled_x);
    mss_values = std::move(mv.M_ss);
    fd.I_value = std::move(mv.I);
    fd.mask_from_graph =
        !cfg.detach_domain_info && cfg.aggregation == Aggregation::mean;
    if (fd.mask_from_graph) fd.unlabeled_raw = batch.unlabeled_x;
    if (cfg.noise_mode != NoiseMode::none) {
      fd.noise = rng.gaussian(static_cast<std::size_t>(cfg.latent()),
                              cfg.epsilon_sq);
    }
  }

  switch (tcfg.baseline) {
    case Baseline::fixmatch: {
      fd.plr = pseudo_label(
          batch, bundle,
          tcfg.modulation ? std::span<const double>(mss_values)
                          : std::span<const double>(),
          tcfg.tau, aug, rng, &diag.unlabeled_truth, classifier_idx);
      for (int idx : fd.plr.accepted) {
        fd.strong_views.push_back(aug.strong(batch.unlabeled_x[idx], rng));
      }
      fd.pseudo_labels = fd.plr.labels;
      break;
    }
    case Baseline::entmin: {
      for (const auto& u : batch.unlabeled_x) {
        fd.entmin_views.push_back(aug.weak(u, rng));
      }
      fd.plr.candidates = static_cast<int>(batch.unlabeled_x.size());
      break;
    }
    case Baseline::supervised_only:
      fd.plr.candidates = static_cast<int>(batch.unlabeled_x.size());
      break;
  }

  for (const auto& x : batch.labeled_x) {
    fd.labeled_views.push_back(aug.weak(x, rng));
  }
  fd.labeled_y = batch.labeled_y;
  return fd;
}

FrozenStep prepare_step(const StepBatch& sb, const ModelBundle& bundle,
                        const TrainConfig& tcfg, const Augmenter& aug,
                        Rng& rng) {
  if (sb.domains.empty()) {
    throw ParameterError("prepare_step: no domain batches");
  }
  FrozenStep fs;
  for (std::size_t k = 0; k < sb.domains.size(); ++k) {
    fs.domains.push_back(prepare_domain_step(
        sb.domains[k], sb.diagnostics[k], static_cast<int>(k), bundle, tcfg,
        aug, rng));
  }
  return fs;
}

Tensor frozen_domain_loss(const FrozenDomainStep& fd, const ModelBundle& bundle,
                          const TrainConfig& tcfg, double* labeled_out,
                          double* unlabeled_out) {
  Tensor W_used = learning_classifier(fd, bundle);
  Tensor l_lab;
  Tensor l_unl;
  if (!fd.labeled_views.empty()) {
    l_lab = mean_ce_loss(fd.labeled_views, fd.labeled_y, bundle, W_used);
  }
  switch (tcfg.baseline) {
    case Baseline::fixmatch:
      l_unl = fd.strong_views.empty()
                  ? Tensor::scalar(0.0)
                  : mean_ce_loss(fd.strong_views, fd.pseudo_labels, bundle,
                                 W_used);
      break;
    case Baseline::entmin:
      l_unl = scale(mean_entropy_loss(fd.entmin_views, bundle, W_used),
                    tcfg.entmin_weight);
      break;
    case Baseline::supervised_only:
      break;
  }
  if (labeled_out) *labeled_out = l_lab.defined() ? l_lab.item() : 0.0;
  if (unlabeled_out) *unlabeled_out = l_unl.defined() ? l_unl.item() : 0.0;
  if (l_lab.defined() && l_unl.defined()) return add(l_lab, l_unl);
  if (l_lab.defined()) return l_lab;
  if (l_unl.defined()) return l_unl;
  return Tensor::scalar(0.0);
}

Tensor frozen_step_loss(const FrozenStep& fs, const ModelBundle& bundle,
                        const TrainConfig& tcfg,
                        StepLossBreakdown* breakdown) {
  Tensor total;
  for (std::size_t k = 0; k < fs.domains.size(); ++k) {
    double lab = 0.0;
    double unl = 0.0;
    Tensor lk = frozen_domain_loss(fs.domains[k], bundle, tcfg, &lab, &unl);
    if (breakdown) {
      breakdown->loss_labeled.push_back(lab);
      breakdown->loss_unlabeled.push_back(unl);
    }
    total = k == 0 ? lk : add(total, lk);
  }
  return total;
}

StepMetrics train_step(const StepBatch& sb, ModelBundle& bundle,
                       SgdOptimizer& opt, const TrainConfig& tcfg,
                       const Augmenter& aug, Rng& rng,
                       std::vector<std::vector<double>>* domain_info) {
  if (sb.domains.empty()) throw ParameterError("train_step: no domains");
  StepMetrics m;
  if (!tcfg.update_per_domain) {
    FrozenStep fs = prepare_step(sb, bundle, tcfg, aug, rng);
    StepLossBreakdown bd;
    opt.zero_grad();
    Tensor loss = frozen_step_loss(fs, bundle, tcfg, &bd);
    m.loss_total = loss.item();
    if (loss.requires_grad()) loss.backward();
    opt.step();
    m.loss_labeled = std::move(bd.loss_labeled);
    m.loss_unlabeled = std::move(bd.loss_unlabeled);
    for (const FrozenDomainStep& fd : fs.domains) {
      m.accepted.push_back(static_cast<int>(fd.plr.accepted.size()));
      m.correct.push_back(fd.plr.correct);
      m.candidates.push_back(fd.plr.candidates);
      if (domain_info) domain_info->push_back(fd.I_value);
    }
    return m;
  }
  for (std::size_t k = 0; k < sb.domains.size(); ++k) {
    FrozenDomainStep fd = prepare_domain_step(
        sb.domains[k], sb.diagnostics[k], static_cast<int>(k), bundle, tcfg,
        aug, rng);
    double lab = 0.0;
    double unl = 0.0;
    opt.zero_grad();
    Tensor lk = frozen_domain_loss(fd, bundle, tcfg, &lab, &unl);
    m.loss_total += lk.item();
    if (lk.requires_grad()) lk.backward();
    opt.step();
    m.loss_labeled.push_back(lab);
    m.loss_unlabeled.push_back(unl);
    m.accepted.push_back(static_cast<int>(fd.plr.accepted.size()));
    m.correct.push_back(fd.plr.correct);
    m.candidates.push_back(fd.plr.candidates);
    if (domain_info) domain_info->push_back(fd.I_value);
  }
  return m;
}

void write_run_record_csv(const RunRecord& rec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("run record: cannot open " + path);
  out << "epoch,domain,pl_accuracy,pl_utilization,loss_labeled,"
         "loss_unlabeled,target_accuracy,lr_backbone,lr_head,wall_seconds\n";
  for (const RunRecord::Row& r : rec.rows) {
    out << r.epoch << "," << r.domain << "," << format_double(r.pl_accuracy)
        << "," << format_double(r.pl_utilization) << ","
        << format_double(r.loss_labeled) << ","
        << format_double(r.loss_unlabeled) << ","
        << format_double(r.target_accuracy) << ","
        << format_double(r.lr_backbone) << "," << format_double(r.lr_head)
        << "," << format_double(r.wall_seconds) << "\n";
  }
  if (!out) throw IoError("run record: write failed: " + path);
}

RunRecord read_run_record_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("run record: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("run record: empty file");
  RunRecord rec;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    std::vector<std::string> cols;
    while (std::getline(ls, tok, ',')) cols.push_back(tok);
    if (cols.size() != 10) throw IoError("run record: malformed row");
    RunRecord::Row r;
    r.epoch = std::stoi(cols[0]);
    r.domain = std::stoi(cols[1]);
    r.pl_accuracy = std::strtod(cols[2].c_str(), nullptr);
    r.pl_utilization = std::strtod(cols[3].c_str(), nullptr);
    r.loss_labeled = std::strtod(cols[4].c_str(), nullptr);
    r.loss_unlabeled = std::strtod(cols[5].c_str(), nullptr);
    r.target_accuracy = std::strtod(cols[6].c_str(), nullptr);
    r.lr_backbone = std::strtod(cols[7].c_str(), nullptr);
    r.lr_head = std::strtod(cols[8].c_str(), nullptr);
    r.wall_seconds = std::strtod(cols[9].c_str(), nullptr);
    rec.rows.push_back(r);
  }
  return rec;
}

TrainResult train(const TrainingView& view, const TrainConfig& tcfg,
                  ModelConfig mcfg, const EpochHook* hook,
                  DomainInfoLog* info_log) {
  tcfg.validate();
  if (!view.data || view.sources.empty()) {
    throw ParameterError("train: empty training view");
  }
  mcfg.input_dim = view.data->input_dim();
  mcfg.num_classes = view.data->num_classes();
  if (mcfg.separate_classifiers) {
    mcfg.num_classifiers = static_cast<int>(view.sources.size());
  }
  mcfg.validate();

  SgdConfig sgd = tcfg.sgd;
  sgd.total_epochs = tcfg.epochs;

  Rng init_rng(tcfg.seed);
  TrainResult res;
  res.bundle = ModelBundle::init(mcfg, init_rng);
  Rng data_rng(tcfg.seed ^ kDataStreamSalt);
  Augmenter aug = Augmenter::fit(view);

  SgdOptimizer opt(sgd);
  for (const Tensor& t : res.bundle.backbone_params()) {
    opt.add_backbone_param(t);
  }
  for (const Tensor& t : res.bundle.head_params()) opt.add_head_param(t);

  const int n_dom = static_cast<int>(view.sources.size());
  const auto& target_samples = view.data->domains[view.target_domain];

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    opt.set_epoch(epoch);
    std::vector<double> lab_sum(n_dom, 0.0);
    std::vector<double> unl_sum(n_dom, 0.0);
    std::vector<long> acc_cnt(n_dom, 0);
    std::vector<long> cor_cnt(n_dom, 0);
    std::vector<long> cand_cnt(n_dom, 0);
    std::vector<std::vector<double>> step_info;
    for (int step = 0; step < tcfg.steps_per_epoch; ++step) {
      StepBatch sb = sample_step_batches(view, tcfg.labeled_batch,
                                         tcfg.unlabeled_batch, data_rng);
      step_info.clear();
      StepMetrics sm =
          train_step(sb, res.bundle, opt, tcfg, aug, data_rng,
                     info_log ? &step_info : nullptr);
      for (int k = 0; k < n_dom; ++k) {
        lab_sum[k] += sm.loss_labeled[k];
        unl_sum[k] += sm.loss_unlabeled[k];
        acc_cnt[k] += sm.accepted[k];
        cor_cnt[k] += sm.correct[k];
        cand_cnt[k] += sm.candidates[k];
      }
      if (info_log) {
        for (int k = 0; k < n_dom; ++k) {
          info_log->push_back(
              {epoch, step, view.sources[k].domain_id, step_info[k]});
        }
      }
    }
    const double target_acc = evaluate_accuracy(res.bundle, target_samples);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    for (int k = 0; k < n_dom; ++k) {
      RunRecord::Row row;
      row.epoch = epoch;
      row.domain = view.sources[k].domain_id;
      row.pl_accuracy =
          acc_cnt[k] > 0 ? static_cast<double>(cor_cnt[k]) / acc_cnt[k] : 0.0;
      row.pl_utilization =
          cand_cnt[k] > 0 ? static_cast<double>(acc_cnt[k]) / cand_cnt[k]
                          : 0.0;
      row.loss_labeled = lab_sum[k] / tcfg.steps_per_epoch;
      row.loss_unlabeled = unl_sum[k] / tcfg.steps_per_epoch;
      row.target_accuracy = target_acc;
      row.lr_backbone = opt.lr_backbone();
      row.lr_head = opt.lr_head();
      row.wall_seconds = wall;
      res.record.rows.push_back(row);
    }
    if (hook && *hook) (*hook)(epoch, res.bundle);
  }
  return res;
}

int predict(const ModelBundle& bundle, std::span<const double> x) {
  if (static_cast<int>(x.size()) != bundle.cfg.input_dim) {
    throw DimensionError("predict: input width mismatch");
  }
  std::vector<double> feat = bundle.f.forward_values(x);
  const int C = bundle.cfg.num_classes;
  const int d = bundle.cfg.feature_dim;
  std::vector<double> cls = bundle.W[0].value();
  if (bundle.W.size() > 1) {
    for (std::size_t k = 1; k < bundle.W.size(); ++k) {
      const auto& wk = bundle.W[k].value();
      for (std::size_t i = 0; i < cls.size(); ++i) cls[i] += wk[i];
    }
    const double inv = 1.0 / static_cast<double>(bundle.W.size());
    for (double& v : cls) v *= inv;
  }
  std::vector<double> logits(C, 0.0);
  for (int c = 0; c < C; ++c) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) acc += cls[c * d + j] * feat[j];
    logits[c] = acc;
  }
  return argmax(logits);
}

double evaluate_accuracy(const ModelBundle& bundle,
                         const std::vector<Sample>& samples) {
  if (samples.empty()) return 0.0;
  long correct = 0;
  for (const Sample& s : samples) {
    if (predict(bundle, s.x) == s.label) ++correct;
  }
  return static_cast<double>(correct) / samples.size();
}

}  // namespace dgwm
