#pragma once

#include <span>
#include <string>
#include <vector>

#include "dgwm/data.hpp"
#include "dgwm/model.hpp"
#include "dgwm/pipeline.hpp"

namespace dgwm {

// Sign split of the feature coordinates under the mask head v_f. Complementary
// and exhaustive; v_f[j] == 0 lands in J_plus.
struct FeaturePartition {
  std::vector<int> J_plus;
  std::vector<int> J_minus;
};

FeaturePartition partition_features(std::span<const double> v_f);

// Row-major C x d selector with s[c][j] = 1 when feature j is retained for
// class c: rows with v_cls[c] > 0 keep J_plus, rows with v_cls[c] < 0 keep
// J_minus, rows with v_cls[c] == 0 keep everything. flip_sets swaps the role
// of the two sets (control condition; zero rows still keep everything).
std::vector<double> restriction_selector(const FeaturePartition& p,
                                         std::span<const double> v_cls, int d,
                                         bool flip_sets);

// Thresholded pseudo-labels from the masked classifier with each class row
// restricted to its prescribed feature subset. Runs on the given
// already-augmented views so it is directly comparable with a standard
// pseudo_label_on_views call over the same views.
PseudoLabelResult restricted_pseudo_label(
    const std::vector<std::vector<double>>& views, const ModelBundle& bundle,
    const MaskValues& mv, double tau, const std::vector<int>* truth,
    bool flip_sets = false, int classifier_idx = 0);

// |{i accepted by both with equal label}| / |union of accepted sets|.
// Symmetric; an empty union counts as full agreement.
double pl_agreement(const PseudoLabelResult& a, const PseudoLabelResult& b);

// Checks the masked-gradient identity for one example: the backward pass
// through CE((W (.) M) f_x, y), the closed form (softmax(z) - onehot(y))
// f_x^T (.) M, and a finite-difference probe of W must all agree.
struct GradientIdentityReport {
  std::vector<double> grad_backward;  // row-major C x d
  std::vector<double> grad_closed;
  std::vector<double> grad_fd;
  double backward_vs_closed = 0.0;  // max relative discrepancies
  double backward_vs_fd = 0.0;
  double closed_vs_fd = 0.0;
  double max_discrepancy = 0.0;
};

GradientIdentityReport verify_gradient_identity(const Tensor& W,
                                                const Tensor& M,
                                                std::span<const double> f_x,
                                                int target);

// PL accuracy and utilization per threshold for the modulated and the raw
// classifier over the same held-out batches. Confidences are computed once
// per variant and re-thresholded, so utilization is exactly non-increasing
// in tau.
struct SweepResult {
  std::vector<double> thresholds;
  std::vector<double> modulated_pl_accuracy;   // per threshold
  std::vector<double> modulated_utilization;
  std::vector<double> baseline_pl_accuracy;
  std::vector<double> baseline_utilization;
};

SweepResult threshold_sweep(const ModelBundle& bundle,
                            const TrainingView& view,
                            const std::vector<double>& taus, int num_batches,
                            int unlabeled_batch, const Augmenter& aug,
                            Rng& rng);

// Trains on growing source prefixes with the target fixed, with and without
// modulation, and summarizes each run by its mean per-row PL accuracy over
// the second half of training.
struct AddingDomainsResult {
  std::vector<int> prefix_sizes;
  std::vector<RunRecord> modulated_runs;  // parallel to prefix_sizes
  std::vector<RunRecord> baseline_runs;
  std::vector<double> modulated_pl;  // summary per prefix
  std::vector<double> baseline_pl;
};

double late_epoch_pl_accuracy(const RunRecord& rec, int total_epochs);

AddingDomainsResult adding_domains_study(const MultiDomainDataset& ds,
                                         const SplitPlan& proto,
                                         const TrainConfig& tcfg,
                                         const ModelConfig& mcfg);

// Identical short runs with and without modulation; the first epoch is
// treated as warm-up and excluded from the means.
struct OverheadReport {
  double mean_epoch_seconds_off = 0.0;
  double mean_epoch_seconds_on = 0.0;
  double overhead_percent = 0.0;
  int epochs_measured = 0;
};

OverheadReport overhead_report(const TrainingView& view,
                               const TrainConfig& tcfg,
                               const ModelConfig& mcfg);

// CSV of the recorded domain-information vectors, one row per
// (epoch, step, domain): epoch,step,domain_id,I_0..I_{d-1}. Values
// round-trip exactly through import.
void export_domain_info(const DomainInfoLog& log, const std::string& path);
DomainInfoLog import_domain_info(const std::string& path);

}  // namespace dgwm
