#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dgwm/data.hpp"
#include "dgwm/model.hpp"
#include "dgwm/optim.hpp"

namespace dgwm {

enum class Baseline { fixmatch, entmin, supervised_only };
std::string to_string(Baseline b);
Baseline parse_baseline(const std::string& s);

struct TrainConfig {
  int epochs = 20;
  int steps_per_epoch = 50;
  int labeled_batch = 16;
  int unlabeled_batch = 16;
  double tau = 0.95;
  Baseline baseline = Baseline::fixmatch;
  double entmin_weight = 1.0;
  bool modulation = true;
  // Paper-ambiguous update granularity: false accumulates the per-domain
  // losses into one update per step; true updates after every domain.
  bool update_per_domain = false;
  std::uint64_t seed = 1;
  SgdConfig sgd;  // total_epochs is synced to `epochs` by train()

  void validate() const;
};

struct PseudoLabelResult {
  std::vector<int> accepted;        // indices into the unlabeled list, ascending
  std::vector<int> labels;          // parallel to accepted
  std::vector<double> confidences;  // parallel to accepted
  int candidates = 0;
  int correct = 0;          // accepted labels matching hidden truth, if known
  double pl_accuracy = 0.0;  // 0 when nothing accepted or truth unknown
  double utilization = 0.0;
};

// Thresholding rule on already-augmented views against a value-space
// classifier matrix (row-major C x d). No gradient can flow: everything here
// is plain arithmetic.
PseudoLabelResult pseudo_label_on_views(
    const std::vector<std::vector<double>>& views, const ModelBundle& bundle,
    std::span<const double> classifier, double tau,
    const std::vector<int>* truth);

// Weak-augments every unlabeled input (consuming rng), multiplies the
// domain-shared classifier by mask_values when one is supplied (empty span =
// unmodulated), then applies the confidence threshold.
PseudoLabelResult pseudo_label(const DomainBatch& batch,
                               const ModelBundle& bundle,
                               std::span<const double> mask_values, double tau,
                               const Augmenter& aug, Rng& rng,
                               const std::vector<int>* truth,
                               int classifier_idx = 0);

// Mean cross-entropy of strongly augmented accepted points against their
// frozen pseudo-labels; exact zero when nothing was accepted.
Tensor unlabeled_loss(const DomainBatch& batch, const ModelBundle& bundle,
                      const Tensor& W_lrn, const PseudoLabelResult& plr,
                      const Augmenter& aug, Rng& rng);

// Mean cross-entropy of weakly augmented labeled points.
Tensor labeled_loss(const DomainBatch& batch, const ModelBundle& bundle,
                    const Tensor& W_lrn, const Augmenter& aug, Rng& rng);

// Mean prediction entropy of weakly augmented unlabeled points.
Tensor entmin_loss(const DomainBatch& batch, const ModelBundle& bundle,
                   const Tensor& W_lrn, const Augmenter& aug, Rng& rng);

// Everything stochastic about one domain's step, captured up front: frozen
// noise, augmented views, pseudo-labels. Rebuilding the loss from this state
// is deterministic, which is what makes finite-difference checks of the full
// step possible.
struct FrozenDomainStep {
  int domain_id = 0;
  int classifier_idx = 0;
  bool build_mask_branch = false;   // modulation on for this step
  bool mask_from_graph = false;     // domain vector stays differentiable
  std::vector<double> I_value;      // recorded domain vector (diagnostics +
                                    // the frozen constant on the detach path)
  std::vector<std::vector<double>> unlabeled_raw;  // kept for the graph path
  std::vector<double> noise;        // learning-branch noise draws
  std::vector<std::vector<double>> labeled_views;
  std::vector<int> labeled_y;
  std::vector<std::vector<double>> strong_views;   // accepted, ascending
  std::vector<int> pseudo_labels;                  // parallel to strong_views
  std::vector<std::vector<double>> entmin_views;   // weak views (entmin only)
  PseudoLabelResult plr;
};

struct FrozenStep {
  std::vector<FrozenDomainStep> domains;
};

struct StepLossBreakdown {
  std::vector<double> loss_labeled;    // per domain, 0 when absent
  std::vector<double> loss_unlabeled;  // per domain, 0 when absent
};

FrozenDomainStep prepare_domain_step(const DomainBatch& batch,
                                     const BatchDiagnostics& diag,
                                     int classifier_idx,
                                     const ModelBundle& bundle,
                                     const TrainConfig& tcfg,
                                     const Augmenter& aug, Rng& rng);
FrozenStep prepare_step(const StepBatch& sb, const ModelBundle& bundle,
                        const TrainConfig& tcfg, const Augmenter& aug,
                        Rng& rng);

Tensor frozen_domain_loss(const FrozenDomainStep& fd, const ModelBundle& bundle,
                          const TrainConfig& tcfg,
                          double* labeled_out = nullptr,
                          double* unlabeled_out = nullptr);
// Sum of per-domain losses in domain order.
Tensor frozen_step_loss(const FrozenStep& fs, const ModelBundle& bundle,
                        const TrainConfig& tcfg,
                        StepLossBreakdown* breakdown = nullptr);

struct StepMetrics {
  double loss_total = 0.0;
  std::vector<double> loss_labeled;
  std::vector<double> loss_unlabeled;
  std::vector<int> accepted;
  std::vector<int> correct;
  std::vector<int> candidates;
};

// One optimizer step over all domains (or one per domain when configured).
StepMetrics train_step(const StepBatch& sb, ModelBundle& bundle,
                       SgdOptimizer& opt, const TrainConfig& tcfg,
                       const Augmenter& aug, Rng& rng,
                       std::vector<std::vector<double>>* domain_info = nullptr);

struct RunRecord {
  struct Row {
    int epoch = 0;
    int domain = 0;
    double pl_accuracy = 0.0;
    double pl_utilization = 0.0;
    double loss_labeled = 0.0;
    double loss_unlabeled = 0.0;
    double target_accuracy = 0.0;
    double lr_backbone = 0.0;
    double lr_head = 0.0;
    double wall_seconds = 0.0;
  };
  std::vector<Row> rows;
};

void write_run_record_csv(const RunRecord& rec, const std::string& path);
RunRecord read_run_record_csv(const std::string& path);

struct DomainInfoRecord {
  int epoch = 0;
  int step = 0;
  int domain_id = 0;
  std::vector<double> I;
};
using DomainInfoLog = std::vector<DomainInfoRecord>;

using EpochHook = std::function<void(int epoch, const ModelBundle& bundle)>;

struct TrainResult {
  ModelBundle bundle;
  RunRecord record;
};

// Full Algorithm-1 loop: epochs x steps_per_epoch optimizer steps with
// cosine-annealed learning rates, per-epoch metric rows (one per source
// domain), and target-domain accuracy after every epoch. input_dim,
// num_classes, and the classifier count are taken from the training view.
TrainResult train(const TrainingView& view, const TrainConfig& tcfg,
                  ModelConfig mcfg, const EpochHook* hook = nullptr,
                  DomainInfoLog* info_log = nullptr);

// argmax over the unmodulated domain-shared classifier on the raw input;
// under separate classifiers, their mean.
int predict(const ModelBundle& bundle, std::span<const double> x);
double evaluate_accuracy(const ModelBundle& bundle,
                         const std::vector<Sample>& samples);

}  // namespace dgwm
