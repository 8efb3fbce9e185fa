#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dgwm/rng.hpp"

namespace dgwm {

enum class ShiftKind { style, background, corruption };
std::string to_string(ShiftKind k);
ShiftKind parse_shift_kind(const std::string& s);

// Recipe for a multi-domain classification problem. Class cores are Gaussian
// clusters on a signal block shared by all domains; each domain applies its
// own perturbation whose magnitude grows with the domain index, so later
// domains are progressively more shifted and domain 0 is canonical.
struct ShiftSpec {
  ShiftKind shift_kind = ShiftKind::style;
  int num_domains = 4;  // K sources + 1 target
  int num_classes = 5;
  int input_dim = 20;
  int samples_per_class_per_domain = 200;
  double shift_strength = 2.0;
  std::uint64_t seed = 7;
  // Optional per-class relative frequencies (size num_classes); empty means
  // balanced. Counts scale the per-class base count.
  std::vector<double> class_frequencies;

  void validate() const;
};

struct Sample {
  std::vector<double> x;
  int label = 0;
};

struct MultiDomainDataset {
  ShiftSpec spec;
  std::vector<std::string> domain_names;
  std::vector<std::vector<Sample>> domains;

  int num_domains() const { return static_cast<int>(domains.size()); }
  int input_dim() const { return spec.input_dim; }
  int num_classes() const { return spec.num_classes; }
};

MultiDomainDataset generate(const ShiftSpec& spec);

// CSV columns: domain,label,x_0..x_{D-1}. A JSON sidecar at <path>.json holds
// the generating spec; import reads both and round-trips values exactly.
void export_dataset_csv(const MultiDomainDataset& ds, const std::string& path);
MultiDomainDataset import_dataset_csv(const std::string& path);

enum class SplitSetting { few_labels, one_labeled_domain };
std::string to_string(SplitSetting s);
SplitSetting parse_split_setting(const std::string& s);

struct SplitPlan {
  SplitSetting setting = SplitSetting::few_labels;
  int labels_per_class = 10;  // setting 1
  int labeled_domain = 0;     // setting 2
  int target_domain = 3;
  // Explicit source list; empty means every domain except the target.
  std::vector<int> source_domains;
  std::uint64_t split_seed = 13;
};

// One source domain's training-time view: which points carry labels and the
// unlabeled pool S_u (every point, labels dropped — including the labeled
// ones).
struct DomainView {
  int domain_id = 0;
  std::vector<int> labeled_indices;
  std::vector<int> unlabeled_indices;
};

struct TrainingView {
  const MultiDomainDataset* data = nullptr;
  std::vector<DomainView> sources;
  int target_domain = 0;
};

TrainingView split(const MultiDomainDataset& ds, const SplitPlan& plan);

// One plan per choice of held-out target; sources are the remaining domains.
std::vector<SplitPlan> leave_one_domain_out(const MultiDomainDataset& ds,
                                            const SplitPlan& proto);
// Growing source prefixes {s1}, {s1,s2}, ... with the target fixed.
std::vector<SplitPlan> adding_domain_plans(const MultiDomainDataset& ds,
                                           const SplitPlan& proto);

// One domain's minibatch. Unlabeled inputs carry no labels here; ground truth
// for diagnostics travels separately so loss code cannot touch it.
struct DomainBatch {
  int domain_id = 0;
  std::vector<std::vector<double>> labeled_x;
  std::vector<int> labeled_y;
  std::vector<std::vector<double>> unlabeled_x;
};

struct BatchDiagnostics {
  std::vector<int> unlabeled_truth;  // parallel to DomainBatch::unlabeled_x
};

struct StepBatch {
  std::vector<DomainBatch> domains;
  std::vector<BatchDiagnostics> diagnostics;  // parallel to domains
};

// Per source domain: labeled draw first, then unlabeled, so consumers can
// reproduce the stream. Pools smaller than the quota are sampled with
// replacement; an empty labeled pool yields an empty labeled part.
StepBatch sample_step_batches(const TrainingView& view, int labeled_batch,
                              int unlabeled_batch, Rng& rng);

// Vector-space stand-ins for image augmentation: weak adds small Gaussian
// noise scaled by the per-coordinate training std; strong adds larger noise,
// drops coordinates, and rescales globally.
struct Augmenter {
  std::vector<double> coord_std;
  double weak_noise = 0.05;
  double strong_noise = 0.2;
  double dropout_p = 0.3;
  double scale_lo = 0.8;
  double scale_hi = 1.2;

  static Augmenter fit(const TrainingView& view);

  // Consumes input_dim normal draws.
  std::vector<double> weak(std::span<const double> x, Rng& rng) const;
  // Consumes input_dim normals, input_dim uniforms, then one uniform.
  std::vector<double> strong(std::span<const double> x, Rng& rng) const;
};

}  // namespace dgwm
