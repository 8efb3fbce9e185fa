#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dgwm/layers.hpp"
#include "dgwm/rng.hpp"
#include "dgwm/tensor.hpp"

namespace dgwm {

// How the learning-branch mask input receives noise: concatenated with the
// encoding, added onto it, or not at all.
enum class NoiseMode { concat, add, none };
// Domain-information aggregation over the unlabeled batch's features.
enum class Aggregation { mean, principal_eig, mean_eig };
// Mask construction: sigmoid of a rank-1 outer product, a single affine map
// straight from the domain vector, or a constant all-ones matrix.
enum class MaskVariant { low_rank, general_map, off };

std::string to_string(NoiseMode m);
std::string to_string(Aggregation a);
std::string to_string(MaskVariant v);
NoiseMode parse_noise_mode(const std::string& s);
Aggregation parse_aggregation(const std::string& s);
MaskVariant parse_mask_variant(const std::string& s);

struct ModelConfig {
  int input_dim = 20;
  int feature_dim = 32;   // d
  int num_classes = 5;    // C
  int latent_dim = 0;     // l; 0 means feature_dim / 8
  std::vector<int> hidden = {64, 64};
  double epsilon_sq = 1.0;
  NoiseMode noise_mode = NoiseMode::concat;
  Aggregation aggregation = Aggregation::mean;
  bool detach_domain_info = true;
  MaskVariant mask_variant = MaskVariant::low_rank;
  bool separate_classifiers = false;
  int num_classifiers = 1;  // only used when separate_classifiers

  int latent() const { return latent_dim > 0 ? latent_dim : feature_dim / 8; }
  int decoder_in() const {
    return noise_mode == NoiseMode::concat ? 2 * latent() : latent();
  }
  void validate() const;
};

// The six learned components: feature extractor f, domain-shared classifier W
// (one per source domain under the separate-classifiers ablation), the
// encoder/decoder pair the domain vector passes through, and the two mask
// heads. Gmap exists only for the general_map mask variant.
struct ModelBundle {
  ModelConfig cfg;
  Mlp f;
  std::vector<Tensor> W;  // each [C, d]
  Mlp E;
  Mlp D_dec;
  Linear G1;  // d -> C
  Linear G2;  // d -> d
  Linear Gmap;  // d -> C*d

  // Draw order is pinned: f, then classifiers, then E, D_dec, G1, G2, Gmap.
  static ModelBundle init(const ModelConfig& cfg, Rng& rng);

  const Tensor& classifier(int idx = 0) const;
  std::vector<Tensor> backbone_params() const;
  std::vector<Tensor> head_params() const;
  std::vector<std::pair<std::string, Tensor>> named_params() const;
};

// Domain vector, its two branch images, mask-head outputs, and both masks for
// one domain batch.
struct MaskPair {
  Tensor I;      // [d]
  Tensor I_ss;   // [d] noise-free branch
  Tensor I_lrn;  // [d] noise-injected branch
  Tensor v_cls;  // [C] = G1(I_ss)
  Tensor v_f;    // [d] = G2(I_ss)
  Tensor M_ss;   // [C, d]
  Tensor M_lrn;  // [C, d]
};

// Forward through f; accepts [n, D] batches or a bare [D] vector.
Tensor extract_features(const ModelBundle& b, const Tensor& x);
std::vector<double> extract_features_values(const ModelBundle& b,
                                            std::span<const double> x);

// Aggregation over a row-major n x d value block. The eigenvector methods run
// a cyclic Jacobi decomposition of the 1/n covariance; eigenvector signs are
// fixed so the first component over 1e-12 in magnitude is positive.
std::vector<double> aggregate_values(std::span<const double> rows, int n,
                                     int d, Aggregation method);
// Graph-level aggregation. mean stays differentiable; the eigenvector
// variants are value computations and always return a constant.
Tensor aggregate_domain_info(const Tensor& features, Aggregation method);

// E then D with the configured noise placement; variance 0 draws nothing and
// is fully deterministic (the pseudo-labeling branch).
Tensor encode_decode(const ModelBundle& b, const Tensor& I, Rng& rng,
                     double variance, NoiseMode mode);

Tensor build_mask(const ModelBundle& b, const Tensor& I_vec,
                  MaskVariant variant);

// W elementwise-scaled by the mask; gradient flows into both factors.
Tensor modulate(const Tensor& W, const Tensor& M);

// Full Algorithm-1 mask computation for one domain: aggregate the unlabeled
// features, run both encode/decode branches, build both masks. Consumes
// latent() noise draws when epsilon_sq > 0 and noise_mode is not none.
MaskPair make_mask_pair(const Tensor& unlabeled_features,
                        const ModelBundle& b, Rng& rng,
                        const ModelConfig& cfg);

// Value-space replica of the pseudo-labeling half of make_mask_pair (no
// noise branch, no graph); used by read-only analysis passes.
struct MaskValues {
  std::vector<double> I;
  std::vector<double> I_ss;
  std::vector<double> v_cls;
  std::vector<double> v_f;
  std::vector<double> M_ss;  // row-major C x d
};
MaskValues mask_values_for_batch(
    const ModelBundle& b, const std::vector<std::vector<double>>& unlabeled);

}  // namespace dgwm
