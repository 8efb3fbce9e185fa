#include "dgwm/model.hpp"

#include <algorithm>
#include <cmath>

#include "dgwm/errors.hpp"

namespace dgwm {

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric d x d matrix. A is
// overwritten; eigvecs holds orthonormal eigenvectors as columns. Converges
// when the off-diagonal Frobenius norm drops below 1e-10, capped at 100
// sweeps — plenty for the d <= 64 covariances this library sees.
void jacobi_eigen(std::vector<double>& A, int d, std::vector<double>& eigvals,
                  std::vector<double>& eigvecs) {
  eigvecs.assign(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) eigvecs[i * d + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < d; ++p)
      for (int q = p + 1; q < d; ++q) off += A[p * d + q] * A[p * d + q];
    if (std::sqrt(2.0 * off) < 1e-10) break;
    for (int p = 0; p < d; ++p) {
      for (int q = p + 1; q < d; ++q) {
        const double apq = A[p * d + q];
        if (apq == 0.0) continue;
        const double app = A[p * d + p];
        const double aqq = A[q * d + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < d; ++k) {
          const double akp = A[k * d + p];
          const double akq = A[k * d + q];
          A[k * d + p] = c * akp - s * akq;
          A[k * d + q] = s * akp + c * akq;
        }
        for (int k = 0; k < d; ++k) {
          const double apk = A[p * d + k];
          const double aqk = A[q * d + k];
          A[p * d + k] = c * apk - s * aqk;
          A[q * d + k] = s * apk + c * aqk;
        }
        for (int k = 0; k < d; ++k) {
          const double vkp = eigvecs[k * d + p];
          const double vkq = eigvecs[k * d + q];
          eigvecs[k * d + p] = c * vkp - s * vkq;
          eigvecs[k * d + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  eigvals.resize(d);
  for (int i = 0; i < d; ++i) eigvals[i] = A[i * d + i];
}

// First component with magnitude over 1e-12 made positive.
void fix_sign(std::span<double> v) {
  for (double x : v) {
    if (std::fabs(x) > 1e-12) {
      if (x < 0.0)
        for (double& y : v) y = -y;
      return;
    }
  }
}

std::vector<double> covariance(std::span<const double> rows, int n, int d) {
  std::vector<double> mean(d, 0.0);
  const double inv = 1.0 / n;
  for (int j = 0; j < d; ++j) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += rows[i * d + j];
    mean[j] = acc * inv;
  }
  std::vector<double> cov(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int p = 0; p < d; ++p) {
      const double dp = rows[i * d + p] - mean[p];
      for (int q = 0; q < d; ++q) {
        cov[p * d + q] += dp * (rows[i * d + q] - mean[q]);
      }
    }
  }
  for (double& v : cov) v *= inv;
  return cov;
}

}  // namespace

std::string to_string(NoiseMode m) {
  switch (m) {
    case NoiseMode::concat: return "concat";
    case NoiseMode::add: return "add";
    case NoiseMode::none: return "none";
  }
  return "concat";
}

std::string to_string(Aggregation a) {
  switch (a) {
    case Aggregation::mean: return "mean";
    case Aggregation::principal_eig: return "principal_eig";
    case Aggregation::mean_eig: return "mean_eig";
  }
  return "mean";
}

std::string to_string(MaskVariant v) {
  switch (v) {
    case MaskVariant::low_rank: return "low_rank";
    case MaskVariant::general_map: return "general_map";
    case MaskVariant::off: return "off";
  }
  return "low_rank";
}

NoiseMode parse_noise_mode(const std::string& s) {
  if (s == "concat") return NoiseMode::concat;
  if (s == "add") return NoiseMode::add;
  if (s == "none") return NoiseMode::none;
  throw ParameterError("unknown noise_mode: " + s);
}

Aggregation parse_aggregation(const std::string& s) {
  std::string t = s;
  for (char& c : t)
    if (c == '-') c = '_';
  if (t == "mean") return Aggregation::mean;
  if (t == "principal_eig") return Aggregation::principal_eig;
  if (t == "mean_eig") return Aggregation::mean_eig;
  throw ParameterError("unknown aggregation: " + s);
}

MaskVariant parse_mask_variant(const std::string& s) {
  std::string t = s;
  for (char& c : t)
    if (c == '-') c = '_';
  if (t == "low_rank") return MaskVariant::low_rank;
  if (t == "general_map") return MaskVariant::general_map;
  if (t == "off") return MaskVariant::off;
  throw ParameterError("unknown mask_variant: " + s);
}

void ModelConfig::validate() const {
  if (input_dim < 1) throw ParameterError("ModelConfig: input_dim must be >= 1");
  if (feature_dim < 4 || feature_dim % 4 != 0) {
    throw ParameterError(
        "ModelConfig: feature_dim must be a positive multiple of 4 for the "
        "halving encoder");
  }
  if (latent_dim == 0 && feature_dim % 8 != 0) {
    throw ParameterError(
        "ModelConfig: default latent_dim = feature_dim/8 requires feature_dim "
        "divisible by 8");
  }
  if (num_classes < 2) {
    throw ParameterError("ModelConfig: num_classes must be >= 2");
  }
  if (latent() < 1) throw ParameterError("ModelConfig: latent dim must be >= 1");
  if (epsilon_sq < 0.0) {
    throw ParameterError("ModelConfig: epsilon_sq must be >= 0");
  }
  for (int h : hidden) {
    if (h < 1) throw ParameterError("ModelConfig: hidden widths must be >= 1");
  }
  if (separate_classifiers && num_classifiers < 1) {
    throw ParameterError("ModelConfig: num_classifiers must be >= 1");
  }
}

ModelBundle ModelBundle::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelBundle b;
  b.cfg = cfg;
  const int d = cfg.feature_dim;
  const int l = cfg.latent();
  b.f = Mlp(cfg.input_dim, cfg.hidden, d, /*relu_after_output=*/false, rng);
  const int n_cls = cfg.separate_classifiers ? cfg.num_classifiers : 1;
  // Keep the classifier's starting weights well below the usual 1/sqrt(d)
  // range. Saturated masks freeze a subset of W's entries at their initial
  // values for the whole run, and the unmodulated classifier used at test
  // time should not carry that leftover noise in its logits.
  constexpr double kClassifierInitScale = 0.05;
  const double bound = kClassifierInitScale / std::sqrt(static_cast<double>(d));
  for (int k = 0; k < n_cls; ++k) {
    std::vector<double> w(static_cast<std::size_t>(cfg.num_classes) * d);
    for (double& v : w) v = rng.uniform(-bound, bound);
    b.W.push_back(
        Tensor::from_values({cfg.num_classes, d}, std::move(w), true));
  }
  b.E = Mlp(d, {d / 2, d / 4}, l, /*relu_after_output=*/true, rng);
  b.D_dec = Mlp(cfg.decoder_in(), {d / 2}, d, /*relu_after_output=*/true, rng);
  b.G1 = Linear(d, cfg.num_classes, rng);
  b.G2 = Linear(d, d, rng);
  // Widen the mask heads' initial range so the sigmoid leaves its linear
  // regime: with standard init the rank-1 products stay so close to zero
  // that every mask entry hugs 0.5 and the modulation barely distinguishes
  // feature directions.
  constexpr double kMaskHeadGain = 4.0;
  auto scale_in_place = [&](Tensor& t) {
    std::vector<double> v = t.value();
    for (double& x : v) x *= kMaskHeadGain;
    t.set_value(std::move(v));
  };
  scale_in_place(b.G1.W);
  scale_in_place(b.G2.W);
  if (cfg.mask_variant == MaskVariant::general_map) {
    b.Gmap = Linear(d, cfg.num_classes * d, rng);
    scale_in_place(b.Gmap.W);
  }
  return b;
}

const Tensor& ModelBundle::classifier(int idx) const {
  if (!cfg.separate_classifiers) return W.at(0);
  return W.at(static_cast<std::size_t>(idx));
}

std::vector<Tensor> ModelBundle::backbone_params() const {
  std::vector<Tensor> out;
  f.collect_params(out);
  return out;
}

std::vector<Tensor> ModelBundle::head_params() const {
  std::vector<Tensor> out;
  for (const Tensor& w : W) out.push_back(w);
  E.collect_params(out);
  D_dec.collect_params(out);
  if (G1.W.defined()) {
    out.push_back(G1.W);
    out.push_back(G1.b);
    out.push_back(G2.W);
    out.push_back(G2.b);
  }
  if (Gmap.W.defined()) {
    out.push_back(Gmap.W);
    out.push_back(Gmap.b);
  }
  return out;
}

std::vector<std::pair<std::string, Tensor>> ModelBundle::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto add_mlp = [&out](const std::string& prefix, const Mlp& m) {
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      out.emplace_back(prefix + "." + std::to_string(i) + ".W",
                       m.layers[i].W);
      out.emplace_back(prefix + "." + std::to_string(i) + ".b",
                       m.layers[i].b);
    }
  };
  add_mlp("f", f);
  for (std::size_t k = 0; k < W.size(); ++k) {
    out.emplace_back("W." + std::to_string(k), W[k]);
  }
  add_mlp("E", E);
  add_mlp("D", D_dec);
  if (G1.W.defined()) {
    out.emplace_back("G1.W", G1.W);
    out.emplace_back("G1.b", G1.b);
    out.emplace_back("G2.W", G2.W);
    out.emplace_back("G2.b", G2.b);
  }
  if (Gmap.W.defined()) {
    out.emplace_back("Gmap.W", Gmap.W);
    out.emplace_back("Gmap.b", Gmap.b);
  }
  return out;
}

Tensor extract_features(const ModelBundle& b, const Tensor& x) {
  return b.f.forward(x);
}

std::vector<double> extract_features_values(const ModelBundle& b,
                                            std::span<const double> x) {
  return b.f.forward_values(x);
}

std::vector<double> aggregate_values(std::span<const double> rows, int n,
                                     int d, Aggregation method) {
  if (n < 1) throw ParameterError("aggregate: empty batch");
  if (method == Aggregation::mean) {
    std::vector<double> out(d, 0.0);
    const double inv = 1.0 / n;
    for (int j = 0; j < d; ++j) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += rows[i * d + j];
      out[j] = acc * inv;
    }
    return out;
  }
  std::vector<double> cov = covariance(rows, n, d);
  std::vector<double> eigvals;
  std::vector<double> eigvecs;
  jacobi_eigen(cov, d, eigvals, eigvecs);
  if (method == Aggregation::principal_eig) {
    int best = 0;
    for (int i = 1; i < d; ++i)
      if (eigvals[i] > eigvals[best]) best = i;
    std::vector<double> v(d);
    for (int k = 0; k < d; ++k) v[k] = eigvecs[k * d + best];
    fix_sign(v);
    return v;
  }
  // mean_eig: componentwise mean of all sign-fixed unit eigenvectors.
  std::vector<double> out(d, 0.0);
  std::vector<double> v(d);
  for (int col = 0; col < d; ++col) {
    for (int k = 0; k < d; ++k) v[k] = eigvecs[k * d + col];
    fix_sign(v);
    for (int k = 0; k < d; ++k) out[k] += v[k];
  }
  const double inv = 1.0 / d;
  for (double& x : out) x *= inv;
  return out;
}

Tensor aggregate_domain_info(const Tensor& features, Aggregation method) {
  if (features.shape().size() != 2) {
    throw DimensionError("aggregate_domain_info: expected [n, d] features");
  }
  const int n = features.dim(0);
  const int d = features.dim(1);
  if (n < 1) throw ParameterError("aggregate_domain_info: empty batch");
  if (method == Aggregation::mean) return mean_rows(features);
  // Eigenvector aggregations are not differentiated; they always enter the
  // graph as constants regardless of detach_domain_info.
  return Tensor::from_values({d},
                             aggregate_values(features.value(), n, d, method));
}

Tensor encode_decode(const ModelBundle& b, const Tensor& I, Rng& rng,
                     double variance, NoiseMode mode) {
  if (variance < 0.0) throw ParameterError("encode_decode: negative variance");
  Tensor z = b.E.forward(I);
  Tensor dec_in;
  switch (mode) {
    case NoiseMode::concat: {
      Tensor noise = Tensor::from_values(
          {z.dim(0)}, rng.gaussian(static_cast<std::size_t>(z.dim(0)),
                                   variance));
      dec_in = concat(z, noise);
      break;
    }
    case NoiseMode::add: {
      Tensor noise = Tensor::from_values(
          {z.dim(0)}, rng.gaussian(static_cast<std::size_t>(z.dim(0)),
                                   variance));
      dec_in = add(z, noise);
      break;
    }
    case NoiseMode::none:
      dec_in = z;
      break;
  }
  return b.D_dec.forward(dec_in);
}

Tensor build_mask(const ModelBundle& b, const Tensor& I_vec,
                  MaskVariant variant) {
  const int C = b.cfg.num_classes;
  const int d = b.cfg.feature_dim;
  switch (variant) {
    case MaskVariant::low_rank:
      return sigmoid(outer(b.G1.forward(I_vec), b.G2.forward(I_vec)));
    case MaskVariant::general_map:
      return sigmoid(reshape(b.Gmap.forward(I_vec), {C, d}));
    case MaskVariant::off:
      return Tensor::full({C, d}, 1.0);
  }
  throw ParameterError("build_mask: unknown variant");
}

Tensor modulate(const Tensor& W, const Tensor& M) { return mul(W, M); }

MaskPair make_mask_pair(const Tensor& unlabeled_features, const ModelBundle& b,
                        Rng& rng, const ModelConfig& cfg) {
  if (unlabeled_features.shape().size() != 2 ||
      unlabeled_features.dim(0) < 1) {
    throw ParameterError("make_mask_pair: empty batch");
  }
  MaskPair mp;
  Tensor I = aggregate_domain_info(unlabeled_features, cfg.aggregation);
  if (cfg.detach_domain_info && I.requires_grad()) I = I.detach();
  mp.I = I;
  mp.I_ss = encode_decode(b, I, rng, 0.0, cfg.noise_mode);
  mp.I_lrn = encode_decode(b, I, rng, cfg.epsilon_sq, cfg.noise_mode);
  mp.v_cls = b.G1.forward(mp.I_ss);
  mp.v_f = b.G2.forward(mp.I_ss);
  if (cfg.mask_variant == MaskVariant::low_rank) {
    mp.M_ss = sigmoid(outer(mp.v_cls, mp.v_f));
  } else {
    mp.M_ss = build_mask(b, mp.I_ss, cfg.mask_variant);
  }
  mp.M_lrn = build_mask(b, mp.I_lrn, cfg.mask_variant);
  return mp;
}

MaskValues mask_values_for_batch(
    const ModelBundle& b, const std::vector<std::vector<double>>& unlabeled) {
  if (unlabeled.empty()) {
    throw ParameterError("mask_values_for_batch: empty batch");
  }
  const int d = b.cfg.feature_dim;
  const int n = static_cast<int>(unlabeled.size());
  std::vector<double> feats(static_cast<std::size_t>(n) * d);
  for (int i = 0; i < n; ++i) {
    std::vector<double> fi = b.f.forward_values(unlabeled[i]);
    std::copy(fi.begin(), fi.end(), feats.begin() + i * d);
  }
  MaskValues mv;
  mv.I = aggregate_values(feats, n, d, b.cfg.aggregation);
  std::vector<double> z = b.E.forward_values(mv.I);
  std::vector<double> dec_in;
  switch (b.cfg.noise_mode) {
    case NoiseMode::concat:
      dec_in = z;
      dec_in.resize(z.size() * 2, 0.0);
      break;
    case NoiseMode::add:
    case NoiseMode::none:
      dec_in = z;
      break;
  }
  mv.I_ss = b.D_dec.forward_values(dec_in);
  mv.v_cls = b.G1.forward_values(mv.I_ss);
  mv.v_f = b.G2.forward_values(mv.I_ss);
  const int C = b.cfg.num_classes;
  mv.M_ss.resize(static_cast<std::size_t>(C) * d);
  switch (b.cfg.mask_variant) {
    case MaskVariant::low_rank:
      for (int c = 0; c < C; ++c)
        for (int j = 0; j < d; ++j)
          mv.M_ss[c * d + j] = sigmoid_value(mv.v_cls[c] * mv.v_f[j]);
      break;
    case MaskVariant::general_map: {
      std::vector<double> flat = b.Gmap.forward_values(mv.I_ss);
      for (std::size_t i = 0; i < flat.size(); ++i)
        mv.M_ss[i] = sigmoid_value(flat[i]);
      break;
    }
    case MaskVariant::off:
      std::fill(mv.M_ss.begin(), mv.M_ss.end(), 1.0);
      break;
  }
  return mv;
}

}  // namespace dgwm
