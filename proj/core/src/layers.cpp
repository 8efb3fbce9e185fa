#include "dgwm/layers.hpp"

#include <cmath>

#include "dgwm/errors.hpp"

namespace dgwm {

Linear::Linear(int in_dim, int out_dim, Rng& rng) : in(in_dim), out(out_dim) {
  if (in_dim <= 0 || out_dim <= 0) {
    throw ParameterError("Linear: dimensions must be positive");
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  std::vector<double> w(static_cast<std::size_t>(out_dim) * in_dim);
  for (double& v : w) v = rng.uniform(-bound, bound);
  W = Tensor::from_values({out_dim, in_dim}, std::move(w), true);
  b = Tensor::zeros({out_dim}, true);
}

Tensor Linear::forward(const Tensor& x) const {
  if (x.shape().size() == 1) {
    if (x.dim(0) != in) throw DimensionError("Linear: input width mismatch");
    Tensor row = reshape(x, {1, in});
    return pick_row(add_rowvec(matmul_nt(row, W), b), 0);
  }
  if (x.dim(1) != in) throw DimensionError("Linear: input width mismatch");
  return add_rowvec(matmul_nt(x, W), b);
}

std::vector<double> Linear::forward_values(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != in) {
    throw DimensionError("Linear: input width mismatch");
  }
  const std::vector<double>& w = W.value();
  const std::vector<double>& bias = b.value();
  std::vector<double> y(static_cast<std::size_t>(out));
  for (int j = 0; j < out; ++j) {
    double acc = 0.0;
    for (int t = 0; t < in; ++t) acc += x[t] * w[j * in + t];
    y[j] = acc + bias[j];
  }
  return y;
}

Mlp::Mlp(int in_dim, const std::vector<int>& hidden, int out_dim,
         bool relu_after_output, Rng& rng)
    : relu_output(relu_after_output) {
  int cur = in_dim;
  for (int h : hidden) {
    layers.emplace_back(cur, h, rng);
    cur = h;
  }
  layers.emplace_back(cur, out_dim, rng);
}

Tensor Mlp::forward(const Tensor& x) const {
  if (layers.empty()) throw ContractError("Mlp: uninitialized");
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(h);
    if (i + 1 < layers.size() || relu_output) h = relu(h);
  }
  return h;
}

std::vector<double> Mlp::forward_values(std::span<const double> x) const {
  if (layers.empty()) throw ContractError("Mlp: uninitialized");
  std::vector<double> h(x.begin(), x.end());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward_values(h);
    if (i + 1 < layers.size() || relu_output) {
      for (double& v : h) v = v > 0.0 ? v : 0.0;
    }
  }
  return h;
}

void Mlp::collect_params(std::vector<Tensor>& out) const {
  for (const Linear& l : layers) {
    out.push_back(l.W);
    out.push_back(l.b);
  }
}

}  // namespace dgwm
