#pragma once

#include <span>
#include <vector>

#include "dgwm/rng.hpp"
#include "dgwm/tensor.hpp"

namespace dgwm {

// Affine layer y = W x + b with W stored [out, in]. Weights drawn uniform in
// [-1/sqrt(in), +1/sqrt(in)], biases zero.
struct Linear {
  Tensor W;
  Tensor b;
  int in = 0;
  int out = 0;

  Linear() = default;
  Linear(int in_dim, int out_dim, Rng& rng);

  // Accepts [n, in] (row per sample) or a bare [in] vector.
  Tensor forward(const Tensor& x) const;
  // Value-only path; performs the same floating-point operations in the same
  // order as the graph path, so results agree bitwise.
  std::vector<double> forward_values(std::span<const double> x) const;
};

// Fully connected stack with ReLU between layers; relu_output controls
// whether the final layer is also followed by ReLU.
struct Mlp {
  std::vector<Linear> layers;
  bool relu_output = false;

  Mlp() = default;
  Mlp(int in_dim, const std::vector<int>& hidden, int out_dim,
      bool relu_after_output, Rng& rng);

  int in_dim() const { return layers.empty() ? 0 : layers.front().in; }
  int out_dim() const { return layers.empty() ? 0 : layers.back().out; }

  Tensor forward(const Tensor& x) const;
  std::vector<double> forward_values(std::span<const double> x) const;

  void collect_params(std::vector<Tensor>& out) const;
};

}  // namespace dgwm
