#pragma once

#include <functional>
#include <span>
#include <vector>

#include "dgwm/tensor.hpp"

namespace dgwm {

// Central-difference gradient of a scalar function with respect to one leaf
// tensor. `fn` must recompute the loss from the tensor's current values; the
// tensor is perturbed in place through set_value and restored afterwards.
// This is the independent oracle the backward pass is tested against.
std::vector<double> finite_diff_grad(const std::function<double()>& fn,
                                     Tensor& param, double eps = 1e-5);

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps near-zero
// entries from inflating the ratio past the oracle's own noise level.
double max_rel_error(std::span<const double> a, std::span<const double> b,
                     double floor = 1e-6);

}  // namespace dgwm
