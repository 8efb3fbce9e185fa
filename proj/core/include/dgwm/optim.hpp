#pragma once

#include <span>
#include <vector>

#include "dgwm/tensor.hpp"

namespace dgwm {

struct SgdConfig {
  double lr_backbone = 0.003;
  double lr_head = 0.01;  // classifier and mask generator
  int total_epochs = 20;
  double momentum = 0.9;
  void validate() const;  // throws ParameterError on bad values
};

// base_lr * (1 + cos(pi * epoch / total_epochs)) / 2; anneals to 0 at
// epoch == total_epochs, stepped per epoch.
double cosine_lr(int epoch, const SgdConfig& cfg, double base_lr);

// Classic momentum update on raw buffers: v <- mu*v + g; p <- p - lr*v.
void sgd_step(std::vector<double>& params, std::span<const double> grads,
              double lr, double momentum, std::vector<double>& velocity);

// Tracks two parameter groups (backbone vs. head) with per-tensor momentum
// buffers. Any registered tensor without a populated grad is skipped for the
// step (treated as zero gradient, which also leaves its velocity untouched).
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdConfig cfg);

  void add_backbone_param(const Tensor& t);
  void add_head_param(const Tensor& t);
  // Recomputes group learning rates from the cosine schedule.
  void set_epoch(int epoch);

  double lr_backbone() const { return lr_backbone_; }
  double lr_head() const { return lr_head_; }

  void zero_grad();
  void step();

 private:
  struct Slot {
    Tensor param;
    std::vector<double> velocity;
    bool backbone;
  };
  SgdConfig cfg_;
  std::vector<Slot> slots_;
  double lr_backbone_;
  double lr_head_;
};

}  // namespace dgwm
