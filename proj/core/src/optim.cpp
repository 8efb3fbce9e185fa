#include "dgwm/optim.hpp"

#include <cmath>
#include <numbers>

#include "dgwm/errors.hpp"

namespace dgwm {

void SgdConfig::validate() const {
  if (lr_backbone <= 0.0 || lr_head <= 0.0) {
    throw ParameterError("SgdConfig: learning rates must be > 0");
  }
  if (total_epochs < 0) {
    throw ParameterError("SgdConfig: total_epochs must be >= 0");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ParameterError("SgdConfig: momentum must lie in [0, 1)");
  }
}

double cosine_lr(int epoch, const SgdConfig& cfg, double base_lr) {
  if (epoch < 0 || epoch > cfg.total_epochs) {
    throw ParameterError("cosine_lr: epoch outside [0, total_epochs]");
  }
  if (cfg.total_epochs == 0) return base_lr;
  const double phase =
      std::numbers::pi * static_cast<double>(epoch) / cfg.total_epochs;
  return base_lr * 0.5 * (1.0 + std::cos(phase));
}

void sgd_step(std::vector<double>& params, std::span<const double> grads,
              double lr, double momentum, std::vector<double>& velocity) {
  if (params.size() != grads.size()) {
    throw DimensionError("sgd_step: grad size mismatch");
  }
  if (velocity.size() != params.size()) velocity.assign(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grads[i];
    params[i] -= lr * velocity[i];
  }
}

SgdOptimizer::SgdOptimizer(SgdConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  lr_backbone_ = cfg_.lr_backbone;
  lr_head_ = cfg_.lr_head;
}

void SgdOptimizer::add_backbone_param(const Tensor& t) {
  slots_.push_back({t, {}, true});
}

void SgdOptimizer::add_head_param(const Tensor& t) {
  slots_.push_back({t, {}, false});
}

void SgdOptimizer::set_epoch(int epoch) {
  lr_backbone_ = cosine_lr(epoch, cfg_, cfg_.lr_backbone);
  lr_head_ = cosine_lr(epoch, cfg_, cfg_.lr_head);
}

void SgdOptimizer::zero_grad() {
  for (Slot& s : slots_) s.param.zero_grad();
}

void SgdOptimizer::step() {
  for (Slot& s : slots_) {
    // Untouched params (no grad buffer yet) also have zero velocity, so the
    // skip is equivalent to a zero-gradient update.
    if (!s.param.has_grad()) continue;
    std::vector<double> values = s.param.value();
    sgd_step(values, s.param.grad(), s.backbone ? lr_backbone_ : lr_head_,
             cfg_.momentum, s.velocity);
    s.param.set_value(values);
  }
}

}  // namespace dgwm
