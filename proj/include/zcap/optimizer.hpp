#pragma once

#include <optional>
#include <string>
#include <vector>

#include "zcap/tensor.hpp"

namespace zcap {

// A named trainable tensor with its gradient and adaptive-moment state.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor moment1;
  Tensor moment2;
  uint64_t step = 0;

  Parameter() = default;
  Parameter(std::string n, Tensor init) : name(std::move(n)), value(std::move(init)) {
    grad = Tensor(value.shape);
    moment1 = Tensor(value.shape);
    moment2 = Tensor(value.shape);
  }

  void zero_grad() { grad.fill(0.0); }
};

struct OptimizerConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::optional<double> grad_clip_norm = 1.0;
};

// Bias-corrected adaptive-moment update. Global-norm clipping (when
// configured) runs first across the whole parameter list; gradients are
// zeroed after the step.
void adam_step(const std::vector<Parameter*>& params, const OptimizerConfig& cfg);

// Scale all gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_global_norm(const std::vector<Parameter*>& params, double max_norm);

}  // namespace zcap
