#pragma once

#include <cstdint>
#include <vector>

#include "ctx/nn/tensor.hpp"

namespace ctx {

struct LambHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-6;
  double weight_decay = 1.0;
  double base_lr = 0.0003;

  void validate() const; // throws CtxError(config)
};

// Stepped learning-rate schedule: base_lr until the first milestone; from a
// milestone's epoch (0-indexed) onward, that milestone's lr.
struct LrSchedule {
  double base_lr = 0.0003;
  std::vector<std::pair<int, double>> milestones; // strictly increasing

  void validate() const;
};

LrSchedule default_schedule();
double lr_at_epoch(const LrSchedule& schedule, int epoch);

// Per-parameter-tensor moment buffers; step is shared by all tensors and
// increments once per lamb_step call.
struct LambState {
  int64_t step = 0;
  std::vector<nn::Tensor> m;
  std::vector<nn::Tensor> v;

  // Sizes buffers to match the parameter list (all zeros, step 0).
  static LambState for_params(const std::vector<nn::Param*>& params);
};

// One LAMB update over every tensor: moments with bias correction, update
// u = m_hat/(sqrt(v_hat)+eps) + wd*w, trust ratio r = |w|/|u| (1 when either
// norm is zero), w -= lr*r*u. Throws CtxError(training) naming the tensor on
// a non-finite gradient.
void lamb_step(const std::vector<nn::Param*>& params, LambState& state,
               const LambHyper& hyper, double lr);

// Binary cross-entropy over logits, mean over samples, stable log-sum-exp
// form. labels are 0/1. Throws CtxError(training) on empty input.
double bce_loss(const std::vector<double>& logits,
                const std::vector<double>& labels);

// d(mean loss)/d(logit_i) = (sigmoid(z_i) - y_i) / N.
std::vector<double> bce_loss_grad(const std::vector<double>& logits,
                                  const std::vector<double>& labels);

double sigmoid(double z);

} // namespace ctx
