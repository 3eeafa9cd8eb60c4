#include "ctx/train/optim.hpp"

#include <cmath>

#include "ctx/core/error.hpp"

namespace ctx {

void LambHyper::validate() const {
  if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0) {
    throw CtxError(ErrorKind::config, "lamb betas must lie in (0,1)");
  }
  if (epsilon <= 0.0) {
    throw CtxError(ErrorKind::config, "lamb epsilon must be positive");
  }
  if (weight_decay < 0.0) {
    throw CtxError(ErrorKind::config, "weight decay must be nonnegative");
  }
  if (base_lr <= 0.0) {
    throw CtxError(ErrorKind::config, "base learning rate must be positive");
  }
}

void LrSchedule::validate() const {
  if (base_lr <= 0.0) {
    throw CtxError(ErrorKind::config, "schedule base_lr must be positive");
  }
  int prev = -1;
  for (const auto& [epoch, lr] : milestones) {
    if (epoch <= prev) {
      throw CtxError(ErrorKind::config,
                     "schedule milestones must be strictly increasing");
    }
    if (lr <= 0.0) {
      throw CtxError(ErrorKind::config, "schedule lrs must be positive");
    }
    prev = epoch;
  }
}

LrSchedule default_schedule() {
  return {0.0003,
          {{50, 0.0001}, {70, 0.00003}, {80, 0.00001}, {90, 0.000003}}};
}

double lr_at_epoch(const LrSchedule& schedule, int epoch) {
  double lr = schedule.base_lr;
  for (const auto& [milestone, milestone_lr] : schedule.milestones) {
    if (epoch >= milestone) {
      lr = milestone_lr;
    } else {
      break;
    }
  }
  return lr;
}

LambState LambState::for_params(const std::vector<nn::Param*>& params) {
  LambState state;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const nn::Param* p : params) {
    state.m.emplace_back(p->value.shape);
    state.v.emplace_back(p->value.shape);
  }
  return state;
}

void lamb_step(const std::vector<nn::Param*>& params, LambState& state,
               const LambHyper& hyper, double lr) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw CtxError(ErrorKind::training, "lamb state does not match params");
  }
  const int64_t t = state.step + 1;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));

  for (size_t i = 0; i < params.size(); ++i) {
    nn::Param& p = *params[i];
    nn::Tensor& m = state.m[i];
    nn::Tensor& v = state.v[i];
    const size_t n = p.value.numel();

    for (size_t j = 0; j < n; ++j) {
      if (!std::isfinite(p.grad.data[j])) {
        throw CtxError(ErrorKind::training,
                       "non-finite gradient in tensor " + p.name);
      }
    }

    double w_sq = 0.0, u_sq = 0.0;
    std::vector<double> update(n);
    for (size_t j = 0; j < n; ++j) {
      const double g = p.grad.data[j];
      m.data[j] = hyper.beta1 * m.data[j] + (1.0 - hyper.beta1) * g;
      v.data[j] = hyper.beta2 * v.data[j] + (1.0 - hyper.beta2) * g * g;
      const double m_hat = m.data[j] / bc1;
      const double v_hat = v.data[j] / bc2;
      const double u = m_hat / (std::sqrt(v_hat) + hyper.epsilon) +
                       hyper.weight_decay * p.value.data[j];
      update[j] = u;
      w_sq += p.value.data[j] * p.value.data[j];
      u_sq += u * u;
    }
    const double w_norm = std::sqrt(w_sq);
    const double u_norm = std::sqrt(u_sq);
    const double trust =
        (w_norm > 0.0 && u_norm > 0.0) ? w_norm / u_norm : 1.0;
    const double step_size = lr * trust;
    for (size_t j = 0; j < n; ++j) {
      p.value.data[j] -= step_size * update[j];
    }
  }
  state.step = t;
}

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double bce_loss(const std::vector<double>& logits,
                const std::vector<double>& labels) {
  if (logits.empty() || logits.size() != labels.size()) {
    throw CtxError(ErrorKind::training,
                   "bce_loss: need equal nonzero logits/labels lengths");
  }
  double total = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double y = labels[i];
    // max(z,0) - z*y + log(1 + exp(-|z|))
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  return total / static_cast<double>(logits.size());
}

std::vector<double> bce_loss_grad(const std::vector<double>& logits,
                                  const std::vector<double>& labels) {
  if (logits.empty() || logits.size() != labels.size()) {
    throw CtxError(ErrorKind::training,
                   "bce_loss_grad: need equal nonzero logits/labels lengths");
  }
  std::vector<double> grad(logits.size());
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) {
    grad[i] = (sigmoid(logits[i]) - labels[i]) * inv_n;
  }
  return grad;
}

} // namespace ctx
