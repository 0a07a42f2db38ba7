// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "bsrnn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace bsrnn {

double lr_at_epoch(double base_lr, int epoch, double factor, int every) {
  if (epoch < 0) throw std::invalid_argument("epoch must be non-negative");
  if (every < 1) throw std::invalid_argument("decay interval must be positive");
  return base_lr * std::pow(factor, epoch / every);
}

double adjusted_lr(double base_lr, int batch_size, int reference_batch_size) {
  if (batch_size <= 0 || reference_batch_size <= 0)
    throw std::invalid_argument("batch sizes must be positive");
  return base_lr * static_cast<double>(batch_size) / static_cast<double>(reference_batch_size);
}

double global_grad_norm(const ParamStore& params) {
  double sq = 0.0;
  for (const auto& [name, var] : params.entries()) {
    if (var->grad.numel() == 0) continue;
    for (int64_t i = 0; i < var->grad.numel(); ++i) {
      const double g = var->grad[i];
      sq += g * g;
    }
  }
  return std::sqrt(sq);
}

void scale_gradients(ParamStore& params, double divisor) {
  if (divisor == 0.0) throw std::invalid_argument("gradient divisor must be non-zero");
  for (const auto& [name, var] : params.entries()) {
    if (var->grad.numel() == 0) continue;
    for (int64_t i = 0; i < var->grad.numel(); ++i) var->grad[i] /= divisor;
  }
}

double clip_gradients(ParamStore& params, double max_norm) {
  if (max_norm <= 0.0) throw std::invalid_argument("max_norm must be positive");
  const double norm = global_grad_norm(params);
  if (norm <= max_norm || norm == 0.0) return 1.0;
  const double scale = max_norm / norm;
  for (const auto& [name, var] : params.entries()) {
    if (var->grad.numel() == 0) continue;
    for (int64_t i = 0; i < var->grad.numel(); ++i) var->grad[i] *= scale;
  }
  return scale;
}

AdamOptimizer::AdamOptimizer(double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0 || eps <= 0.0)
    throw std::invalid_argument("bad adam hyperparameters");
}

void AdamOptimizer::step(ParamStore& params, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& [name, var] : params.entries()) {
    Tensor& grad = var->ensure_grad();
    auto it = state_.find(name);
    if (it == state_.end()) {
      Moments mo;
      mo.m = Tensor(var->value.shape());
      mo.v = Tensor(var->value.shape());
      it = state_.emplace(name, std::move(mo)).first;
    }
    Tensor& m = it->second.m;
    Tensor& v = it->second.v;
    for (int64_t i = 0; i < grad.numel(); ++i) {
      const double g = grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      var->value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void AdamOptimizer::restore(std::map<std::string, Moments> state, int64_t t) {
  if (t < 0) throw std::invalid_argument("adam step count must be non-negative");
  state_ = std::move(state);
  t_ = t;
}

EarlyStop::EarlyStop(int patience, bool maximize) : patience_(patience), maximize_(maximize) {
  if (patience < 1) throw std::invalid_argument("patience must be positive");
}

bool EarlyStop::update(double value, int epoch) {
  const bool improved =
      !has_best_ || (maximize_ ? value > best_ : value < best_);
  if (improved) {
    has_best_ = true;
    best_ = value;
    best_epoch_ = epoch;
    since_ = 0;
    return false;
  }
  ++since_;
  return since_ >= patience_;
}

double EarlyStop::best_value() const {
  if (!has_best_) throw std::logic_error("no metric seen yet");
  return best_;
}

int EarlyStop::best_epoch() const {
  if (!has_best_) throw std::logic_error("no metric seen yet");
  return best_epoch_;
}

void EarlyStop::restore(double best_value, int best_epoch, int epochs_since_best) {
  has_best_ = true;
  best_ = best_value;
  best_epoch_ = best_epoch;
  since_ = epochs_since_best;
}

}  // namespace bsrnn
