// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef BSRNN_OPTIM_HPP_
#define BSRNN_OPTIM_HPP_

#include <cstdint>
#include <map>
#include <string>

#include "bsrnn/model.hpp"
#include "bsrnn/tensor.hpp"

namespace bsrnn {

// Step decay: base * factor^(epoch / every), integer division.
double lr_at_epoch(double base_lr, int epoch, double factor = 0.98, int every = 2);

// Linear batch-size scaling against a reference batch size.
double adjusted_lr(double base_lr, int batch_size, int reference_batch_size);

double global_grad_norm(const ParamStore& params);

// Divides every gradient by `scale`; used to turn accumulated sums into means.
void scale_gradients(ParamStore& params, double divisor);

// Rescales gradients so the global norm is at most max_norm. Returns the
// factor applied (1 when already inside the ball).
double clip_gradients(ParamStore& params, double max_norm);

// Bias-corrected Adam. Moment tensors are created on first contact with each
// parameter and are addressable by name for checkpointing.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(ParamStore& params, double lr);

  int64_t steps_taken() const { return t_; }
  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }
  double eps() const { return eps_; }

  struct Moments {
    Tensor m;
    Tensor v;
  };
  const std::map<std::string, Moments>& state() const { return state_; }
  void restore(std::map<std::string, Moments> state, int64_t t);

 private:
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::map<std::string, Moments> state_;
};

// Consecutive-epoch early stopping on a scalar metric. Strict improvement
// resets the counter; `update` reports when patience has run out.
class EarlyStop {
 public:
  EarlyStop(int patience, bool maximize);

  bool update(double value, int epoch);

  bool has_best() const { return has_best_; }
  double best_value() const;
  int best_epoch() const;
  int epochs_since_best() const { return since_; }

  // Resume support: re-seed the tracker from persisted state.
  void restore(double best_value, int best_epoch, int epochs_since_best);

 private:
  int patience_;
  bool maximize_;
  bool has_best_ = false;
  double best_ = 0.0;
  int best_epoch_ = -1;
  int since_ = 0;
};

}  // namespace bsrnn

#endif  // BSRNN_OPTIM_HPP_
