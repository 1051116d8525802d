#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rcmcl/matrix.hpp"

namespace rcmcl {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;  // decoupled: p -= lr * wd * p
};

struct OptimState {
  std::vector<DenseMatrix> first_moment;
  std::vector<DenseMatrix> second_moment;
  std::uint64_t step = 0;
};

// One bias-corrected AdamW update over parallel lists of parameters and
// gradients. Moments are created lazily on the first call.
void adamw_step(std::span<DenseMatrix* const> params, std::span<const DenseMatrix* const> grads, OptimState& state,
                const AdamWConfig& cfg, double lr);

struct LrSchedule {
  double base_lr = 1e-3;
  double epochs = 100.0;
  double warmup_epochs = 10.0;
};

// Linear warm-up 0 -> base_lr over the warm-up epochs, then cosine decay to 0.
// `progress` is the fraction of training completed, in [0, 1].
double lr_at(double progress, const LrSchedule& s);

}  // namespace rcmcl
