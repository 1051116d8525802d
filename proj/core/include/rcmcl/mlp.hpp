#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rcmcl/matrix.hpp"
#include "rcmcl/ops.hpp"
#include "rcmcl/rng.hpp"

namespace rcmcl {

struct DenseLayer {
  DenseMatrix w;  // in x out
  DenseMatrix b;  // 1 x out
  Activation act = Activation::kNone;
};

struct Mlp {
  std::vector<DenseLayer> layers;

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  // Throws ShapeError unless consecutive layers chain and biases match.
  void validate() const;
};

struct MlpCache {
  std::vector<DenseMatrix> inputs;   // input to each layer
  std::vector<DenseMatrix> outputs;  // post-activation output of each layer
};

DenseMatrix mlp_forward(const Mlp& mlp, const DenseMatrix& x, MlpCache* cache = nullptr);

// Accumulates parameter gradients into `grads` (same layout as `mlp`).
// Returns dL/dx when need_dx, otherwise an empty matrix.
DenseMatrix mlp_backward(const Mlp& mlp, const MlpCache& cache, const DenseMatrix& dy, Mlp& grads, bool need_dx);

Mlp zeros_like(const Mlp& mlp);

// dims = {in, h1, ..., out}; hidden layers use `hidden`, the last uses `last`.
// Weights ~ N(0, 2/fan_in) for ReLU layers and N(0, 1/fan_in) otherwise; biases 0.
Mlp make_mlp(std::span<const std::size_t> dims, Activation hidden, Activation last, SplitRng& rng);

}  // namespace rcmcl
