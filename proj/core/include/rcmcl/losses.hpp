#pragma once

#include <span>
#include <vector>

#include "rcmcl/fusion.hpp"
#include "rcmcl/matrix.hpp"
#include "rcmcl/mlp.hpp"

namespace rcmcl {

struct LossConfig {
  double tau = 0.07;           // InfoNCE temperature
  double lambda_bt = 5e-3;     // Barlow off-diagonal weight
  double lambda_cm = 1.0;
  double lambda_im = 0.5;
  double lambda_deg = 0.2;
  double lambda_fuse = 0.5;    // 0 recovers the three-term objective

  void validate() const;
  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

struct PairLoss {
  double value = 0.0;
  DenseMatrix grad_a;
  DenseMatrix grad_b;
};

// Symmetric temperature-scaled cross-entropy between matched rows of a and b
// (both N x d, unit-norm rows). The softmax denominator includes the positive.
//   L = -1/(2N) sum_k [ log softmax_m(a_k.b_m / tau)[k] + log softmax_m(b_k.a_m / tau)[k] ]
// Exactly symmetric in (a, b). Throws ShapeError / NumericError when shapes
// differ or a row norm deviates from 1 by more than 1e-6.
PairLoss info_nce_pair(const DenseMatrix& a, const DenseMatrix& b, double tau);

struct TripleLoss {
  double value = 0.0;
  DenseMatrix grad_r, grad_s, grad_p;
};

// Sum of the three pairwise losses (R,S) + (R,P) + (S,P).
TripleLoss cross_modal_total(const DenseMatrix& h_r, const DenseMatrix& h_s, const DenseMatrix& h_p, double tau);

struct BarlowLoss {
  double value = 0.0;
  double invariance = 0.0;  // sum_a (1 - C_aa)^2
  double redundancy = 0.0;  // sum_{a != b} C_ab^2 (unweighted)
  DenseMatrix grad_a;
  DenseMatrix grad_b;
};

// C = standardize(h1)^T standardize(h2) / N with population statistics;
// loss = invariance + lambda_bt * redundancy. Requires N >= 2.
BarlowLoss barlow_loss(const DenseMatrix& h1, const DenseMatrix& h2, double lambda_bt);

struct ReconstructionLoss {
  double value = 0.0;
  DenseMatrix grad_feature;  // dL/dZ_S'
  Mlp grad_decoder;
};

// Mean over all N*T*J*3 coordinates of (D_S(Z_S') - X_S)^2.
ReconstructionLoss degradation_loss(const DenseMatrix& target, const DenseMatrix& masked_features, const Mlp& decoder);
// The bare mean-squared error and its gradient w.r.t. `pred`.
double mean_squared_error(const DenseMatrix& pred, const DenseMatrix& target, DenseMatrix* grad = nullptr);

struct FusionInputs {
  const DenseMatrix* z[kNumModalities] = {nullptr, nullptr, nullptr};  // N x d_f encoder features
  const DenseMatrix* h[kNumModalities] = {nullptr, nullptr, nullptr};  // N x d_h alignment targets
  std::span<const Availability> availability;  // empty = all available
};

struct FusionLoss {
  double value = 0.0;
  DenseMatrix grad_z[kNumModalities];
  DenseMatrix grad_h[kNumModalities];
  DenseMatrix grad_gate_w;  // 3 x d_f
  DenseMatrix grad_gate_b;  // 1 x 3
  Mlp grad_proj_f;
  std::size_t degenerate_rows = 0;  // rows that used the uniform fallback
};

// Fused-to-modality alignment: h_F = project(fusion_forward(Z).fused, proj_f)
// and L = sum_M info_nce_pair(h_F, h_M, tau). Gradients reach the gate
// parameters through the fusion weights.
FusionLoss fusion_alignment_loss(const FusionInputs& in, const DenseMatrix& gate_w, const DenseMatrix& gate_b,
                                 const Mlp& proj_f, double tau);

struct LossComponents {
  double cross_modal = 0.0;
  double intra_modal = 0.0;
  double degradation = 0.0;
  double fusion = 0.0;
};

// lambda_cm L_CM + lambda_im L_IM + lambda_deg L_deg + lambda_fuse L_FUSION.
double total_loss(const LossComponents& c, const LossConfig& cfg);

struct CrossEntropy {
  double value = 0.0;
  DenseMatrix grad_logits;
};

// Mean negative log-softmax probability of the true class.
CrossEntropy cross_entropy(const DenseMatrix& logits, std::span<const int> labels);

}  // namespace rcmcl
