#pragma once

#include <array>
#include <span>
#include <vector>

#include "rcmcl/data.hpp"
#include "rcmcl/matrix.hpp"
#include "rcmcl/ops.hpp"

namespace rcmcl {

struct ModelParams;

inline constexpr double kGateCollapseEps = 1e-6;

struct GateOutput {
  std::array<double, kNumModalities> gates{};    // G_R, G_S, G_P in (0, 1)
  std::array<double, kNumModalities> weights{};  // G_M / sum G
  bool degenerate = false;
};

// G = sigmoid(w . z + b).
double gate(std::span<const double> z, std::span<const double> w, double b);

// N x 3 gate matrix from per-modality features and the (3 x d_f, 1 x 3) gate parameters.
DenseMatrix compute_gates(const DenseMatrix* const z[kNumModalities], const DenseMatrix& gate_w,
                          const DenseMatrix& gate_b);

struct FusionResult {
  DenseMatrix fused;             // N x d_f
  std::vector<bool> degenerate;  // per row: sum G < eps, uniform fallback used
};

// Z_fusion = sum_M G_M Z_M / sum_M G_M per row. When sum G < eps the row falls
// back to the plain mean of the modalities marked available.
FusionResult fuse(const DenseMatrix* const z[kNumModalities], const DenseMatrix& gates,
                  std::span<const Availability> availability = {}, double eps = kGateCollapseEps);

struct FusionGrads {
  DenseMatrix dz[kNumModalities];
  DenseMatrix dgates;  // N x 3
};
FusionGrads fuse_backward(const DenseMatrix* const z[kNumModalities], const DenseMatrix& gates,
                          const FusionResult& fwd, const DenseMatrix& dfused,
                          std::span<const Availability> availability = {});

struct GateParamGrads {
  DenseMatrix dz[kNumModalities];
  DenseMatrix dgate_w;
  DenseMatrix dgate_b;
};
// Back-propagates dL/dG (N x 3) through the sigmoid gates.
GateParamGrads gates_backward(const DenseMatrix* const z[kNumModalities], const DenseMatrix& gate_w,
                              const DenseMatrix& gates, const DenseMatrix& dgates);

// Model-level fusion: gates read the raw encoder features, the weighted
// average runs over unit-length rows so no modality dominates by scale alone.
// With adaptive = false every gate is 1 (plain average).
struct FusionForward {
  DenseMatrix gates;
  RowNormalized unit[kNumModalities];
  FusionResult result;
};
FusionForward fusion_forward(const DenseMatrix* const z[kNumModalities], const DenseMatrix& gate_w,
                             const DenseMatrix& gate_b, bool adaptive,
                             std::span<const Availability> availability = {});

struct FusionBackward {
  DenseMatrix dz[kNumModalities];
  DenseMatrix dgate_w;  // zero when not adaptive
  DenseMatrix dgate_b;
};
FusionBackward fusion_backward(const DenseMatrix* const z[kNumModalities], const DenseMatrix& gate_w,
                               const FusionForward& fwd, const DenseMatrix& dfused, bool adaptive,
                               std::span<const Availability> availability = {});

// Mid-sequence outage: `modality` is zeroed from frame `from_frame` onward.
struct DropoutSchedule {
  Modality modality = Modality::kSkeleton;
  std::size_t from_frame = 0;
};

struct GateTracePoint {
  std::size_t window_start = 0;
  GateOutput output;
};

// Encodes each sliding window [s, s + window_len) independently and records
// its gates. Windows start at 0, stride, 2*stride, ... while they fit.
std::vector<GateTracePoint> gate_trace(const Sample& sample, const ModelParams& params, std::size_t window_len,
                                       std::size_t stride, const DropoutSchedule* schedule = nullptr);

}  // namespace rcmcl
