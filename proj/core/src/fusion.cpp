#include "rcmcl/fusion.hpp"

#include <algorithm>
#include <string>

#include "rcmcl/error.hpp"
#include "rcmcl/model.hpp"
#include "rcmcl/ops.hpp"

namespace rcmcl {

namespace {

std::size_t checked_rows(const DenseMatrix* const z[kNumModalities], std::size_t width) {
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    if (!z[m]) throw ShapeError("fusion: missing modality features");
    if (z[m]->rows() != z[0]->rows() || z[m]->cols() != z[0]->cols()) {
      throw ShapeError("fusion: modality features disagree: " + z[m]->shape_string() + " vs " +
                       z[0]->shape_string());
    }
  }
  if (width != 0 && z[0]->cols() != width) {
    throw ShapeError("fusion: feature width " + std::to_string(z[0]->cols()) + " does not match gate width " +
                     std::to_string(width));
  }
  return z[0]->rows();
}

bool available(std::span<const Availability> av, std::size_t row, std::size_t m) {
  return av.empty() || av[row][m];
}

}  // namespace

double gate(std::span<const double> z, std::span<const double> w, double b) {
  if (z.size() != w.size()) throw ShapeError("gate: feature and weight lengths differ");
  return sigmoid(dot(z, w) + b);
}

DenseMatrix compute_gates(const DenseMatrix* const z[kNumModalities], const DenseMatrix& gate_w,
                          const DenseMatrix& gate_b) {
  if (gate_w.rows() != kNumModalities || gate_b.rows() != 1 || gate_b.cols() != kNumModalities) {
    throw ShapeError("compute_gates: gate parameters must be 3 x d_f and 1 x 3");
  }
  const std::size_t n = checked_rows(z, gate_w.cols());
  DenseMatrix g(n, kNumModalities);
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    for (std::size_t r = 0; r < n; ++r) g(r, m) = gate(z[m]->row(r), gate_w.row(m), gate_b(0, m));
  }
  return g;
}

FusionResult fuse(const DenseMatrix* const z[kNumModalities], const DenseMatrix& gates,
                  std::span<const Availability> availability, double eps) {
  const std::size_t n = checked_rows(z, 0);
  if (gates.rows() != n || gates.cols() != kNumModalities) {
    throw ShapeError("fuse: gates must be " + std::to_string(n) + " x 3, got " + gates.shape_string());
  }
  if (!availability.empty() && availability.size() != n) throw ShapeError("fuse: availability length mismatch");
  const std::size_t d = z[0]->cols();
  FusionResult out{DenseMatrix(n, d), std::vector<bool>(n, false)};
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t m = 0; m < kNumModalities; ++m) s += gates(r, m);
    double w[kNumModalities];
    if (s < eps) {
      out.degenerate[r] = true;
      std::size_t k = 0;
      for (std::size_t m = 0; m < kNumModalities; ++m) k += available(availability, r, m) ? 1 : 0;
      for (std::size_t m = 0; m < kNumModalities; ++m) {
        w[m] = k == 0 ? 1.0 / kNumModalities : (available(availability, r, m) ? 1.0 / static_cast<double>(k) : 0.0);
      }
    } else {
      for (std::size_t m = 0; m < kNumModalities; ++m) w[m] = gates(r, m) / s;
    }
    auto dst = out.fused.row(r);
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      auto src = z[m]->row(r);
      for (std::size_t c = 0; c < d; ++c) dst[c] += w[m] * src[c];
    }
  }
  return out;
}

FusionGrads fuse_backward(const DenseMatrix* const z[kNumModalities], const DenseMatrix& gates,
                          const FusionResult& fwd, const DenseMatrix& dfused,
                          std::span<const Availability> availability) {
  const std::size_t n = checked_rows(z, 0);
  const std::size_t d = z[0]->cols();
  if (dfused.rows() != n || dfused.cols() != d) throw ShapeError("fuse_backward: gradient shape mismatch");
  FusionGrads g;
  for (auto& dz : g.dz) dz = DenseMatrix(n, d);
  g.dgates = DenseMatrix(n, kNumModalities);
  for (std::size_t r = 0; r < n; ++r) {
    auto dy = dfused.row(r);
    if (fwd.degenerate[r]) {
      // constant weights: no gradient reaches the gates
      std::size_t k = 0;
      for (std::size_t m = 0; m < kNumModalities; ++m) k += available(availability, r, m) ? 1 : 0;
      for (std::size_t m = 0; m < kNumModalities; ++m) {
        const double w =
            k == 0 ? 1.0 / kNumModalities : (available(availability, r, m) ? 1.0 / static_cast<double>(k) : 0.0);
        auto dz = g.dz[m].row(r);
        for (std::size_t c = 0; c < d; ++c) dz[c] = w * dy[c];
      }
      continue;
    }
    double s = 0.0;
    for (std::size_t m = 0; m < kNumModalities; ++m) s += gates(r, m);
    auto zf = fwd.fused.row(r);
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      const double w = gates(r, m) / s;
      auto zm = z[m]->row(r);
      auto dz = g.dz[m].row(r);
      double dg = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        dz[c] = w * dy[c];
        dg += (zm[c] - zf[c]) * dy[c];
      }
      g.dgates(r, m) = dg / s;
    }
  }
  return g;
}

GateParamGrads gates_backward(const DenseMatrix* const z[kNumModalities], const DenseMatrix& gate_w,
                              const DenseMatrix& gates, const DenseMatrix& dgates) {
  const std::size_t n = checked_rows(z, gate_w.cols());
  const std::size_t d = gate_w.cols();
  if (gates.rows() != n || dgates.rows() != n || dgates.cols() != kNumModalities) {
    throw ShapeError("gates_backward: gate gradient shape mismatch");
  }
  GateParamGrads g;
  g.dgate_w = DenseMatrix(kNumModalities, d);
  g.dgate_b = DenseMatrix(1, kNumModalities);
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    g.dz[m] = DenseMatrix(n, d);
    auto w = gate_w.row(m);
    auto dw = g.dgate_w.row(m);
    for (std::size_t r = 0; r < n; ++r) {
      const double y = gates(r, m);
      const double da = dgates(r, m) * y * (1.0 - y);
      g.dgate_b(0, m) += da;
      auto zm = z[m]->row(r);
      auto dz = g.dz[m].row(r);
      for (std::size_t c = 0; c < d; ++c) {
        dw[c] += da * zm[c];
        dz[c] = da * w[c];
      }
    }
  }
  return g;
}

FusionForward fusion_forward(const DenseMatrix* const z[kNumModalities], const DenseMatrix& gate_w,
                             const DenseMatrix& gate_b, bool adaptive, std::span<const Availability> availability) {
  const std::size_t n = checked_rows(z, 0);
  FusionForward f;
  const DenseMatrix* unit[kNumModalities];
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    f.unit[m] = l2_normalize_rows(*z[m]);
    unit[m] = &f.unit[m].y;
  }
  f.gates = adaptive ? compute_gates(z, gate_w, gate_b) : DenseMatrix(n, kNumModalities, 1.0);
  f.result = fuse(unit, f.gates, availability);
  return f;
}

FusionBackward fusion_backward(const DenseMatrix* const z[kNumModalities], const DenseMatrix& gate_w,
                               const FusionForward& fwd, const DenseMatrix& dfused, bool adaptive,
                               std::span<const Availability> availability) {
  const DenseMatrix* unit[kNumModalities];
  for (std::size_t m = 0; m < kNumModalities; ++m) unit[m] = &fwd.unit[m].y;
  FusionGrads fg = fuse_backward(unit, fwd.gates, fwd.result, dfused, availability);
  FusionBackward out;
  for (std::size_t m = 0; m < kNumModalities; ++m) out.dz[m] = l2_normalize_rows_backward(fg.dz[m], fwd.unit[m]);
  if (adaptive) {
    GateParamGrads gg = gates_backward(z, gate_w, fwd.gates, fg.dgates);
    for (std::size_t m = 0; m < kNumModalities; ++m) add_inplace(out.dz[m], gg.dz[m]);
    out.dgate_w = std::move(gg.dgate_w);
    out.dgate_b = std::move(gg.dgate_b);
  } else {
    out.dgate_w = DenseMatrix(gate_w.rows(), gate_w.cols());
    out.dgate_b = DenseMatrix(1, kNumModalities);
  }
  return out;
}

std::vector<GateTracePoint> gate_trace(const Sample& sample, const ModelParams& params, std::size_t window_len,
                                       std::size_t stride, const DropoutSchedule* schedule) {
  const std::size_t frames = sample.rgbd.rows();
  if (sample.skeleton.rows() != frames || sample.points.rows() != frames) {
    throw ShapeError("gate_trace: modalities disagree on frame count");
  }
  if (window_len == 0 || window_len > frames) {
    throw ConfigError("gate_trace: window_len must be in [1, " + std::to_string(frames) + "]");
  }
  if (stride == 0) throw ConfigError("gate_trace: stride must be >= 1");

  const DenseMatrix* blocks[kNumModalities] = {&sample.rgbd, &sample.skeleton, &sample.points};
  DenseMatrix dropped;
  if (schedule) {
    const std::size_t m = index_of(schedule->modality);
    dropped = *blocks[m];
    for (std::size_t t = schedule->from_frame; t < frames; ++t) {
      for (double& v : dropped.row(t)) v = 0.0;
    }
    blocks[m] = &dropped;
  }

  std::vector<GateTracePoint> trace;
  for (std::size_t s = 0; s + window_len <= frames; s += stride) {
    DenseMatrix z[kNumModalities];
    const DenseMatrix* zp[kNumModalities];
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      const std::size_t fw = blocks[m]->cols();
      DenseMatrix window(1, window_len * fw);
      for (std::size_t t = 0; t < window_len; ++t) {
        auto src = blocks[m]->row(s + t);
        std::copy(src.begin(), src.end(), window.data() + t * fw);
      }
      z[m] = encode(params, kModalities[m], window);
      zp[m] = &z[m];
    }
    const DenseMatrix g = compute_gates(zp, params.gate_w, params.gate_b);
    GateTracePoint pt;
    pt.window_start = s;
    double sum = 0.0;
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      pt.output.gates[m] = g(0, m);
      sum += g(0, m);
    }
    pt.output.degenerate = sum < kGateCollapseEps;
    const auto open = static_cast<double>(std::count(sample.availability.begin(), sample.availability.end(), true));
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      if (!pt.output.degenerate) {
        pt.output.weights[m] = g(0, m) / sum;
      } else if (open == 0.0) {
        pt.output.weights[m] = 1.0 / kNumModalities;
      } else {
        pt.output.weights[m] = sample.availability[m] ? 1.0 / open : 0.0;
      }
    }
    trace.push_back(pt);
  }
  return trace;
}

}  // namespace rcmcl
