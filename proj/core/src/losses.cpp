#include "rcmcl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rcmcl/error.hpp"
#include "rcmcl/model.hpp"
#include "rcmcl/ops.hpp"

namespace rcmcl {

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("loss: tau must be > 0");
  for (double l : {lambda_bt, lambda_cm, lambda_im, lambda_deg, lambda_fuse}) {
    if (!(l >= 0.0)) throw ConfigError("loss: lambda weights must be >= 0");
  }
}

namespace {

constexpr double kUnitNormTolerance = 1e-6;

void require_unit_rows(const DenseMatrix& h, const char* what) {
  for (std::size_t r = 0; r < h.rows(); ++r) {
    double ss = 0.0;
    for (double v : h.row(r)) ss += v * v;
    if (std::abs(std::sqrt(ss) - 1.0) > kUnitNormTolerance) {
      throw NumericError(std::string("info_nce_pair: row ") + std::to_string(r) + " of " + what +
                         " is not unit-norm (norm " + std::to_string(std::sqrt(ss)) + ")");
    }
  }
}

// For each row k of logits: accumulates lse_k - logits[k][k] and writes the
// row softmax into probs.
double diag_nll(const DenseMatrix& logits, DenseMatrix& probs) {
  const std::size_t n = logits.rows();
  probs = DenseMatrix(n, n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    auto row = logits.row(k);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    total += lse - row[k];
    for (std::size_t m = 0; m < n; ++m) probs(k, m) = std::exp(row[m] - lse);
  }
  return total;
}

}  // namespace

PairLoss info_nce_pair(const DenseMatrix& a, const DenseMatrix& b, double tau) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("info_nce_pair: shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  if (a.rows() == 0) throw ShapeError("info_nce_pair: empty batch");
  if (!(tau > 0.0)) throw ConfigError("info_nce_pair: tau must be > 0");
  require_unit_rows(a, "first input");
  require_unit_rows(b, "second input");
  const std::size_t n = a.rows();
  const double inv_tau = 1.0 / tau;

  DenseMatrix s_ab = matmul_nt(a, b);  // a_k . b_m
  DenseMatrix s_ba = matmul_nt(b, a);  // b_k . a_m
  scale_inplace(s_ab, inv_tau);
  scale_inplace(s_ba, inv_tau);
  DenseMatrix p_ab, p_ba;
  const double l_ab = diag_nll(s_ab, p_ab);
  const double l_ba = diag_nll(s_ba, p_ba);

  PairLoss out;
  out.value = (l_ab + l_ba) / (2.0 * static_cast<double>(n));

  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    p_ab(k, k) -= 1.0;
    p_ba(k, k) -= 1.0;
  }
  scale_inplace(p_ab, scale * inv_tau);
  scale_inplace(p_ba, scale * inv_tau);
  // s_ab[k][m] = a_k.b_m / tau ; s_ba[k][m] = b_k.a_m / tau
  out.grad_a = matmul(p_ab, b);
  add_inplace(out.grad_a, matmul_tn(p_ba, b));
  out.grad_b = matmul(p_ba, a);
  add_inplace(out.grad_b, matmul_tn(p_ab, a));
  return out;
}

TripleLoss cross_modal_total(const DenseMatrix& h_r, const DenseMatrix& h_s, const DenseMatrix& h_p, double tau) {
  PairLoss rs = info_nce_pair(h_r, h_s, tau);
  PairLoss rp = info_nce_pair(h_r, h_p, tau);
  PairLoss sp = info_nce_pair(h_s, h_p, tau);
  TripleLoss out;
  out.value = rs.value + rp.value + sp.value;
  out.grad_r = std::move(rs.grad_a);
  add_inplace(out.grad_r, rp.grad_a);
  out.grad_s = std::move(rs.grad_b);
  add_inplace(out.grad_s, sp.grad_a);
  out.grad_p = std::move(rp.grad_b);
  add_inplace(out.grad_p, sp.grad_b);
  return out;
}

BarlowLoss barlow_loss(const DenseMatrix& h1, const DenseMatrix& h2, double lambda_bt) {
  if (h1.rows() != h2.rows() || h1.cols() != h2.cols()) {
    throw ShapeError("barlow_loss: shape mismatch " + h1.shape_string() + " vs " + h2.shape_string());
  }
  if (h1.rows() < 2) throw NumericError("barlow_loss: batch too small (need N >= 2)");
  const std::size_t n = h1.rows(), d = h1.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  Standardized s1 = batch_standardize(h1);
  Standardized s2 = batch_standardize(h2);
  DenseMatrix c = matmul_tn(s1.y, s2.y);
  scale_inplace(c, inv_n);

  BarlowLoss out;
  DenseMatrix dc(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double v = c(i, j);
      if (i == j) {
        out.invariance += (1.0 - v) * (1.0 - v);
        dc(i, j) = -2.0 * (1.0 - v);
      } else {
        out.redundancy += v * v;
        dc(i, j) = 2.0 * lambda_bt * v;
      }
    }
  out.value = out.invariance + lambda_bt * out.redundancy;
  scale_inplace(dc, inv_n);
  DenseMatrix dz1 = matmul_nt(s2.y, dc);  // z2 dC^T
  DenseMatrix dz2 = matmul(s1.y, dc);
  out.grad_a = batch_standardize_backward(dz1, s1);
  out.grad_b = batch_standardize_backward(dz2, s2);
  return out;
}

double mean_squared_error(const DenseMatrix& pred, const DenseMatrix& target, DenseMatrix* grad) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ShapeError("mean_squared_error: shape mismatch " + pred.shape_string() + " vs " + target.shape_string());
  }
  if (pred.size() == 0) throw ShapeError("mean_squared_error: empty input");
  const double inv = 1.0 / static_cast<double>(pred.size());
  double s = 0.0;
  if (grad) *grad = DenseMatrix(pred.rows(), pred.cols());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - target[i];
    s += e * e;
    if (grad) (*grad)[i] = 2.0 * e * inv;
  }
  return s * inv;
}

ReconstructionLoss degradation_loss(const DenseMatrix& target, const DenseMatrix& masked_features, const Mlp& decoder) {
  MlpCache cache;
  DenseMatrix pred = decode_skeleton(decoder, masked_features, &cache);
  ReconstructionLoss out;
  DenseMatrix dpred;
  out.value = mean_squared_error(pred, target, &dpred);
  out.grad_decoder = zeros_like(decoder);
  out.grad_feature = mlp_backward(decoder, cache, dpred, out.grad_decoder, true);
  return out;
}

FusionLoss fusion_alignment_loss(const FusionInputs& in, const DenseMatrix& gate_w, const DenseMatrix& gate_b,
                                 const Mlp& proj_f, double tau) {
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    if (!in.z[m] || !in.h[m]) throw ShapeError("fusion_alignment_loss: missing modality input");
  }
  const FusionForward fwd = fusion_forward(in.z, gate_w, gate_b, true, in.availability);

  FusionLoss out;
  ProjectionCache pc;
  const DenseMatrix h_f = project(proj_f, fwd.result.fused, &pc);
  DenseMatrix dh_f(h_f.rows(), h_f.cols());
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    PairLoss pl = info_nce_pair(h_f, *in.h[m], tau);
    out.value += pl.value;
    add_inplace(dh_f, pl.grad_a);
    out.grad_h[m] = std::move(pl.grad_b);
  }
  out.grad_proj_f = zeros_like(proj_f);
  const DenseMatrix dfused = project_backward(proj_f, pc, dh_f, out.grad_proj_f);
  FusionBackward fb = fusion_backward(in.z, gate_w, fwd, dfused, true, in.availability);
  for (std::size_t m = 0; m < kNumModalities; ++m) out.grad_z[m] = std::move(fb.dz[m]);
  out.grad_gate_w = std::move(fb.dgate_w);
  out.grad_gate_b = std::move(fb.dgate_b);
  const auto& fr = fwd.result;
  out.degenerate_rows = static_cast<std::size_t>(std::count(fr.degenerate.begin(), fr.degenerate.end(), true));
  return out;
}

double total_loss(const LossComponents& c, const LossConfig& cfg) {
  return cfg.lambda_cm * c.cross_modal + cfg.lambda_im * c.intra_modal + cfg.lambda_deg * c.degradation +
         cfg.lambda_fuse * c.fusion;
}

CrossEntropy cross_entropy(const DenseMatrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows()) throw ShapeError("cross_entropy: label count does not match logits rows");
  if (logits.rows() == 0) throw ShapeError("cross_entropy: empty batch");
  const std::size_t n = logits.rows(), k = logits.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  CrossEntropy out;
  out.grad_logits = DenseMatrix(n, k);
  for (std::size_t r = 0; r < n; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw ConfigError("cross_entropy: label " + std::to_string(y) + " out of range [0, " + std::to_string(k) + ")");
    }
    auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    out.value += lse - row[static_cast<std::size_t>(y)];
    for (std::size_t c = 0; c < k; ++c) out.grad_logits(r, c) = std::exp(row[c] - lse) * inv_n;
    out.grad_logits(r, static_cast<std::size_t>(y)) -= inv_n;
  }
  out.value *= inv_n;
  return out;
}

}  // namespace rcmcl
