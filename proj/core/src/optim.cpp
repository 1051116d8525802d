#include "rcmcl/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rcmcl/error.hpp"

namespace rcmcl {

void adamw_step(std::span<DenseMatrix* const> params, std::span<const DenseMatrix* const> grads, OptimState& state,
                const AdamWConfig& cfg, double lr) {
  if (params.size() != grads.size()) throw ShapeError("adamw_step: parameter and gradient counts differ");
  if (state.first_moment.empty()) {
    for (const DenseMatrix* p : params) {
      state.first_moment.emplace_back(p->rows(), p->cols());
      state.second_moment.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.first_moment.size() != params.size()) throw ShapeError("adamw_step: optimizer state does not match");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    DenseMatrix& p = *params[i];
    const DenseMatrix& g = *grads[i];
    DenseMatrix& m = state.first_moment[i];
    DenseMatrix& v = state.second_moment[i];
    if (g.rows() != p.rows() || g.cols() != p.cols() || m.size() != p.size()) {
      throw ShapeError("adamw_step: tensor " + std::to_string(i) + " shape mismatch " + p.shape_string() + " vs " +
                       g.shape_string());
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k];
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
      p[k] -= lr * cfg.weight_decay * p[k];
      p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
    }
  }
}

double lr_at(double progress, const LrSchedule& s) {
  const double e = std::clamp(progress, 0.0, 1.0) * s.epochs;
  if (e < s.warmup_epochs) return s.base_lr * e / s.warmup_epochs;
  const double span = s.epochs - s.warmup_epochs;
  if (span <= 0.0) return s.base_lr;
  return s.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * (e - s.warmup_epochs) / span));
}

}  // namespace rcmcl
