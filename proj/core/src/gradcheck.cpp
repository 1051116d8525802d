#include "rcmcl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rcmcl/error.hpp"

namespace rcmcl {

std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> theta, double h) {
  std::vector<double> x(theta.begin(), theta.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite_diff_grad: non-finite evaluation at coordinate " + std::to_string(i));
    }
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("relative_error: length mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  if (scale < 1e-300) return 0.0;
  return std::sqrt(diff) / scale;
}

double check_param_gradient(DenseMatrix& param, const DenseMatrix& analytic,
                            const std::function<double()>& loss, double h,
                            std::span<const std::size_t> coords) {
  if (param.rows() != analytic.rows() || param.cols() != analytic.cols()) {
    throw ShapeError("check_param_gradient: " + param.shape_string() + " vs " + analytic.shape_string());
  }
  std::vector<std::size_t> all;
  if (coords.empty()) {
    all.resize(param.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    coords = all;
  }
  std::vector<double> numeric, exact;
  numeric.reserve(coords.size());
  exact.reserve(coords.size());
  for (std::size_t i : coords) {
    const double orig = param[i];
    param[i] = orig + h;
    const double fp = loss();
    param[i] = orig - h;
    const double fm = loss();
    param[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("check_param_gradient: non-finite evaluation at entry " + std::to_string(i));
    }
    numeric.push_back((fp - fm) / (2.0 * h));
    exact.push_back(analytic[i]);
  }
  return relative_error(numeric, exact);
}

}  // namespace rcmcl
