#pragma once

#include <functional>
#include <span>
#include <vector>

#include "rcmcl/matrix.hpp"

namespace rcmcl {

using ScalarFn = std::function<double(std::span<const double>)>;

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
// Throws NumericError if any evaluation is non-finite.
std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> theta, double h = 1e-5);

// ||a - b|| / max(||a||, ||b||); 0 when both are (near) zero.
double relative_error(std::span<const double> a, std::span<const double> b);

// Checks d loss / d param for the entries listed in `coords` (all entries
// when empty) by perturbing `param` in place. `loss` must read the current
// value of `param`. Returns the relative error over the checked coordinates.
double check_param_gradient(DenseMatrix& param, const DenseMatrix& analytic,
                            const std::function<double()>& loss, double h = 1e-5,
                            std::span<const std::size_t> coords = {});

}  // namespace rcmcl
