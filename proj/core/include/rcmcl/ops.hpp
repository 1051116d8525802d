#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "rcmcl/matrix.hpp"

namespace rcmcl {

// All reductions below run in a fixed index order, so results are bitwise
// reproducible for identical inputs regardless of the thread count.

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// a^T * b without materializing the transpose.
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
// a * b^T.
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);

void add_inplace(DenseMatrix& dst, const DenseMatrix& src, double scale = 1.0);
void scale_inplace(DenseMatrix& m, double s) noexcept;
DenseMatrix column_sums(const DenseMatrix& m);  // 1 x cols
double dot(std::span<const double> a, std::span<const double> b);

// Mean over consecutive groups of `group` rows: (n*group) x d -> n x d. Each
// output entry sums its group in sorted order, which makes the result exactly
// invariant to permutations within a group.
DenseMatrix group_mean_rows(const DenseMatrix& x, std::size_t group);
// Backward of group_mean_rows: every row of a group receives dy / group.
DenseMatrix group_mean_rows_backward(const DenseMatrix& dy, std::size_t group);

enum class Activation { kNone, kRelu, kTanh, kSigmoid };

std::string_view activation_name(Activation a);
Activation activation_from_name(std::string_view name);

double sigmoid(double x) noexcept;
double relu(double x) noexcept;

// Elementwise forward. Backward uses the forward *output* y, which is enough
// for all supported activations.
DenseMatrix activate(const DenseMatrix& x, Activation act);
void activate_inplace(DenseMatrix& x, Activation act);
DenseMatrix activation_backward(const DenseMatrix& dy, const DenseMatrix& y, Activation act);

// y = x w + b (b broadcast per row).
DenseMatrix affine_forward(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& b);

struct AffineGrads {
  DenseMatrix dx;  // empty unless requested
  DenseMatrix dw;
  DenseMatrix db;
};
AffineGrads affine_backward(const DenseMatrix& dy, const DenseMatrix& x, const DenseMatrix& w,
                            bool need_dx);

struct RowNormalized {
  DenseMatrix y;
  DenseMatrix norms;  // rows x 1, pre-normalization L2 norms
};
// Each row divided by max(||row||, eps).
RowNormalized l2_normalize_rows(const DenseMatrix& x, double eps = 1e-12);
DenseMatrix l2_normalize_rows_backward(const DenseMatrix& dy, const RowNormalized& fwd, double eps = 1e-12);

struct Standardized {
  DenseMatrix y;
  DenseMatrix stddev;  // 1 x cols, population standard deviation
};
// Per column: (x - mean) / max(stddev, eps) with population variance.
// Throws NumericError("batch too small") when rows < 2.
Standardized batch_standardize(const DenseMatrix& x, double eps = 1e-12);
DenseMatrix batch_standardize_backward(const DenseMatrix& dy, const Standardized& fwd, double eps = 1e-12);

}  // namespace rcmcl
