#include "rcmcl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rcmcl/error.hpp"
#include "rcmcl/parallel.hpp"

namespace rcmcl {

namespace {

[[noreturn]] void shape_fail(std::string_view op, const DenseMatrix& a, const DenseMatrix& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
}

// Minimum multiply-adds per thread chunk before splitting is worth it.
constexpr std::size_t kParallelWork = 1 << 16;

std::size_t rows_per_chunk(std::size_t work_per_row) {
  return std::max<std::size_t>(1, kParallelWork / std::max<std::size_t>(1, work_per_row));
}

}  // namespace

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) shape_fail("matmul", a, b);
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  DenseMatrix c(n, m);
  parallel_for(n, rows_per_chunk(k * m), [&](std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0; i < r1; ++i) {
      double* ci = c.data() + i * m;
      const double* ai = a.data() + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ai[p];
        const double* bp = b.data() + p * m;
        for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
      }
    }
  });
  return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) shape_fail("matmul_tn", a, b);
  const std::size_t n = a.rows(), p = a.cols(), q = b.cols();
  DenseMatrix c(p, q);
  parallel_for(p, rows_per_chunk(n * q), [&](std::size_t i0, std::size_t i1) {
    for (std::size_t r = 0; r < n; ++r) {
      const double* ar = a.data() + r * p;
      const double* br = b.data() + r * q;
      for (std::size_t i = i0; i < i1; ++i) {
        const double av = ar[i];
        if (av == 0.0) continue;
        double* ci = c.data() + i * q;
        for (std::size_t j = 0; j < q; ++j) ci[j] += av * br[j];
      }
    }
  });
  return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) shape_fail("matmul_nt", a, b);
  return matmul(a, transpose(b));
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

void add_inplace(DenseMatrix& dst, const DenseMatrix& src, double scale) {
  if (dst.rows() != src.rows() || dst.cols() != src.cols()) shape_fail("add_inplace", dst, src);
  double* d = dst.data();
  const double* s = src.data();
  if (scale == 1.0) {
    for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
  } else {
    for (std::size_t i = 0; i < dst.size(); ++i) d[i] += scale * s[i];
  }
}

void scale_inplace(DenseMatrix& m, double s) noexcept {
  for (double& v : m.values()) v *= s;
}

DenseMatrix column_sums(const DenseMatrix& m) {
  DenseMatrix s(1, m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* mr = m.data() + r * m.cols();
    for (std::size_t c = 0; c < m.cols(); ++c) s[c] += mr[c];
  }
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

DenseMatrix group_mean_rows(const DenseMatrix& x, std::size_t group) {
  if (group == 0 || x.rows() % group != 0) {
    throw ShapeError("group_mean_rows: " + x.shape_string() + " not divisible into groups of " + std::to_string(group));
  }
  const std::size_t n = x.rows() / group, d = x.cols();
  DenseMatrix y(n, d);
  std::vector<double> buf(group);
  const double inv = 1.0 / static_cast<double>(group);
  for (std::size_t g = 0; g < n; ++g) {
    for (std::size_t c = 0; c < d; ++c) {
      for (std::size_t t = 0; t < group; ++t) buf[t] = x(g * group + t, c);
      std::sort(buf.begin(), buf.end());
      double s = 0.0;
      for (double v : buf) s += v;
      y(g, c) = s * inv;
    }
  }
  return y;
}

DenseMatrix group_mean_rows_backward(const DenseMatrix& dy, std::size_t group) {
  DenseMatrix dx(dy.rows() * group, dy.cols());
  const double inv = 1.0 / static_cast<double>(group);
  for (std::size_t g = 0; g < dy.rows(); ++g)
    for (std::size_t t = 0; t < group; ++t) {
      double* out = dx.data() + (g * group + t) * dy.cols();
      const double* in = dy.data() + g * dy.cols();
      for (std::size_t c = 0; c < dy.cols(); ++c) out[c] = in[c] * inv;
    }
  return dx;
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kNone: return "none";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "none";
}

Activation activation_from_name(std::string_view name) {
  if (name == "none") return Activation::kNone;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }

void activate_inplace(DenseMatrix& x, Activation act) {
  switch (act) {
    case Activation::kNone: return;
    case Activation::kRelu:
      for (double& v : x.values()) v = relu(v);
      return;
    case Activation::kTanh:
      for (double& v : x.values()) v = std::tanh(v);
      return;
    case Activation::kSigmoid:
      for (double& v : x.values()) v = sigmoid(v);
      return;
  }
}

DenseMatrix activate(const DenseMatrix& x, Activation act) {
  DenseMatrix y = x;
  activate_inplace(y, act);
  return y;
}

DenseMatrix activation_backward(const DenseMatrix& dy, const DenseMatrix& y, Activation act) {
  if (dy.rows() != y.rows() || dy.cols() != y.cols()) shape_fail("activation_backward", dy, y);
  DenseMatrix dx = dy;
  switch (act) {
    case Activation::kNone: break;
    case Activation::kRelu:
      for (std::size_t i = 0; i < dx.size(); ++i)
        if (!(y[i] > 0.0)) dx[i] = 0.0;
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= 1.0 - y[i] * y[i];
      break;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= y[i] * (1.0 - y[i]);
      break;
  }
  return dx;
}

DenseMatrix affine_forward(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& b) {
  if (b.rows() != 1 || b.cols() != w.cols()) shape_fail("affine_forward(bias)", w, b);
  DenseMatrix y = matmul(x, w);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double* yr = y.data() + r * y.cols();
    for (std::size_t c = 0; c < y.cols(); ++c) yr[c] += b[c];
  }
  return y;
}

AffineGrads affine_backward(const DenseMatrix& dy, const DenseMatrix& x, const DenseMatrix& w, bool need_dx) {
  if (dy.rows() != x.rows() || dy.cols() != w.cols()) shape_fail("affine_backward", dy, w);
  AffineGrads g;
  g.dw = matmul_tn(x, dy);
  g.db = column_sums(dy);
  if (need_dx) g.dx = matmul_nt(dy, w);
  return g;
}

RowNormalized l2_normalize_rows(const DenseMatrix& x, double eps) {
  RowNormalized out{x, DenseMatrix(x.rows(), 1)};
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = out.y.row(r);
    double ss = 0.0;
    for (double v : row) ss += v * v;
    const double n = std::sqrt(ss);
    out.norms[r] = n;
    const double denom = std::max(n, eps);
    for (double& v : row) v /= denom;
  }
  return out;
}

DenseMatrix l2_normalize_rows_backward(const DenseMatrix& dy, const RowNormalized& fwd, double eps) {
  if (dy.rows() != fwd.y.rows() || dy.cols() != fwd.y.cols()) shape_fail("l2_normalize_rows_backward", dy, fwd.y);
  DenseMatrix dx(dy.rows(), dy.cols());
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    const double n = fwd.norms[r];
    auto y = fwd.y.row(r);
    auto g = dy.row(r);
    auto out = dx.row(r);
    if (n > eps) {
      const double proj = dot(y, g);
      for (std::size_t c = 0; c < out.size(); ++c) out[c] = (g[c] - y[c] * proj) / n;
    } else {
      for (std::size_t c = 0; c < out.size(); ++c) out[c] = g[c] / eps;
    }
  }
  return dx;
}

Standardized batch_standardize(const DenseMatrix& x, double eps) {
  if (x.rows() < 2) throw NumericError("batch_standardize: batch too small (" + std::to_string(x.rows()) + " rows, need >= 2)");
  const std::size_t n = x.rows(), d = x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  DenseMatrix mean = column_sums(x);
  scale_inplace(mean, inv_n);
  DenseMatrix var(1, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      const double z = x(r, c) - mean[c];
      var[c] += z * z;
    }
  Standardized out{DenseMatrix(n, d), DenseMatrix(1, d)};
  for (std::size_t c = 0; c < d; ++c) out.stddev[c] = std::sqrt(var[c] * inv_n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out.y(r, c) = (x(r, c) - mean[c]) / std::max(out.stddev[c], eps);
  return out;
}

DenseMatrix batch_standardize_backward(const DenseMatrix& dy, const Standardized& fwd, double eps) {
  if (dy.rows() != fwd.y.rows() || dy.cols() != fwd.y.cols()) shape_fail("batch_standardize_backward", dy, fwd.y);
  const std::size_t n = dy.rows(), d = dy.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  DenseMatrix mean_dy = column_sums(dy);
  scale_inplace(mean_dy, inv_n);
  DenseMatrix mean_dy_y(1, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mean_dy_y[c] += dy(r, c) * fwd.y(r, c);
  scale_inplace(mean_dy_y, inv_n);
  DenseMatrix dx(n, d);
  for (std::size_t c = 0; c < d; ++c) {
    const double s = fwd.stddev[c];
    const bool live = s > eps;
    const double denom = live ? s : eps;
    for (std::size_t r = 0; r < n; ++r) {
      double g = dy(r, c) - mean_dy[c];
      if (live) g -= fwd.y(r, c) * mean_dy_y[c];
      dx(r, c) = g / denom;
    }
  }
  return dx;
}

}  // namespace rcmcl
