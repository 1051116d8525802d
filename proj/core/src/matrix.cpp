#include "rcmcl/matrix.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "rcmcl/error.hpp"

namespace rcmcl {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("DenseMatrix: data length " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("DenseMatrix::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(data));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::row_vector(std::span<const double> values) {
  return DenseMatrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

DenseMatrix DenseMatrix::reshaped(std::size_t rows, std::size_t cols) const& {
  DenseMatrix copy = *this;
  return std::move(copy).reshaped(rows, cols);
}

DenseMatrix DenseMatrix::reshaped(std::size_t rows, std::size_t cols) && {
  if (rows * cols != data_.size()) {
    throw ShapeError("reshape " + shape_string() + " -> " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  return DenseMatrix(rows, cols, std::move(data_));
}

void DenseMatrix::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string DenseMatrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void require_finite(const DenseMatrix& m, const std::string& what) {
  if (!m.all_finite()) throw NumericError("non-finite values in " + what);
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("max_abs_diff: " + a.shape_string() + " vs " + b.shape_string());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double frobenius_norm(const DenseMatrix& m) {
  double s = 0.0;
  for (double v : m.values()) s += v * v;
  return std::sqrt(s);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(buf, 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) throw IoError("unexpected end of stream");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

void write_f64(std::ostream& os, double v) { write_u64(os, std::bit_cast<std::uint64_t>(v)); }

double read_f64(std::istream& is) { return std::bit_cast<double>(read_u64(is)); }

namespace {
constexpr char kMagic[4] = {'R', 'C', 'M', '1'};
}

void write_matrix(std::ostream& os, const DenseMatrix& m) {
  os.write(kMagic, 4);
  write_u64(os, m.rows());
  write_u64(os, m.cols());
  for (double v : m.values()) write_f64(os, v);
  if (!os) throw IoError("failed writing matrix");
}

DenseMatrix read_matrix(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
    throw IoError("bad matrix magic (expected RCM1)");
  }
  const std::uint64_t rows = read_u64(is);
  const std::uint64_t cols = read_u64(is);
  if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols) throw IoError("matrix header too large");
  std::vector<double> data(rows * cols);
  for (auto& v : data) v = read_f64(is);
  return DenseMatrix(rows, cols, std::move(data));
}

void save_matrix(const std::filesystem::path& path, const DenseMatrix& m) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_matrix(os, m);
}

DenseMatrix load_matrix(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  try {
    return read_matrix(is);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace rcmcl
