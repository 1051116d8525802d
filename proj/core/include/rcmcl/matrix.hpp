#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace rcmcl {

// Row-major 2-D array of doubles. Higher-rank data (T x J x 3 skeletons,
// T x P x 3 point sets) is stored flattened, one sample per row.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static DenseMatrix identity(std::size_t n);
  static DenseMatrix row_vector(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  // Same storage reinterpreted with a new row width; rows*cols must match.
  DenseMatrix reshaped(std::size_t rows, std::size_t cols) const&;
  DenseMatrix reshaped(std::size_t rows, std::size_t cols) &&;

  void fill(double value) noexcept;
  bool all_finite() const noexcept;
  std::string shape_string() const;

  friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Throws NumericError naming `what` when any entry is NaN or infinite.
void require_finite(const DenseMatrix& m, const std::string& what);

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);
double frobenius_norm(const DenseMatrix& m);

// Binary format: "RCM1", rows (u64 LE), cols (u64 LE), rows*cols f64 LE.
void write_matrix(std::ostream& os, const DenseMatrix& m);
DenseMatrix read_matrix(std::istream& is);
void save_matrix(const std::filesystem::path& path, const DenseMatrix& m);
DenseMatrix load_matrix(const std::filesystem::path& path);

// Little-endian primitives shared by the other binary writers.
void write_u64(std::ostream& os, std::uint64_t v);
std::uint64_t read_u64(std::istream& is);
void write_f64(std::ostream& os, double v);
double read_f64(std::istream& is);

}  // namespace rcmcl
