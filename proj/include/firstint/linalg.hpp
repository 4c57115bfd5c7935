#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace firstint {

/// Small dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void swap_rows(std::size_t a, std::size_t b);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double norm(std::span<const double> v);
double frobenius_norm(const Matrix& a);

std::vector<double> multiply(const Matrix& a, std::span<const double> v);

/// Product of the Euclidean row norms, an upper bound on |det a|.
double hadamard_bound(const Matrix& a);

/// Determinant by Gaussian elimination with partial pivoting.
double determinant(Matrix a);

/// Solves a x = b by LU with partial pivoting. Empty when a pivot is exactly zero.
std::optional<std::vector<double>> solve(Matrix a, std::span<const double> b);

/// Numerical rank by elimination with complete pivoting. Elimination stops
/// when the pivot falls below `relative_threshold` times the largest entry of
/// the input.
int numerical_rank(Matrix a, double relative_threshold);

/// Minimum-norm least-squares solution of a x = b. Singular values below
/// `relative_threshold` times the largest are treated as zero.
std::vector<double> min_norm_least_squares(const Matrix& a, std::span<const double> b,
                                           double relative_threshold);

}  // namespace firstint
