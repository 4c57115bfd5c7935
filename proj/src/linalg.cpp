#include "firstint/linalg.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <utility>

#include "firstint/errors.hpp"

namespace firstint {

void Matrix::swap_rows(std::size_t a, std::size_t b) {
  if (a == b) return;
  for (std::size_t c = 0; c < cols_; ++c) std::swap((*this)(a, c), (*this)(b, c));
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (double x : a.row(r)) s += x * x;
  }
  return std::sqrt(s);
}

std::vector<double> multiply(const Matrix& a, std::span<const double> v) {
  if (v.size() != a.cols()) throw ValidationError("matrix-vector size mismatch");
  std::vector<double> out(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) s += a(r, c) * v[c];
    out[r] = s;
  }
  return out;
}

double hadamard_bound(const Matrix& a) {
  double p = 1.0;
  for (std::size_t r = 0; r < a.rows(); ++r) p *= norm(a.row(r));
  return p;
}

double determinant(Matrix a) {
  if (a.rows() != a.cols()) throw ValidationError("determinant of a non-square matrix");
  const std::size_t n = a.rows();
  double det = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    for (std::size_t r = k + 1; r < n; ++r) {
      if (std::abs(a(r, k)) > std::abs(a(pivot, k))) pivot = r;
    }
    if (a(pivot, k) == 0.0) return 0.0;
    if (pivot != k) {
      a.swap_rows(pivot, k);
      det = -det;
    }
    const double p = a(k, k);
    det *= p;
    for (std::size_t r = k + 1; r < n; ++r) {
      const double factor = a(r, k) / p;
      if (factor == 0.0) continue;
      for (std::size_t c = k + 1; c < n; ++c) a(r, c) -= factor * a(k, c);
    }
  }
  return det;
}

std::optional<std::vector<double>> solve(Matrix a, std::span<const double> b) {
  if (a.rows() != a.cols() || b.size() != a.rows()) {
    throw ValidationError("solve: dimension mismatch");
  }
  const std::size_t n = a.rows();
  std::vector<double> x(b.begin(), b.end());
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    for (std::size_t r = k + 1; r < n; ++r) {
      if (std::abs(a(r, k)) > std::abs(a(pivot, k))) pivot = r;
    }
    if (a(pivot, k) == 0.0) return std::nullopt;
    a.swap_rows(pivot, k);
    std::swap(x[pivot], x[k]);
    for (std::size_t r = k + 1; r < n; ++r) {
      const double factor = a(r, k) / a(k, k);
      for (std::size_t c = k + 1; c < n; ++c) a(r, c) -= factor * a(k, c);
      x[r] -= factor * x[k];
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    double s = x[k];
    for (std::size_t c = k + 1; c < n; ++c) s -= a(k, c) * x[c];
    x[k] = s / a(k, k);
  }
  return x;
}

int numerical_rank(Matrix a, double relative_threshold) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  double largest = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    for (double v : a.row(r)) largest = std::max(largest, std::abs(v));
  }
  if (largest == 0.0) return 0;
  const double floor = relative_threshold * largest;
  std::vector<std::size_t> col(n);
  for (std::size_t c = 0; c < n; ++c) col[c] = c;
  int rank = 0;
  for (std::size_t k = 0; k < std::min(m, n); ++k) {
    std::size_t pr = k;
    std::size_t pc = k;
    double best = 0.0;
    for (std::size_t r = k; r < m; ++r) {
      for (std::size_t c = k; c < n; ++c) {
        const double v = std::abs(a(r, col[c]));
        if (v > best) {
          best = v;
          pr = r;
          pc = c;
        }
      }
    }
    if (best <= floor) break;
    a.swap_rows(pr, k);
    std::swap(col[pc], col[k]);
    const double p = a(k, col[k]);
    for (std::size_t r = k + 1; r < m; ++r) {
      const double factor = a(r, col[k]) / p;
      for (std::size_t c = k; c < n; ++c) a(r, col[c]) -= factor * a(k, col[c]);
    }
    ++rank;
  }
  return rank;
}

std::vector<double> min_norm_least_squares(const Matrix& a, std::span<const double> b,
                                           double relative_threshold) {
  if (b.size() != a.rows()) throw ValidationError("least squares: dimension mismatch");
  Eigen::MatrixXd m(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) m(r, c) = a(r, c);
  }
  Eigen::VectorXd rhs(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) rhs(i) = b[i];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(relative_threshold);
  const Eigen::VectorXd x = svd.solve(rhs);
  return {x.data(), x.data() + x.size()};
}

}  // namespace firstint
