#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "firstint/linalg.hpp"

namespace testing {

inline std::vector<double> uniform_point(std::mt19937_64& rng, int dimension, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> p(dimension);
  for (double& v : p) v = u(rng);
  return p;
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// max |a - b| / max(max |b|, tiny)
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
  const double mag = max_abs(b);
  return mag > 0.0 ? diff / mag : diff;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot / (firstint::norm(a) * firstint::norm(b));
}

}  // namespace testing
