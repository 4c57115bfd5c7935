#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "firstint/expr.hpp"
#include "firstint/linalg.hpp"

namespace firstint {

/// N functions f_1..f_N on a 2N-dimensional phase space, sharing one
/// parameter binding table.
class IntegralSet {
 public:
  IntegralSet(PhaseSpace space, std::vector<Expression> functions, Bindings bindings,
              std::vector<std::string> names = {});

  const PhaseSpace& space() const noexcept { return space_; }
  int size() const noexcept { return space_.n(); }
  const Expression& function(int i) const { return functions_.at(i); }
  const std::vector<Expression>& functions() const noexcept { return functions_; }
  const std::string& name(int i) const { return names_.at(i); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const Bindings& bindings() const noexcept { return bindings_; }
  const CompiledFunction& compiled(int i) const { return compiled_.at(i); }

  std::vector<double> values(std::span<const double> point) const;
  /// N x 2N matrix of gradients, row i = grad f_i.
  Matrix jacobian(std::span<const double> point) const;

 private:
  PhaseSpace space_;
  std::vector<Expression> functions_;
  Bindings bindings_;
  std::vector<std::string> names_;
  std::vector<CompiledFunction> compiled_;
};

/// One slot of a determinant bracket {h_1,...,h_2N}*.
class Slot {
 public:
  static Slot function(Expression f) { return Slot(std::move(f)); }
  static Slot coordinate(int index) { return Slot(index); }

  bool is_coordinate() const noexcept { return std::holds_alternative<int>(value_); }
  int coordinate_index() const { return std::get<int>(value_); }
  const Expression& expression() const { return std::get<Expression>(value_); }

 private:
  explicit Slot(Expression f) : value_(std::move(f)) {}
  explicit Slot(int index) : value_(index) {}
  std::variant<Expression, int> value_;
};

using SlotList = std::vector<Slot>;

/// Row of a bracket determinant: row `index` of a gradient matrix, or the unit
/// row of coordinate `index`.
struct BracketRow {
  bool unit = false;
  int index = 0;

  static BracketRow gradient_row(int i) { return {false, i}; }
  static BracketRow unit_row(int coordinate) { return {true, coordinate}; }
};

/// Determinant value with its Hadamard scale (product of row norms of the
/// full 2N x 2N matrix).
struct BracketValue {
  double value = 0.0;
  double scale = 1.0;

  double relative() const { return scale > 0.0 ? value / scale : 0.0; }
  bool vanishes(double threshold) const;
};

/// Determinant of the rows described by `rows`. Unit rows are eliminated
/// exactly, the remaining minor goes through partial-pivoting elimination.
BracketValue bracket_star(const Matrix& gradients, std::span<const BracketRow> rows);

double bracket_star(const SlotList& slots, std::span<const double> point, const Bindings& bindings);

/// {a,b} = sum_j (da/dx_j db/dy_j - da/dy_j db/dx_j)
double poisson(std::span<const double> grad_a, std::span<const double> grad_b);
double poisson(const Expression& a, const Expression& b, std::span<const double> point,
               const Bindings& bindings);
/// sum_j |da/dx_j db/dy_j| + |da/dy_j db/dx_j|, the rounding scale of poisson().
double poisson_scale(std::span<const double> grad_a, std::span<const double> grad_b);

// The regularity brackets. Index arguments are 0-based.

/// {f_1..f_N, x_1..x_N}*
BracketValue s_zero(const Matrix& jacobian);
double s_zero(const IntegralSet& fs, std::span<const double> point);

/// {f_1..f_N, x_1..x_{N-1}, y_1}*
BracketValue s_n(const Matrix& jacobian);
double s_n(const IntegralSet& fs, std::span<const double> point);

/// {f_1..f_{j-1}, y_k, f_{j+1}..f_N, x_1..x_N}*, the (j,k) cofactor of df/dy
/// up to the sign shared with s_zero.
BracketValue cofactor_bracket(const Matrix& jacobian, int j, int k);
double cofactor_bracket(const IntegralSet& fs, int j, int k, std::span<const double> point);

/// {f_1..f_N, x_1..x_{N-1}, y_k}*. When s_zero vanishes the vector over k is a
/// right null vector of df/dy; its first component is s_n.
BracketValue kernel_bracket(const Matrix& jacobian, int k);
double kernel_bracket(const IntegralSet& fs, int k, std::span<const double> point);

/// Matrix of pairwise Poisson brackets, exactly antisymmetric.
Matrix involution_matrix(const Matrix& jacobian);
Matrix involution_matrix(const IntegralSet& fs, std::span<const double> point);

inline constexpr double kDefaultRankThreshold = 1e-10;

int independence_rank(const Matrix& jacobian, double relative_threshold = kDefaultRankThreshold);
int independence_rank(const IntegralSet& fs, std::span<const double> point,
                      double relative_threshold = kDefaultRankThreshold);

/// The N x N blocks df/dx and df/dy of an N x 2N Jacobian.
Matrix position_block(const Matrix& jacobian);
Matrix momentum_block(const Matrix& jacobian);

}  // namespace firstint
