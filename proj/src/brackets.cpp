#include "firstint/brackets.hpp"

#include <algorithm>
#include <cmath>

#include "firstint/errors.hpp"

namespace firstint {

IntegralSet::IntegralSet(PhaseSpace space, std::vector<Expression> functions, Bindings bindings,
                         std::vector<std::string> names)
    : space_(space),
      functions_(std::move(functions)),
      bindings_(std::move(bindings)),
      names_(std::move(names)) {
  if (static_cast<int>(functions_.size()) != space_.n()) {
    throw ValidationError("expected " + std::to_string(space_.n()) + " integrals, got " +
                          std::to_string(functions_.size()));
  }
  if (names_.empty()) {
    for (int i = 0; i < space_.n(); ++i) names_.push_back("f" + std::to_string(i + 1));
  }
  if (names_.size() != functions_.size()) throw ValidationError("one name per integral required");
  compiled_.reserve(functions_.size());
  for (const Expression& f : functions_) compiled_.emplace_back(f, bindings_, space_.dimension());
}

std::vector<double> IntegralSet::values(std::span<const double> point) const {
  std::vector<double> out;
  out.reserve(compiled_.size());
  for (const CompiledFunction& f : compiled_) out.push_back(f.value(point));
  return out;
}

Matrix IntegralSet::jacobian(std::span<const double> point) const {
  Matrix j(compiled_.size(), static_cast<std::size_t>(space_.dimension()));
  for (std::size_t i = 0; i < compiled_.size(); ++i) compiled_[i].value_and_gradient(point, j.row(i));
  return j;
}

bool BracketValue::vanishes(double threshold) const {
  return std::abs(value) <= threshold * scale;
}

namespace {

int permutation_sign(const std::vector<int>& sequence) {
  int inversions = 0;
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    for (std::size_t j = i + 1; j < sequence.size(); ++j) {
      if (sequence[i] > sequence[j]) ++inversions;
    }
  }
  return inversions % 2 == 0 ? 1 : -1;
}

}  // namespace

BracketValue bracket_star(const Matrix& gradients, std::span<const BracketRow> rows) {
  const int dim = static_cast<int>(gradients.cols());
  if (static_cast<int>(rows.size()) != dim) {
    throw ValidationError("a bracket needs exactly " + std::to_string(dim) + " slots");
  }
  std::vector<int> fun_positions;
  std::vector<int> unit_positions;
  std::vector<int> unit_columns;
  std::vector<bool> covered(dim, false);
  bool repeated_unit = false;
  BracketValue result;
  for (int pos = 0; pos < dim; ++pos) {
    const BracketRow& r = rows[pos];
    if (r.unit) {
      if (r.index < 0 || r.index >= dim) throw ValidationError("coordinate slot out of range");
      if (covered[r.index]) repeated_unit = true;
      covered[r.index] = true;
      unit_positions.push_back(pos);
      unit_columns.push_back(r.index);
    } else {
      if (r.index < 0 || r.index >= static_cast<int>(gradients.rows())) {
        throw ValidationError("function slot out of range");
      }
      fun_positions.push_back(pos);
      result.scale *= norm(gradients.row(r.index));
    }
  }
  if (repeated_unit) {
    result.value = 0.0;
    return result;
  }

  std::vector<int> free_columns;
  for (int c = 0; c < dim; ++c) {
    if (!covered[c]) free_columns.push_back(c);
  }
  Matrix minor(fun_positions.size(), free_columns.size());
  for (std::size_t i = 0; i < fun_positions.size(); ++i) {
    const auto g = gradients.row(rows[fun_positions[i]].index);
    for (std::size_t c = 0; c < free_columns.size(); ++c) minor(i, c) = g[free_columns[c]];
  }

  // Move unit rows to the bottom and their columns to the right, in matching
  // order; the matrix becomes [[minor, *], [0, I]].
  std::vector<int> row_order = fun_positions;
  row_order.insert(row_order.end(), unit_positions.begin(), unit_positions.end());
  std::vector<int> col_order = free_columns;
  col_order.insert(col_order.end(), unit_columns.begin(), unit_columns.end());
  const int sign = permutation_sign(row_order) * permutation_sign(col_order);

  result.value = minor.rows() == 0 ? double(sign) : sign * determinant(std::move(minor));
  return result;
}

double bracket_star(const SlotList& slots, std::span<const double> point, const Bindings& bindings) {
  const int dim = static_cast<int>(point.size());
  std::vector<BracketRow> rows;
  std::size_t functions = 0;
  for (const Slot& s : slots) functions += s.is_coordinate() ? 0 : 1;
  Matrix gradients(functions, point.size());
  std::size_t next = 0;
  for (const Slot& s : slots) {
    if (s.is_coordinate()) {
      rows.push_back(BracketRow::unit_row(s.coordinate_index()));
    } else {
      CompiledFunction(s.expression(), bindings, dim).value_and_gradient(point, gradients.row(next));
      rows.push_back(BracketRow::gradient_row(static_cast<int>(next)));
      ++next;
    }
  }
  return bracket_star(gradients, rows).value;
}

double poisson(std::span<const double> grad_a, std::span<const double> grad_b) {
  const std::size_t n = grad_a.size() / 2;
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    s += grad_a[j] * grad_b[n + j] - grad_a[n + j] * grad_b[j];
  }
  return s;
}

double poisson_scale(std::span<const double> grad_a, std::span<const double> grad_b) {
  const std::size_t n = grad_a.size() / 2;
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    s += std::abs(grad_a[j] * grad_b[n + j]) + std::abs(grad_a[n + j] * grad_b[j]);
  }
  return s;
}

double poisson(const Expression& a, const Expression& b, std::span<const double> point,
               const Bindings& bindings) {
  if (point.size() % 2 != 0) throw ValidationError("phase-space point must have even length");
  const auto ga = gradient(a, point, bindings);
  const auto gb = gradient(b, point, bindings);
  return poisson(ga, gb);
}

namespace {

int degrees_of_freedom(const Matrix& jacobian) {
  const int n = static_cast<int>(jacobian.rows());
  if (static_cast<int>(jacobian.cols()) != 2 * n) {
    throw ValidationError("jacobian must be N x 2N");
  }
  return n;
}

std::vector<BracketRow> integral_rows(int n) {
  std::vector<BracketRow> rows;
  rows.reserve(2 * n);
  for (int i = 0; i < n; ++i) rows.push_back(BracketRow::gradient_row(i));
  for (int i = 0; i < n; ++i) rows.push_back(BracketRow::unit_row(i));
  return rows;
}

void check_index(int i, int n) {
  if (i < 0 || i >= n) throw ValidationError("bracket index out of range");
}

}  // namespace

BracketValue s_zero(const Matrix& jacobian) {
  const int n = degrees_of_freedom(jacobian);
  return bracket_star(jacobian, integral_rows(n));
}

double s_zero(const IntegralSet& fs, std::span<const double> point) {
  return s_zero(fs.jacobian(point)).value;
}

BracketValue s_n(const Matrix& jacobian) { return kernel_bracket(jacobian, 0); }

double s_n(const IntegralSet& fs, std::span<const double> point) {
  return s_n(fs.jacobian(point)).value;
}

BracketValue cofactor_bracket(const Matrix& jacobian, int j, int k) {
  const int n = degrees_of_freedom(jacobian);
  check_index(j, n);
  check_index(k, n);
  auto rows = integral_rows(n);
  rows[j] = BracketRow::unit_row(n + k);
  return bracket_star(jacobian, rows);
}

double cofactor_bracket(const IntegralSet& fs, int j, int k, std::span<const double> point) {
  return cofactor_bracket(fs.jacobian(point), j, k).value;
}

BracketValue kernel_bracket(const Matrix& jacobian, int k) {
  const int n = degrees_of_freedom(jacobian);
  check_index(k, n);
  auto rows = integral_rows(n);
  rows[2 * n - 1] = BracketRow::unit_row(n + k);
  return bracket_star(jacobian, rows);
}

double kernel_bracket(const IntegralSet& fs, int k, std::span<const double> point) {
  return kernel_bracket(fs.jacobian(point), k).value;
}

Matrix involution_matrix(const Matrix& jacobian) {
  const int n = degrees_of_freedom(jacobian);
  Matrix p(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      p(i, j) = poisson(jacobian.row(i), jacobian.row(j));
      p(j, i) = -p(i, j);
    }
  }
  return p;
}

Matrix involution_matrix(const IntegralSet& fs, std::span<const double> point) {
  return involution_matrix(fs.jacobian(point));
}

int independence_rank(const Matrix& jacobian, double relative_threshold) {
  return numerical_rank(jacobian, relative_threshold);
}

int independence_rank(const IntegralSet& fs, std::span<const double> point,
                      double relative_threshold) {
  return numerical_rank(fs.jacobian(point), relative_threshold);
}

Matrix position_block(const Matrix& jacobian) {
  const int n = degrees_of_freedom(jacobian);
  Matrix b(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) b(r, c) = jacobian(r, c);
  }
  return b;
}

Matrix momentum_block(const Matrix& jacobian) {
  const int n = degrees_of_freedom(jacobian);
  Matrix b(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) b(r, c) = jacobian(r, n + c);
  }
  return b;
}

}  // namespace firstint
