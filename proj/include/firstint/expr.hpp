#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace firstint {

inline constexpr int kMaxDegreesOfFreedom = 16;

/// Phase space R^{2N} with coordinates ordered (x1..xN, y1..yN).
/// x_k has index k-1 and y_k has index N+k-1.
class PhaseSpace {
 public:
  explicit PhaseSpace(int n);

  int n() const noexcept { return n_; }
  int dimension() const noexcept { return 2 * n_; }

  /// 0-based index of x_{k+1} / y_{k+1}.
  int x(int k) const noexcept { return k; }
  int y(int k) const noexcept { return n_ + k; }

  std::optional<int> index_of(std::string_view name) const;
  std::string variable_name(int index) const;

  bool operator==(const PhaseSpace&) const = default;

 private:
  int n_;
};

using Bindings = std::map<std::string, double, std::less<>>;
using ParameterNames = std::set<std::string, std::less<>>;

enum class NodeKind {
  Constant,
  Variable,
  Parameter,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Neg,
  Sqrt,
  Exp,
  Log,
  Sin,
  Cos,
};

bool is_function(NodeKind kind) noexcept;
std::string_view function_name(NodeKind kind);

/// Immutable expression tree over the phase variables and named parameters.
/// Copies share structure.
class Expression {
 public:
  /// The constant 0.
  Expression();

  /// Negative values are stored as Neg(Constant(|v|)) so every tree prints
  /// and re-parses to itself.
  static Expression constant(double value);
  static Expression variable(const PhaseSpace& space, int index);
  static Expression parameter(std::string name);
  static Expression power(Expression base, int exponent);
  static Expression apply(NodeKind function, Expression argument);

  friend Expression operator+(Expression a, Expression b);
  friend Expression operator-(Expression a, Expression b);
  friend Expression operator*(Expression a, Expression b);
  friend Expression operator/(Expression a, Expression b);
  friend Expression operator-(Expression a);

  NodeKind kind() const noexcept;
  double constant_value() const noexcept;
  int variable_index() const noexcept;
  int exponent() const noexcept;
  /// Parameter name, or the variable name for Variable nodes.
  const std::string& name() const noexcept;
  std::size_t arity() const noexcept;
  Expression operand(std::size_t i) const;

  /// Structural identity; constants compare by exact value.
  bool operator==(const Expression& other) const;

  std::size_t node_count() const;
  std::size_t depth() const;
  ParameterNames parameters() const;

 private:
  struct Node;
  explicit Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  static Expression binary(NodeKind kind, Expression a, Expression b);

  std::shared_ptr<const Node> node_;
};

Expression parse(std::string_view text, const PhaseSpace& space,
                 const ParameterNames& parameters = {});

/// Fully parenthesized canonical infix. parse(to_text(e)) == e.
std::string to_text(const Expression& e);

/// Expression flattened to a postfix tape with parameters resolved, for
/// repeated evaluation. Value and gradient are computed in one forward pass
/// carrying all 2N directional derivatives.
class CompiledFunction {
 public:
  CompiledFunction(const Expression& e, const Bindings& bindings, int dimension);

  int dimension() const noexcept { return dimension_; }
  double value(std::span<const double> point) const;
  /// Writes the gradient into `gradient` (length dimension()) and returns the value.
  double value_and_gradient(std::span<const double> point, std::span<double> gradient) const;

 private:
  struct Instruction {
    NodeKind kind;
    int lhs = -1;
    int rhs = -1;
    int integer = 0;
    double constant = 0.0;
  };
  void check_point(std::span<const double> point) const;

  std::vector<Instruction> tape_;
  int dimension_;
};

double evaluate(const Expression& e, std::span<const double> point, const Bindings& bindings);

enum class GradientMode { Automatic, FiniteDifference };

inline constexpr double kDefaultDifferenceStep = 1e-6;

/// Gradient in the fixed coordinate order. Finite-difference mode uses
/// central differences with step h*max(1,|v|).
std::vector<double> gradient(const Expression& e, std::span<const double> point,
                             const Bindings& bindings,
                             GradientMode mode = GradientMode::Automatic,
                             double h = kDefaultDifferenceStep);

}  // namespace firstint
