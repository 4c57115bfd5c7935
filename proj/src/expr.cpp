#include "firstint/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cctype>

#include "firstint/errors.hpp"

namespace firstint {

// ---------------------------------------------------------------------------
// PhaseSpace

PhaseSpace::PhaseSpace(int n) : n_(n) {
  if (n < 1 || n > kMaxDegreesOfFreedom) {
    throw ValidationError("degrees of freedom must lie in [1, " +
                          std::to_string(kMaxDegreesOfFreedom) + "], got " +
                          std::to_string(n));
  }
}

std::optional<int> PhaseSpace::index_of(std::string_view name) const {
  if (name.size() < 2 || (name[0] != 'x' && name[0] != 'y')) return std::nullopt;
  // Reject leading zeros so that names are canonical.
  if (name[1] == '0') return std::nullopt;
  int k = 0;
  auto [end, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
  if (ec != std::errc{} || end != name.data() + name.size()) return std::nullopt;
  if (k < 1 || k > n_) return std::nullopt;
  return name[0] == 'x' ? x(k - 1) : y(k - 1);
}

std::string PhaseSpace::variable_name(int index) const {
  if (index < 0 || index >= dimension()) {
    throw ValidationError("variable index " + std::to_string(index) + " out of range");
  }
  return index < n_ ? "x" + std::to_string(index + 1) : "y" + std::to_string(index - n_ + 1);
}

// ---------------------------------------------------------------------------
// Expression

struct Expression::Node {
  NodeKind kind = NodeKind::Constant;
  double value = 0.0;
  int integer = 0;  // variable index or exponent
  std::string name;
  std::shared_ptr<const Node> a;
  std::shared_ptr<const Node> b;
};

bool is_function(NodeKind kind) noexcept {
  switch (kind) {
    case NodeKind::Sqrt:
    case NodeKind::Exp:
    case NodeKind::Log:
    case NodeKind::Sin:
    case NodeKind::Cos:
      return true;
    default:
      return false;
  }
}

std::string_view function_name(NodeKind kind) {
  switch (kind) {
    case NodeKind::Sqrt: return "sqrt";
    case NodeKind::Exp: return "exp";
    case NodeKind::Log: return "log";
    case NodeKind::Sin: return "sin";
    case NodeKind::Cos: return "cos";
    default: throw ValidationError("not a unary function node");
  }
}

Expression::Expression() : Expression(constant(0.0)) {}

Expression Expression::constant(double value) {
  if (!std::isfinite(value)) throw ValidationError("constant must be finite");
  if (std::signbit(value)) {
    // -0.0 also lands here; Neg(0) keeps the sign bit through evaluation.
    return -constant(-value);
  }
  auto node = std::make_shared<Node>();
  node->kind = NodeKind::Constant;
  node->value = value;
  return Expression(std::move(node));
}

Expression Expression::variable(const PhaseSpace& space, int index) {
  auto node = std::make_shared<Node>();
  node->kind = NodeKind::Variable;
  node->name = space.variable_name(index);
  node->integer = index;
  return Expression(std::move(node));
}

Expression Expression::parameter(std::string name) {
  if (name.empty()) throw ValidationError("empty parameter name");
  auto node = std::make_shared<Node>();
  node->kind = NodeKind::Parameter;
  node->name = std::move(name);
  return Expression(std::move(node));
}

Expression Expression::power(Expression base, int exponent) {
  auto node = std::make_shared<Node>();
  node->kind = NodeKind::Pow;
  node->integer = exponent;
  node->a = std::move(base.node_);
  return Expression(std::move(node));
}

Expression Expression::apply(NodeKind function, Expression argument) {
  if (!is_function(function) && function != NodeKind::Neg) {
    throw ValidationError("apply() expects a unary node kind");
  }
  auto node = std::make_shared<Node>();
  node->kind = function;
  node->a = std::move(argument.node_);
  return Expression(std::move(node));
}

Expression Expression::binary(NodeKind kind, Expression a, Expression b) {
  auto node = std::make_shared<Node>();
  node->kind = kind;
  node->a = std::move(a.node_);
  node->b = std::move(b.node_);
  return Expression(std::move(node));
}

Expression operator+(Expression a, Expression b) {
  return Expression::binary(NodeKind::Add, std::move(a), std::move(b));
}
Expression operator-(Expression a, Expression b) {
  return Expression::binary(NodeKind::Sub, std::move(a), std::move(b));
}
Expression operator*(Expression a, Expression b) {
  return Expression::binary(NodeKind::Mul, std::move(a), std::move(b));
}
Expression operator/(Expression a, Expression b) {
  return Expression::binary(NodeKind::Div, std::move(a), std::move(b));
}
Expression operator-(Expression a) { return Expression::apply(NodeKind::Neg, std::move(a)); }

NodeKind Expression::kind() const noexcept { return node_->kind; }
double Expression::constant_value() const noexcept { return node_->value; }
int Expression::variable_index() const noexcept { return node_->integer; }
int Expression::exponent() const noexcept { return node_->integer; }
const std::string& Expression::name() const noexcept { return node_->name; }

std::size_t Expression::arity() const noexcept {
  return node_->b ? 2 : (node_->a ? 1 : 0);
}

Expression Expression::operand(std::size_t i) const {
  if (i >= arity()) throw ValidationError("operand index out of range");
  return Expression(i == 0 ? node_->a : node_->b);
}

bool Expression::operator==(const Expression& other) const {
  if (node_ == other.node_) return true;
  const Node& a = *node_;
  const Node& b = *other.node_;
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case NodeKind::Constant:
      return a.value == b.value && std::signbit(a.value) == std::signbit(b.value);
    case NodeKind::Variable:
      return a.integer == b.integer && a.name == b.name;
    case NodeKind::Parameter:
      return a.name == b.name;
    case NodeKind::Pow:
      if (a.integer != b.integer) return false;
      break;
    default:
      break;
  }
  if (arity() != other.arity()) return false;
  for (std::size_t i = 0; i < arity(); ++i) {
    if (!(operand(i) == other.operand(i))) return false;
  }
  return true;
}

std::size_t Expression::node_count() const {
  std::size_t count = 1;
  for (std::size_t i = 0; i < arity(); ++i) count += operand(i).node_count();
  return count;
}

std::size_t Expression::depth() const {
  std::size_t d = 0;
  for (std::size_t i = 0; i < arity(); ++i) d = std::max(d, operand(i).depth());
  return d + 1;
}

ParameterNames Expression::parameters() const {
  ParameterNames names;
  std::function<void(const Expression&)> walk = [&](const Expression& e) {
    if (e.kind() == NodeKind::Parameter) names.insert(e.name());
    for (std::size_t i = 0; i < e.arity(); ++i) walk(e.operand(i));
  };
  walk(*this);
  return names;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
 public:
  Parser(std::string_view text, const PhaseSpace& space, const ParameterNames& parameters)
      : text_(text), space_(space), parameters_(parameters) {}

  Expression run() {
    Expression e = expr();
    skip_space();
    if (pos_ != text_.size()) fail("end of input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& expected) const {
    std::string found = pos_ < text_.size() ? "'" + std::string(1, text_[pos_]) + "'" : "end of input";
    throw SyntaxError(pos_, "expected " + expected + ", found " + found);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("'") + c + "'");
  }

  Expression expr() {
    Expression lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = lhs + term();
      } else if (accept('-')) {
        lhs = lhs - term();
      } else {
        return lhs;
      }
    }
  }

  Expression term() {
    Expression lhs = factor();
    for (;;) {
      if (accept('*')) {
        lhs = lhs * factor();
      } else if (accept('/')) {
        lhs = lhs / factor();
      } else {
        return lhs;
      }
    }
  }

  Expression factor() {
    if (accept('-')) return -power();
    return power();
  }

  Expression power() {
    Expression base = atom();
    if (!accept('^')) return base;
    skip_space();
    const std::size_t start = pos_;
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) ++pos_;
    const std::size_t digits = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == digits) fail("integer exponent");
    int exponent = 0;
    const char* first = text_.data() + start + (text_[start] == '+' ? 1 : 0);
    auto [end, ec] = std::from_chars(first, text_.data() + pos_, exponent);
    if (ec != std::errc{} || end != text_.data() + pos_) {
      pos_ = start;
      fail("integer exponent in range");
    }
    return Expression::power(std::move(base), exponent);
  }

  Expression atom() {
    skip_space();
    if (pos_ >= text_.size()) fail("operand");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expression inner = expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail("operand");
  }

  Expression number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
        ++n;
      }
      return n;
    };
    std::size_t mantissa = digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) fail("digits");
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (digits() == 0) fail("exponent digits");
    }
    const std::string literal(text_.substr(start, pos_ - start));
    const double value = std::strtod(literal.c_str(), nullptr);
    if (!std::isfinite(value)) {
      pos_ = start;
      fail("finite number");
    }
    return Expression::constant(value);
  }

  Expression identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view name = text_.substr(start, pos_ - start);
    static const std::pair<std::string_view, NodeKind> kFunctions[] = {
        {"sqrt", NodeKind::Sqrt}, {"exp", NodeKind::Exp}, {"log", NodeKind::Log},
        {"sin", NodeKind::Sin},   {"cos", NodeKind::Cos},
    };
    for (const auto& [fname, kind] : kFunctions) {
      if (name == fname) {
        expect('(');
        Expression argument = expr();
        expect(')');
        return Expression::apply(kind, std::move(argument));
      }
    }
    if (auto index = space_.index_of(name)) return Expression::variable(space_, *index);
    if (parameters_.contains(name)) return Expression::parameter(std::string(name));
    throw UnknownVariable(std::string(name));
  }

  std::string_view text_;
  const PhaseSpace& space_;
  const ParameterNames& parameters_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression parse(std::string_view text, const PhaseSpace& space, const ParameterNames& parameters) {
  return Parser(text, space, parameters).run();
}

// ---------------------------------------------------------------------------
// Printer

namespace {

std::string format_constant(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void print(const Expression& e, std::string& out) {
  switch (e.kind()) {
    case NodeKind::Constant:
      out += format_constant(e.constant_value());
      return;
    case NodeKind::Variable:
    case NodeKind::Parameter:
      out += e.name();
      return;
    case NodeKind::Add:
    case NodeKind::Sub:
    case NodeKind::Mul:
    case NodeKind::Div: {
      static constexpr const char* kOps[] = {" + ", " - ", " * ", " / "};
      const int op = static_cast<int>(e.kind()) - static_cast<int>(NodeKind::Add);
      out += '(';
      print(e.operand(0), out);
      out += kOps[op];
      print(e.operand(1), out);
      out += ')';
      return;
    }
    case NodeKind::Pow:
      out += '(';
      print(e.operand(0), out);
      out += '^';
      out += std::to_string(e.exponent());
      out += ')';
      return;
    case NodeKind::Neg:
      out += "(-";
      print(e.operand(0), out);
      out += ')';
      return;
    default:
      out += function_name(e.kind());
      out += '(';
      print(e.operand(0), out);
      out += ')';
      return;
  }
}

}  // namespace

std::string to_text(const Expression& e) {
  std::string out;
  print(e, out);
  return out;
}

// ---------------------------------------------------------------------------
// CompiledFunction

namespace {

double ipow(double base, int exponent) {
  if (exponent < 0) {
    if (base == 0.0) throw NonFinite("zero raised to a negative power");
    return 1.0 / ipow(base, -exponent);
  }
  double result = 1.0;
  unsigned e = static_cast<unsigned>(exponent);
  while (e != 0) {
    if (e & 1u) result *= base;
    base *= base;
    e >>= 1u;
  }
  return result;
}

}  // namespace

CompiledFunction::CompiledFunction(const Expression& e, const Bindings& bindings, int dimension)
    : dimension_(dimension) {
  std::function<int(const Expression&)> emit = [&](const Expression& node) -> int {
    Instruction ins{node.kind()};
    switch (node.kind()) {
      case NodeKind::Constant:
        ins.constant = node.constant_value();
        break;
      case NodeKind::Variable:
        if (node.variable_index() >= dimension) {
          throw ValidationError("variable " + node.name() + " outside a phase space of dimension " +
                                std::to_string(dimension));
        }
        ins.integer = node.variable_index();
        break;
      case NodeKind::Parameter: {
        auto it = bindings.find(node.name());
        if (it == bindings.end()) throw ValidationError("unbound parameter '" + node.name() + "'");
        ins.kind = NodeKind::Constant;
        ins.constant = it->second;
        break;
      }
      case NodeKind::Pow:
        ins.integer = node.exponent();
        ins.lhs = emit(node.operand(0));
        break;
      default:
        ins.lhs = emit(node.operand(0));
        if (node.arity() == 2) ins.rhs = emit(node.operand(1));
        break;
    }
    tape_.push_back(ins);
    return static_cast<int>(tape_.size()) - 1;
  };
  emit(e);
}

void CompiledFunction::check_point(std::span<const double> point) const {
  if (point.size() != static_cast<std::size_t>(dimension_)) {
    throw ValidationError("point has " + std::to_string(point.size()) + " coordinates, expected " +
                          std::to_string(dimension_));
  }
}

double CompiledFunction::value(std::span<const double> point) const {
  check_point(point);
  std::vector<double> v(tape_.size());
  for (std::size_t i = 0; i < tape_.size(); ++i) {
    const Instruction& ins = tape_[i];
    const double a = ins.lhs >= 0 ? v[ins.lhs] : 0.0;
    const double b = ins.rhs >= 0 ? v[ins.rhs] : 0.0;
    double r = 0.0;
    switch (ins.kind) {
      case NodeKind::Constant: r = ins.constant; break;
      case NodeKind::Variable: r = point[ins.integer]; break;
      case NodeKind::Add: r = a + b; break;
      case NodeKind::Sub: r = a - b; break;
      case NodeKind::Mul: r = a * b; break;
      case NodeKind::Div:
        if (b == 0.0) throw NonFinite("division by zero");
        r = a / b;
        break;
      case NodeKind::Pow: r = ipow(a, ins.integer); break;
      case NodeKind::Neg: r = -a; break;
      case NodeKind::Sqrt:
        if (a < 0.0) throw NonFinite("sqrt of a negative value");
        r = std::sqrt(a);
        break;
      case NodeKind::Exp: r = std::exp(a); break;
      case NodeKind::Log:
        if (a <= 0.0) throw NonFinite("log of a non-positive value");
        r = std::log(a);
        break;
      case NodeKind::Sin: r = std::sin(a); break;
      case NodeKind::Cos: r = std::cos(a); break;
      case NodeKind::Parameter: break;  // resolved at compile time
    }
    if (!std::isfinite(r)) throw NonFinite("non-finite intermediate value");
    v[i] = r;
  }
  return v.back();
}

double CompiledFunction::value_and_gradient(std::span<const double> point,
                                            std::span<double> gradient) const {
  check_point(point);
  if (gradient.size() != static_cast<std::size_t>(dimension_)) {
    throw ValidationError("gradient buffer has the wrong length");
  }
  const std::size_t d = static_cast<std::size_t>(dimension_);
  std::vector<double> v(tape_.size());
  std::vector<double> dv(tape_.size() * d, 0.0);
  for (std::size_t i = 0; i < tape_.size(); ++i) {
    const Instruction& ins = tape_[i];
    const double a = ins.lhs >= 0 ? v[ins.lhs] : 0.0;
    const double b = ins.rhs >= 0 ? v[ins.rhs] : 0.0;
    const double* da = ins.lhs >= 0 ? &dv[ins.lhs * d] : nullptr;
    const double* db = ins.rhs >= 0 ? &dv[ins.rhs * d] : nullptr;
    double* out = &dv[i * d];
    double r = 0.0;
    // out = ca * da (+ cb * db)
    double ca = 0.0;
    double cb = 0.0;
    switch (ins.kind) {
      case NodeKind::Constant:
        r = ins.constant;
        break;
      case NodeKind::Variable:
        r = point[ins.integer];
        out[ins.integer] = 1.0;
        break;
      case NodeKind::Add: r = a + b; ca = 1.0; cb = 1.0; break;
      case NodeKind::Sub: r = a - b; ca = 1.0; cb = -1.0; break;
      case NodeKind::Mul: r = a * b; ca = b; cb = a; break;
      case NodeKind::Div:
        if (b == 0.0) throw NonFinite("division by zero");
        r = a / b;
        ca = 1.0 / b;
        cb = -r / b;
        break;
      case NodeKind::Pow:
        r = ipow(a, ins.integer);
        ca = ins.integer == 0 ? 0.0 : ins.integer * ipow(a, ins.integer - 1);
        break;
      case NodeKind::Neg: r = -a; ca = -1.0; break;
      case NodeKind::Sqrt:
        if (a <= 0.0) {
          throw NonFinite(a < 0.0 ? "sqrt of a negative value" : "sqrt not differentiable at 0");
        }
        r = std::sqrt(a);
        ca = 0.5 / r;
        break;
      case NodeKind::Exp: r = std::exp(a); ca = r; break;
      case NodeKind::Log:
        if (a <= 0.0) throw NonFinite("log of a non-positive value");
        r = std::log(a);
        ca = 1.0 / a;
        break;
      case NodeKind::Sin: r = std::sin(a); ca = std::cos(a); break;
      case NodeKind::Cos: r = std::cos(a); ca = -std::sin(a); break;
      case NodeKind::Parameter: break;
    }
    if (!std::isfinite(r) || !std::isfinite(ca) || !std::isfinite(cb)) {
      throw NonFinite("non-finite intermediate value");
    }
    if (da) {
      if (db) {
        for (std::size_t k = 0; k < d; ++k) out[k] = ca * da[k] + cb * db[k];
      } else {
        for (std::size_t k = 0; k < d; ++k) out[k] = ca * da[k];
      }
    }
    v[i] = r;
  }
  const double* top = &dv[(tape_.size() - 1) * d];
  for (std::size_t k = 0; k < d; ++k) {
    if (!std::isfinite(top[k])) throw NonFinite("non-finite derivative");
    gradient[k] = top[k];
  }
  return v.back();
}

// ---------------------------------------------------------------------------
// Convenience entry points

double evaluate(const Expression& e, std::span<const double> point, const Bindings& bindings) {
  return CompiledFunction(e, bindings, static_cast<int>(point.size())).value(point);
}

std::vector<double> gradient(const Expression& e, std::span<const double> point,
                             const Bindings& bindings, GradientMode mode, double h) {
  const CompiledFunction f(e, bindings, static_cast<int>(point.size()));
  std::vector<double> g(point.size());
  if (mode == GradientMode::Automatic) {
    f.value_and_gradient(point, g);
    return g;
  }
  std::vector<double> shifted(point.begin(), point.end());
  for (std::size_t k = 0; k < point.size(); ++k) {
    const double step = h * std::max(1.0, std::abs(point[k]));
    const double plus = point[k] + step;
    const double minus = point[k] - step;
    shifted[k] = plus;
    const double fp = f.value(shifted);
    shifted[k] = minus;
    const double fm = f.value(shifted);
    shifted[k] = point[k];
    g[k] = (fp - fm) / (plus - minus);
  }
  return g;
}

}  // namespace firstint
