#include "firstint/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "firstint/errors.hpp"

namespace firstint {

ParameterNames Scenario::parameter_names() const {
  ParameterNames names;
  for (const auto& [k, v] : bindings) names.insert(k);
  return names;
}

IntegralSet Scenario::integral_set() const {
  return IntegralSet(space, integrals, bindings, integral_names);
}

FieldModel Scenario::model(Backend backend, Thresholds thresholds) const {
  return FieldModel(integral_set(), hamiltonian, lambda, backend, thresholds);
}

std::vector<Expression> Scenario::expressions() const {
  std::vector<Expression> out = integrals;
  out.push_back(hamiltonian);
  out.push_back(lambda);
  for (const auto& [name, e] : auxiliary) out.push_back(e);
  return out;
}

namespace {

const std::vector<ScenarioSummary> kBuiltins = {
    {"example1",
     "Three particles on a line with inverse-cube pair forces: energy H, virial "
     "sum x_i y_i and total momentum (case i)",
     {{"m1", "1", "> 0"},
      {"m2", "2", "> 0"},
      {"m3", "3", "> 0"},
      {"a", "1", "finite"},
      {"b", "1", "finite"},
      {"c", "1", "finite"}}},
    {"kepler-m",
     "Kepler problem, angular momentum M = x cross y as the integrals (case ii, "
     "geodesic-type field xdot = y, ydot = lambda w with w parallel to x)",
     {}},
    {"kepler-w",
     "Kepler problem, Runge-Lenz vector W = y cross M - mu x/|x| as the integrals "
     "(case i, recovers ydot = -mu x/|x|^3)",
     {{"mu", "1", "finite"}}},
    {"vortex3",
     "Three point vortices in canonically rescaled coordinates u = sqrt(G) x, "
     "v = sqrt(G) y: linear impulses and angular impulse (case ii)",
     {{"g1", "1", "> 0"}, {"g2", "2", "> 0"}, {"g3", "3", "> 0"}}},
    {"uhlenbeck",
     "Uhlenbeck integrals f_v = (A x_v + B y_v)^2 + sum_{j != v} (x_v y_j - x_j y_v)^2/(a_v - a_j); "
     "Neumann system on the sphere when B = 0",
     {{"n", "3", "integer in [2, 16]"},
      {"A", "1", "finite"},
      {"B", "0", "finite"},
      {"a1..an", "1, 2, ..., n", "strictly increasing"}}},
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

class ParamReader {
 public:
  ParamReader(std::string_view scenario, const Bindings& given)
      : scenario_(scenario), given_(given) {}

  double get(const std::string& name, double fallback) {
    used_.insert(name);
    auto it = given_.find(name);
    const double v = it == given_.end() ? fallback : it->second;
    if (!std::isfinite(v)) violation(name + " must be finite");
    return v;
  }

  double positive(const std::string& name, double fallback) {
    const double v = get(name, fallback);
    if (!(v > 0.0)) violation(name + " must be positive, got " + num(v));
    return v;
  }

  void finish() const {
    for (const auto& [name, v] : given_) {
      if (!used_.contains(name)) violation("unknown parameter '" + name + "'");
    }
  }

  [[noreturn]] void violation(const std::string& what) const {
    throw ParameterViolation(std::string(scenario_) + ": " + what);
  }

 private:
  std::string_view scenario_;
  const Bindings& given_;
  ParameterNames used_;
};

Scenario make_base(std::string name, int n, Bindings bindings) {
  Scenario s;
  s.name = std::move(name);
  s.space = PhaseSpace(n);
  s.bindings = std::move(bindings);
  return s;
}

void set_integrals(Scenario& s, const std::vector<std::pair<std::string, std::string>>& defs) {
  const ParameterNames params = s.parameter_names();
  for (const auto& [name, text] : defs) {
    s.integral_names.push_back(name);
    s.integrals.push_back(parse(text, s.space, params));
  }
}

Expression parse_in(const Scenario& s, const std::string& text) {
  return parse(text, s.space, s.parameter_names());
}

Scenario example1(const Bindings& given) {
  ParamReader p("example1", given);
  Bindings b;
  b["m1"] = p.positive("m1", 1.0);
  b["m2"] = p.positive("m2", 2.0);
  b["m3"] = p.positive("m3", 3.0);
  b["a"] = p.get("a", 1.0);
  b["b"] = p.get("b", 1.0);
  b["c"] = p.get("c", 1.0);
  p.finish();
  Scenario s = make_base("example1", 3, std::move(b));
  const std::string h =
      "y1^2/(2*m1) + y2^2/(2*m2) + y3^2/(2*m3) + a/(x1 - x2)^2 + b/(x3 - x1)^2 + c/(x3 - x2)^2";
  set_integrals(s, {{"H", h}, {"virial", "x1*y1 + x2*y2 + x3*y3"}, {"momentum", "y1 + y2 + y3"}});
  s.hamiltonian = s.integrals[0];
  s.lambda = Expression::constant(0.0);
  s.initial = {1.5, 0.0, -2.0, 1.25, 0.25, -1.0};
  s.auxiliary.emplace("s_zero_closed",
                      parse_in(s, "(x2 - x1)*y3/m3 + (x1 - x3)*y2/m2 + (x3 - x2)*y1/m1"));
  s.identities = {
      "{H, virial} = -2 H and {momentum, virial} = -momentum",
      "{H, momentum} = 0",
      "|S|_0 = (x2-x1) y3/m3 + (x1-x3) y2/m2 + (x3-x2) y1/m1",
      "correction = (2H/|S|_0) (y3/m3 - y2/m2, y1/m1 - y3/m3, y2/m2 - y1/m1) up to sign",
  };
  return s;
}

const char* kCross[3] = {"x2*y3 - x3*y2", "x3*y1 - x1*y3", "x1*y2 - x2*y1"};

Scenario kepler_m(const Bindings& given) {
  ParamReader p("kepler-m", given);
  p.finish();
  Scenario s = make_base("kepler-m", 3, {});
  set_integrals(s, {{"M1", kCross[0]}, {"M2", kCross[1]}, {"M3", kCross[2]}});
  s.hamiltonian = parse_in(s, "(y1^2 + y2^2 + y3^2)/2");
  s.lambda = Expression::constant(0.0);
  s.initial = {1.0, 0.2, -0.3, 0.4, 1.0, 0.1};
  s.auxiliary.emplace("x1M3", parse_in(s, "x1*(x1*y2 - x2*y1)"));
  s.identities = {
      "{M1, M2} = M3 cyclically",
      "|S|_0 = 0 identically; |S|_N = -x1 M3",
      "kernel direction w = -M3 x, so ydot = lambda w is parallel to x",
  };
  return s;
}

Scenario kepler_w(const Bindings& given) {
  ParamReader p("kepler-w", given);
  Bindings b;
  b["mu"] = p.get("mu", 1.0);
  p.finish();
  Scenario s = make_base("kepler-w", 3, std::move(b));
  const std::string r2 = "(x1^2 + x2^2 + x3^2)";
  const std::string v2 = "(y1^2 + y2^2 + y3^2)";
  const std::string xy = "(x1*y1 + x2*y2 + x3*y3)";
  std::vector<std::pair<std::string, std::string>> defs;
  for (int j = 1; j <= 3; ++j) {
    const std::string xj = "x" + std::to_string(j);
    const std::string yj = "y" + std::to_string(j);
    defs.emplace_back("W" + std::to_string(j),
                      xj + "*" + v2 + " - " + xy + "*" + yj + " - mu*" + xj + "/sqrt" + r2);
  }
  set_integrals(s, defs);
  s.hamiltonian = parse_in(s, "(y1^2 + y2^2 + y3^2)/2");
  s.lambda = Expression::constant(0.0);
  s.initial = {1.0, 0.0, 0.0, 0.1, 1.1, 0.2};
  s.auxiliary.emplace("F", parse_in(s, "(" + r2 + "*" + v2 + " - " + xy + "^2)/2 - mu*sqrt" + r2));
  s.auxiliary.emplace("s_zero_closed",
                      parse_in(s, "2*" + xy + "*((" + std::string(kCross[0]) + ")^2 + (" +
                                      kCross[1] + ")^2 + (" + kCross[2] + ")^2)"));
  s.identities = {
      "W_j = dF/dx_j with F = (|x|^2 |y|^2 - <x,y>^2)/2 - mu |x|",
      "|S|_0 = 2 <x,y> |M|^2",
      "constructed field with H = |y|^2/2 is xdot = y, ydot = -mu x/|x|^3",
  };
  return s;
}

Scenario vortex3(const Bindings& given) {
  ParamReader p("vortex3", given);
  Bindings b;
  const double g[3] = {p.positive("g1", 1.0), p.positive("g2", 2.0), p.positive("g3", 3.0)};
  b["g1"] = g[0];
  b["g2"] = g[1];
  b["g3"] = g[2];
  p.finish();
  Scenario s = make_base("vortex3", 3, std::move(b));
  set_integrals(s, {{"impulse_x", "sqrt(g1)*x1 + sqrt(g2)*x2 + sqrt(g3)*x3"},
                    {"impulse_y", "sqrt(g1)*y1 + sqrt(g2)*y2 + sqrt(g3)*y3"},
                    {"angular_impulse", "(x1^2 + x2^2 + x3^2 + y1^2 + y2^2 + y3^2)/2"}});
  // Pairwise log-distance Hamiltonian in the rescaled coordinates.
  std::string h;
  for (int m = 1; m <= 3; ++m) {
    for (int k = m + 1; k <= 3; ++k) {
      const std::string sm = std::to_string(m);
      const std::string sk = std::to_string(k);
      if (!h.empty()) h += " + ";
      h += "g" + sm + "*g" + sk + "*log((x" + sk + "/sqrt(g" + sk + ") - x" + sm + "/sqrt(g" + sm +
           "))^2 + (y" + sk + "/sqrt(g" + sk + ") - y" + sm + "/sqrt(g" + sm + "))^2)";
    }
  }
  s.hamiltonian = parse_in(s, h);
  s.lambda = Expression::constant(0.0);
  // Vortex positions (1, 0), (-0.5, 0.6), (-0.3, -0.7), rescaled.
  const double px[3] = {1.0, -0.5, -0.3};
  const double py[3] = {0.0, 0.6, -0.7};
  s.initial.resize(6);
  for (int j = 0; j < 3; ++j) {
    s.initial[j] = std::sqrt(g[j]) * px[j];
    s.initial[3 + j] = std::sqrt(g[j]) * py[j];
  }
  s.identities = {
      "drift of every integral along H vanishes (translation and rotation invariance)",
      "|S|_0 = 0; df/dy has corank one with kernel sqrt(G) x v",
  };
  return s;
}

Scenario uhlenbeck(const Bindings& given) {
  ParamReader p("uhlenbeck", given);
  const double n_raw = p.get("n", 3.0);
  if (n_raw != std::floor(n_raw) || n_raw < 2 || n_raw > kMaxDegreesOfFreedom) {
    p.violation("n must be an integer in [2, " + std::to_string(kMaxDegreesOfFreedom) + "]");
  }
  const int n = static_cast<int>(n_raw);
  Bindings b;
  b["A"] = p.get("A", 1.0);
  b["B"] = p.get("B", 0.0);
  std::vector<double> a(n);
  for (int v = 0; v < n; ++v) {
    const std::string name = "a" + std::to_string(v + 1);
    a[v] = p.get(name, v + 1.0);
    b[name] = a[v];
    if (v > 0 && !(a[v] > a[v - 1])) {
      p.violation("a1 < a2 < ... < an required, got " + num(a[v - 1]) + " then " + num(a[v]));
    }
  }
  p.finish();
  Scenario s = make_base("uhlenbeck", n, std::move(b));
  auto x = [](int i) { return "x" + std::to_string(i + 1); };
  auto y = [](int i) { return "y" + std::to_string(i + 1); };
  auto a_ = [](int i) { return "a" + std::to_string(i + 1); };
  std::vector<std::pair<std::string, std::string>> defs;
  std::string weighted;
  std::string linear_sq;
  std::string weighted_linear_sq;
  std::string lagrange;
  for (int v = 0; v < n; ++v) {
    const std::string lin = "(A*" + x(v) + " + B*" + y(v) + ")^2";
    std::string f = lin;
    for (int j = 0; j < n; ++j) {
      if (j == v) continue;
      f += " + (" + x(v) + "*" + y(j) + " - " + x(j) + "*" + y(v) + ")^2/(" + a_(v) + " - " +
           a_(j) + ")";
      if (j > v) {
        lagrange += (lagrange.empty() ? "" : " + ") + std::string("(") + x(v) + "*" + y(j) +
                    " - " + x(j) + "*" + y(v) + ")^2";
      }
    }
    defs.emplace_back("f" + std::to_string(v + 1), f);
    weighted += (v ? " + " : "") + a_(v) + "*(" + f + ")";
    linear_sq += (v ? " + " : "") + lin;
    weighted_linear_sq += (v ? " + " : "") + a_(v) + "*" + lin;
  }
  set_integrals(s, defs);
  s.hamiltonian = parse_in(s, "(" + weighted + ")/2");
  s.lambda = Expression::constant(0.0);
  s.auxiliary.emplace("sum_closed", parse_in(s, linear_sq));
  s.auxiliary.emplace("weighted_sum_closed", parse_in(s, weighted_linear_sq + " + " + lagrange));

  // Unit-sphere position and a generic momentum.
  s.initial.assign(2 * n, 0.0);
  double r2 = 0.0;
  for (int v = 0; v < n; ++v) {
    s.initial[v] = (v % 2 == 0 ? 1.0 : -1.0) * (0.5 + 0.3 * std::cos(1.7 * (v + 1)));
    r2 += s.initial[v] * s.initial[v];
  }
  for (int v = 0; v < n; ++v) {
    s.initial[v] /= std::sqrt(r2);
    s.initial[n + v] = 0.4 * std::sin(2.3 * (v + 1)) + 0.1;
  }
  s.identities = {
      "{f_i, f_j} = 0 for all i, j",
      "sum_v f_v = sum_v (A x_v + B y_v)^2  (= A^2 |x|^2 when B = 0)",
      "sum_v a_v f_v = sum_v a_v (A x_v + B y_v)^2 + |x|^2 |y|^2 - <x,y>^2",
      "|S|_0 != 0 when B != 0; |S|_0 = 0 and w parallel to x when B = 0",
  };
  return s;
}

}  // namespace

const std::vector<ScenarioSummary>& list_builtins() { return kBuiltins; }

const ScenarioSummary& builtin_summary(std::string_view name) {
  for (const ScenarioSummary& s : kBuiltins) {
    if (s.name == name) return s;
  }
  throw UnknownScenario(std::string(name));
}

Scenario materialize(std::string_view name, const Bindings& params) {
  Scenario s;
  if (name == "example1") {
    s = example1(params);
  } else if (name == "kepler-m") {
    s = kepler_m(params);
  } else if (name == "kepler-w") {
    s = kepler_w(params);
  } else if (name == "vortex3") {
    s = vortex3(params);
  } else if (name == "uhlenbeck") {
    s = uhlenbeck(params);
  } else {
    throw UnknownScenario(std::string(name));
  }
  const IntegralSet fs = s.integral_set();
  if (independence_rank(fs, s.initial) != s.space.n()) {
    throw ParameterViolation(s.name + ": integrals are not independent at the default point");
  }
  return s;
}

}  // namespace firstint
