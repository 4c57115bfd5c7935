// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "firstint/errors.hpp"
#include "firstint/flow.hpp"
#include "firstint/scenarios.hpp"
#include "random_tree.hpp"
#include "support.hpp"

using namespace firstint;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "; first failure: " << what;
      pass = false;
    }
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

IntegratorConfig adaptive(double t_end) {
  IntegratorConfig cfg;
  cfg.method = Method::Adaptive45;
  cfg.rtol = 1e-10;
  cfg.atol = 1e-12;
  cfg.t_end = t_end;
  return cfg;
}

/// Random point near the scenario's default start; keeps particles and
/// vortices apart so every expression stays inside its domain.
std::vector<double> near_default(const Scenario& s, std::mt19937_64& rng, double spread = 0.3) {
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<double> p = s.initial;
  for (double& v : p) v += u(rng);
  return p;
}

void criterion_1(Verdict& v) {
  struct Case {
    std::string label;
    Scenario scenario;
  };
  std::vector<Case> cases;
  cases.push_back({"example1", materialize("example1")});
  cases.push_back({"kepler-w", materialize("kepler-w")});
  Scenario km = materialize("kepler-m");
  km.lambda = Expression::constant(1.0);
  cases.push_back({"kepler-m(lambda=1)", km});
  cases.push_back({"vortex3", materialize("vortex3", {{"g1", 1}, {"g2", 2}, {"g3", 3}})});
  cases.push_back({"uhlenbeck(B=0)", materialize("uhlenbeck", {{"A", 1}, {"B", 0}})});
  cases.push_back({"uhlenbeck(B=1)", materialize("uhlenbeck", {{"A", 1}, {"B", 1}})});
  double worst_drift = 0.0;
  double worst_time = 0.0;
  for (const Case& c : cases) {
    const auto start = std::chrono::steady_clock::now();
    const FlowResult r = integrate(c.scenario.model(), c.scenario.initial, adaptive(10.0));
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    worst_drift = std::max(worst_drift, r.report.max_rel_drift());
    worst_time = std::max(worst_time, seconds);
    v.require(r.report.termination == Termination::Completed,
              c.label + " ended " + std::string(to_string(r.report.termination)));
    v.require(r.report.max_rel_drift() <= 1e-7, c.label + " drift " + fmt(r.report.max_rel_drift()));
    v.require(seconds < 5.0, c.label + " took " + fmt(seconds) + " s");
  }
  v.detail << "max rel drift " << fmt(worst_drift) << ", slowest run " << fmt(worst_time) << " s";
}

void criterion_2(Verdict& v) {
  struct Case {
    std::string label;
    Scenario scenario;
    double spread;
  };
  const std::vector<Case> cases{{"example1", materialize("example1"), 0.4},
                                {"kepler-w", materialize("kepler-w"), 0.8},
                                {"uhlenbeck(B=1)", materialize("uhlenbeck", {{"B", 1}}), 0.8}};
  std::mt19937_64 rng(2002);
  double worst = 0.0;
  for (const Case& c : cases) {
    const FieldModel cramer = c.scenario.model(Backend::Cramer);
    const FieldModel solved = c.scenario.model(Backend::Solve);
    int done = 0;
    int attempts = 0;
    while (done < 1000 && attempts < 20000) {
      ++attempts;
      const auto p = near_default(c.scenario, rng, c.spread);
      FieldSample a;
      try {
        a = build_field(cramer, p);
      } catch (const Error&) {
        continue;
      }
      if (a.regularity != Regularity::CaseI) continue;
      const FieldSample b = build_field(solved, p);
      const double scale = testing::max_abs(b.correction);
      for (std::size_t k = 0; k < a.correction.size(); ++k) {
        const double rel = scale > 0 ? std::abs(a.correction[k] - b.correction[k]) / scale : 0.0;
        worst = std::max(worst, rel);
      }
      ++done;
    }
    v.require(done == 1000, c.label + " produced only " + std::to_string(done) + " case-i points");
  }
  v.require(worst <= 1e-8, "discrepancy " + fmt(worst));
  v.detail << "3 scenarios x 1000 points, max |c_cramer - c_solve| / max|c| = " << fmt(worst);
}

void criterion_3(Verdict& v) {
  const Scenario kw = materialize("kepler-w");
  const FieldModel model = kw.model();
  std::mt19937_64 rng(3003);
  double worst = 0.0;
  int done = 0;
  while (done < 100) {
    const auto p = testing::uniform_point(rng, 6);
    FieldSample s;
    try {
      s = build_field(model, p);
    } catch (const Error&) {
      continue;
    }
    if (s.regularity != Regularity::CaseI) continue;
    const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    std::vector<double> expected(6);
    for (int k = 0; k < 3; ++k) {
      expected[k] = p[3 + k];
      expected[3 + k] = -p[k] / (r * r * r);
    }
    worst = std::max(worst, testing::relative_error(s.velocity, expected));
    ++done;
  }
  v.require(worst <= 1e-9, "relative error " + fmt(worst));
  v.detail << "100 regular points, max relative error " << fmt(worst);
}

void criterion_4(Verdict& v) {
  std::mt19937_64 rng(4004);
  double worst_residual = 0.0;
  double worst_cos = 1.0;
  for (const char* name : {"kepler-m", "uhlenbeck"}) {
    const Scenario s = materialize(name, {});
    const IntegralSet fs = s.integral_set();
    for (int t = 0; t < 100; ++t) {
      const auto p = testing::uniform_point(rng, 6);
      const auto w = kernel_vector(fs, p);
      const Matrix fy = momentum_block(fs.jacobian(p));
      const double residual = norm(multiply(fy, w)) / (frobenius_norm(fy) * norm(w));
      const double c = std::abs(testing::cosine(w, std::span<const double>(p.data(), 3)));
      worst_residual = std::max(worst_residual, residual);
      worst_cos = std::min(worst_cos, c);
    }
  }
  v.require(worst_residual <= 1e-10, "residual " + fmt(worst_residual));
  v.require(worst_cos >= 1 - 1e-10, "|cos| " + fmt(worst_cos));
  v.detail << "max |Fy w|/(|Fy||w|) " << fmt(worst_residual) << ", min |cos(w,x)| 1-"
           << fmt(1 - worst_cos);
}

void criterion_5(Verdict& v) {
  std::mt19937_64 rng(5005);
  const Thresholds th;

  double involution = 0.0;
  for (int n = 2; n <= 5; ++n) {
    for (double b : {0.0, 1.0}) {
      const IntegralSet fs = materialize("uhlenbeck", {{"n", n}, {"B", b}}).integral_set();
      for (int t = 0; t < 100; ++t) {
        const auto p = testing::uniform_point(rng, 2 * n);
        const Matrix j = fs.jacobian(p);
        const Matrix m = involution_matrix(j);
        for (int a = 0; a < n; ++a) {
          for (int c = 0; c < n; ++c) {
            const double scale = std::max(1.0, poisson_scale(j.row(a), j.row(c)));
            involution = std::max(involution, std::abs(m(a, c)) / scale);
          }
        }
      }
    }
  }
  v.require(involution <= 1e-10, "involution " + fmt(involution));

  double sums = 0.0;
  for (double b : {0.0, 1.0}) {
    const Scenario u = materialize("uhlenbeck", {{"B", b}});
    const IntegralSet fs = u.integral_set();
    for (int t = 0; t < 100; ++t) {
      const auto p = testing::uniform_point(rng, 6);
      const auto f = fs.values(p);
      const double sum = f[0] + f[1] + f[2];
      const double weighted = f[0] + 2 * f[1] + 3 * f[2];
      sums = std::max(sums, testing::relative_error(
                                sum, evaluate(u.auxiliary.at("sum_closed"), p, u.bindings)));
      sums = std::max(sums, testing::relative_error(
                                weighted,
                                evaluate(u.auxiliary.at("weighted_sum_closed"), p, u.bindings)));
    }
  }
  v.require(sums <= 1e-12, "sum identities " + fmt(sums));

  int dichotomy_failures = 0;
  const IntegralSet zero = materialize("uhlenbeck").integral_set();
  const IntegralSet one = materialize("uhlenbeck", {{"B", 1}}).integral_set();
  for (int t = 0; t < 100; ++t) {
    const auto p = testing::uniform_point(rng, 6);
    if (!s_zero(zero.jacobian(p)).vanishes(th.determinant_zero)) ++dichotomy_failures;
    if (s_zero(one.jacobian(p)).vanishes(th.determinant_zero)) ++dichotomy_failures;
  }
  v.require(dichotomy_failures == 0, std::to_string(dichotomy_failures) + " dichotomy failures");

  double closed_s0 = 0.0;
  for (const char* name : {"example1", "kepler-w"}) {
    const Scenario s = materialize(name);
    const IntegralSet fs = s.integral_set();
    for (int t = 0; t < 100; ++t) {
      const auto p = near_default(s, rng, 0.5);
      const double got = std::abs(s_zero(fs, p));
      const double want = std::abs(evaluate(s.auxiliary.at("s_zero_closed"), p, s.bindings));
      closed_s0 = std::max(closed_s0, testing::relative_error(got, want));
    }
  }
  v.require(closed_s0 <= 1e-12, "s_zero closed forms " + fmt(closed_s0));

  double gradient_f = 0.0;
  const Scenario kw = materialize("kepler-w");
  for (int t = 0; t < 100; ++t) {
    const auto p = testing::uniform_point(rng, 6);
    const auto g = gradient(kw.auxiliary.at("F"), p, kw.bindings);
    const auto w = kw.integral_set().values(p);
    gradient_f =
        std::max(gradient_f, testing::relative_error(std::span<const double>(g.data(), 3), w));
  }
  v.require(gradient_f <= 1e-10, "dF/dx vs W " + fmt(gradient_f));

  v.detail << "involution " << fmt(involution) << ", sums " << fmt(sums) << ", s0 closed "
           << fmt(closed_s0) << ", dF/dx-W " << fmt(gradient_f) << ", dichotomy ok at 100 pts";
}

void criterion_6(Verdict& v) {
  std::mt19937_64 rng(6006);
  double worst = 0.0;
  int expressions = 0;
  for (const ScenarioSummary& summary : list_builtins()) {
    const Scenario s = materialize(summary.name);
    for (const Expression& e : s.expressions()) {
      ++expressions;
      for (int t = 0; t < 100; ++t) {
        const auto p = near_default(s, rng);
        const auto ad = gradient(e, p, s.bindings);
        const auto fd = gradient(e, p, s.bindings, GradientMode::FiniteDifference);
        const double mag = testing::max_abs(ad);
        double diff = 0.0;
        for (std::size_t i = 0; i < ad.size(); ++i) diff = std::max(diff, std::abs(ad[i] - fd[i]));
        worst = std::max(worst, mag > 0.0 ? diff / mag : diff);
      }
    }
  }
  v.require(worst <= 1e-6, "AD vs FD " + fmt(worst));
  v.detail << expressions << " expressions x 100 points, max relative deviation " << fmt(worst);
}

void criterion_7(Verdict& v) {
  const Scenario kw = materialize("kepler-w");
  const OrderEstimate kepler = convergence_order(kw.model(), kw.initial, 1e-2, 1.0);
  const PhaseSpace one(1);
  const FieldModel harmonic(
      IntegralSet(one, {parse("x1^2 + y1^2", one)}, {}), parse("(x1^2 + y1^2)/2", one));
  const std::vector<double> start{0.0, 1.0};
  const OrderEstimate osc = convergence_order(harmonic, start, 0.05, 1.0);
  v.require(std::abs(kepler.order - 4.0) <= 0.3, "kepler-w order " + fmt(kepler.order));
  v.require(std::abs(osc.order - 4.0) <= 0.3, "harmonic order " + fmt(osc.order));
  v.detail << "kepler-w p = " << fmt(kepler.order) << ", harmonic p = " << fmt(osc.order);
}

void criterion_8(Verdict& v) {
  const Scenario kw = materialize("kepler-w", {{"mu", 1.0}});
  const std::vector<double> start{1, 0, 0, 0, 1, 0};
  const FlowResult r = integrate(kw.model(), start, adaptive(2 * std::numbers::pi));
  v.require(r.report.termination == Termination::Completed,
            "run ended " + std::string(to_string(r.report.termination)) + ": " +
                r.report.diagnostic);
  double err = 0.0;
  for (int i = 0; i < 6; ++i) err = std::max(err, std::abs(r.trajectory.states.back()[i] - start[i]));
  v.require(err <= 1e-6, "return error " + fmt(err));
  v.detail << "|x(2pi) - x(0)|_inf = " << fmt(err) << " after " << r.report.steps << " steps";
}

void criterion_9(Verdict& v) {
  double worst = 0.0;
  double radius_drift = 0.0;
  for (const char* name : {"kepler-m", "uhlenbeck"}) {
    const Scenario s = materialize(name);
    std::vector<std::vector<double>> finals;
    for (const char* lambda : {"0", "2", "sin(x1)"}) {
      const FieldModel m = s.model().with_lambda(parse(lambda, s.space));
      const FlowResult r = integrate(m, s.initial, adaptive(10.0));
      v.require(r.report.termination == Termination::Completed,
                std::string(name) + " lambda=" + lambda + " ended " +
                    std::string(to_string(r.report.termination)));
      worst = std::max(worst, r.report.max_rel_drift());
      finals.push_back(r.trajectory.states.back());
      if (std::string(name) == "uhlenbeck") {
        auto r2 = [](const std::vector<double>& st) { return st[0] * st[0] + st[1] * st[1] + st[2] * st[2]; };
        const double r0 = r2(r.trajectory.states.front());
        for (const auto& st : r.trajectory.states) {
          radius_drift = std::max(radius_drift, std::abs(r2(st) - r0) / (1 + r0));
        }
      }
    }
    for (std::size_t a = 0; a < finals.size(); ++a) {
      for (std::size_t b = a + 1; b < finals.size(); ++b) {
        v.require(testing::relative_error(finals[a], finals[b]) > 1e-6,
                  std::string(name) + ": lambda did not change the trajectory");
      }
    }
  }
  v.require(worst <= 1e-7, "integral drift " + fmt(worst));
  v.require(radius_drift <= 1e-7, "sphere radius drift " + fmt(radius_drift));
  v.detail << "max rel drift " << fmt(worst) << ", sphere radius drift " << fmt(radius_drift);
}

void criterion_10(Verdict& v) {
  int builtin = 0;
  int mismatches = 0;
  for (const ScenarioSummary& summary : list_builtins()) {
    const Scenario s = materialize(summary.name);
    for (const Expression& e : s.expressions()) {
      ++builtin;
      const Expression once = parse(to_text(e), s.space, s.parameter_names());
      const Expression twice = parse(to_text(once), s.space, s.parameter_names());
      if (!(once == e) || !(twice == once)) ++mismatches;
    }
  }
  const PhaseSpace space(3);
  const ParameterNames params{"p0", "p1", "p2"};
  testing::TreeGenerator gen(space, 10010);
  for (int i = 0; i < 1000; ++i) {
    const Expression e = gen(8);
    const Expression once = parse(to_text(e), space, params);
    const Expression twice = parse(to_text(once), space, params);
    if (e.depth() > 8 || !(once == e) || !(twice == once)) ++mismatches;
  }
  v.require(mismatches == 0, std::to_string(mismatches) + " mismatches");
  v.detail << builtin << " builtin expressions and 1000 random trees, " << mismatches
           << " mismatches";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria{
      {"conservation suite", criterion_1},     {"backend equivalence", criterion_2},
      {"kepler exactness", criterion_3},       {"kernel direction", criterion_4},
      {"identity suite", criterion_5},         {"AD correctness", criterion_6},
      {"integrator order", criterion_7},       {"orbit oracle", criterion_8},
      {"lambda invariance", criterion_9},      {"parser round trip", criterion_10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      criteria[i].second(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "exception: " << e.what();
    }
    failed += v.pass ? 0 : 1;
    std::printf("%s criterion %zu (%s): %s\n", v.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), v.detail.str().c_str());
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
