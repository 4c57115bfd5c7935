#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "firstint/errors.hpp"
#include "firstint/flow.hpp"
#include "firstint/scenarios.hpp"
#include "support.hpp"

using namespace firstint;

namespace {

FieldModel model_of(int n, std::vector<std::string> fs, const std::string& h) {
  const PhaseSpace s(n);
  std::vector<Expression> e;
  for (const auto& t : fs) e.push_back(parse(t, s));
  return FieldModel(IntegralSet(s, std::move(e), {}), parse(h, s));
}

IntegratorConfig adaptive(double t_end) {
  IntegratorConfig cfg;
  cfg.t_end = t_end;
  return cfg;
}

IntegratorConfig rk4(double dt, double t_end) {
  IntegratorConfig cfg;
  cfg.method = Method::Rk4Fixed;
  cfg.dt = dt;
  cfg.t_end = t_end;
  return cfg;
}

}  // namespace

TEST_CASE("circular Kepler orbit closes after one period") {
  const Scenario kw = materialize("kepler-w");
  const std::vector<double> start{1, 0, 0, 0, 1, 0};
  const FlowResult r = integrate(kw.model(), start, adaptive(2 * std::numbers::pi));
  REQUIRE(r.report.termination == Termination::Completed);
  CHECK(r.trajectory.times.back() == 2 * std::numbers::pi);
  CHECK(testing::relative_error(r.trajectory.states.back(), start) <= 1e-6);
  for (const IntegralDrift& d : r.report.integrals) CHECK(d.max_rel_drift <= 1e-8);
}

TEST_CASE("zero field leaves the state unchanged") {
  const FieldModel m = model_of(2, {"y1", "y2"}, "0");
  const std::vector<double> start{0.3, -1.0, 2.0, 0.5};
  for (const IntegratorConfig& cfg : {adaptive(5.0), rk4(0.1, 5.0)}) {
    const FlowResult r = integrate(m, start, cfg);
    CHECK(r.report.termination == Termination::Completed);
    for (const auto& s : r.trajectory.states) CHECK(s == start);
    CHECK(r.report.max_rel_drift() == 0.0);
  }
}

TEST_CASE("harmonic oscillator against its closed form") {
  // f = x^2 + y^2 is conserved by the plain canonical field of H = f/2.
  const FieldModel m = model_of(1, {"x1^2 + y1^2"}, "(x1^2 + y1^2)/2");
  const std::vector<double> start{0.0, 1.0};
  const FlowResult r = integrate(m, start, adaptive(1.0));
  REQUIRE(r.report.termination == Termination::Completed);
  const auto& end = r.trajectory.states.back();
  CHECK(end[0] == doctest::Approx(std::sin(1.0)).epsilon(1e-9));
  CHECK(end[1] == doctest::Approx(std::cos(1.0)).epsilon(1e-9));

  const FlowResult f = integrate(m, start, rk4(0.01, 1.0));
  REQUIRE(f.report.termination == Termination::Completed);
  CHECK(f.trajectory.size() == 101);
  CHECK(std::abs(f.trajectory.states.back()[0] - std::sin(1.0)) <= 1e-9);

  const OrderEstimate est = convergence_order(m, start, 0.05, 1.0);
  CHECK(est.order == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("RK4 order on the Kepler field") {
  const Scenario kw = materialize("kepler-w");
  const OrderEstimate est = convergence_order(kw.model(), kw.initial, 1e-2, 1.0);
  CHECK(std::abs(est.order - 4.0) <= 0.3);
}

TEST_CASE("an oversized step gives a diagnostic instead of an order") {
  const FieldModel m = model_of(1, {"x1^2 + y1^2"}, "(x1^2 + y1^2)/2");
  const std::vector<double> start{0.0, 1.0};
  CHECK_THROWS_AS(convergence_order(m, start, 4.0, 40.0), IntegrationFailure);
}

TEST_CASE("last step lands on t_end") {
  const FieldModel m = model_of(1, {"x1^2 + y1^2"}, "(x1^2 + y1^2)/2");
  const std::vector<double> start{0.0, 1.0};
  const FlowResult r = integrate(m, start, rk4(0.3, 1.0));
  CHECK(r.trajectory.times.back() == 1.0);
  CHECK(r.trajectory.size() == 5);
}

TEST_CASE("singular locus stops the run") {
  // |S|_0 = -y^2 and the correction is -1/y: y reaches 0 in finite time.
  const FieldModel m = model_of(1, {"x1 + y1^3/3"}, "y1^2/2");
  const std::vector<double> start{0.0, 1.0};
  const FlowResult r = integrate(m, start, adaptive(2.0));
  CHECK(r.report.termination != Termination::Completed);
  CHECK(r.trajectory.times.back() < 0.5 + 1e-6);
  CHECK_FALSE(r.report.diagnostic.empty());
  for (const IntegralDrift& d : r.report.integrals) CHECK(d.max_rel_drift <= 1e-6);
}

TEST_CASE("leaving the domain reports nonfinite") {
  const FieldModel m = model_of(1, {"y1"}, "y1 + log(1 - x1)");
  const std::vector<double> start{0.5, 0.0};
  const FlowResult a = integrate(m, start, adaptive(2.0));
  CHECK(a.report.termination == Termination::NonFinite);
  CHECK(a.trajectory.times.back() <= 0.5 + 1e-9);
  const FlowResult b = integrate(m, start, rk4(0.2, 2.0));
  CHECK(b.report.termination == Termination::NonFinite);
}

TEST_CASE("step budget") {
  const Scenario kw = materialize("kepler-w");
  IntegratorConfig cfg = adaptive(10.0);
  cfg.max_steps = 5;
  const FlowResult r = integrate(kw.model(), kw.initial, cfg);
  CHECK(r.report.termination == Termination::MaxSteps);
  CHECK(r.report.steps == 5);
}

TEST_CASE("configuration validation") {
  const Scenario kw = materialize("kepler-w");
  IntegratorConfig bad = rk4(0.0, 1.0);
  CHECK_THROWS_AS(integrate(kw.model(), kw.initial, bad), ValidationError);
  bad = adaptive(-1.0);
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = adaptive(1.0);
  bad.rtol = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  const std::vector<double> short_start{1.0, 2.0};
  CHECK_THROWS_AS(integrate(kw.model(), short_start, adaptive(1.0)), ValidationError);
  CHECK(parse_method("rk4-fixed") == Method::Rk4Fixed);
  CHECK(to_string(Method::Adaptive45) == "adaptive45");
  CHECK_THROWS_AS(parse_method("euler"), ValidationError);
}

TEST_CASE("conservation report of a constant trajectory") {
  Trajectory t;
  t.integral_names = {"a", "b"};
  for (int i = 0; i < 4; ++i) {
    t.times.push_back(i);
    t.states.push_back({1.0, 2.0, 3.0, 4.0});
    t.integrals.push_back({5.0, -1.0});
  }
  const ConservationReport r = conservation_report(t);
  CHECK(r.steps == 3);
  CHECK(r.integrals.size() == 2);
  CHECK(r.integrals[1].name == "b");
  CHECK(r.max_rel_drift() == 0.0);
  CHECK_THROWS_AS(conservation_report(Trajectory{}), ValidationError);
}

TEST_CASE("drift statistics") {
  Trajectory t;
  t.times = {0, 1, 2};
  t.states = {{0, 0}, {0, 0}, {0, 0}};
  t.integrals = {{1.0}, {1.5}, {0.8}};
  const ConservationReport r = conservation_report(t);
  CHECK(r.integrals[0].max_abs_drift == doctest::Approx(0.5));
  CHECK(r.integrals[0].max_rel_drift == doctest::Approx(0.25));
}

TEST_CASE("Neumann flow stays on the sphere for any multiplier") {
  const Scenario u0 = materialize("uhlenbeck");
  const Expression radius = parse("x1^2 + x2^2 + x3^2", u0.space);
  for (const char* lambda : {"0", "2", "sin(x1)"}) {
    const FieldModel m = u0.model().with_lambda(parse(lambda, u0.space));
    const FlowResult r = integrate(m, u0.initial, adaptive(10.0));
    REQUIRE(r.report.termination == Termination::Completed);
    CHECK(r.report.max_rel_drift() <= 1e-7);
    const double r0 = evaluate(radius, r.trajectory.states.front(), u0.bindings);
    double worst = 0.0;
    for (const auto& s : r.trajectory.states) {
      worst = std::max(worst, std::abs(evaluate(radius, s, u0.bindings) - r0));
    }
    CHECK(worst / (1 + r0) <= 1e-7);
  }
}

TEST_CASE("vortex run conserves the impulses") {
  const Scenario v3 = materialize("vortex3");
  const FlowResult r = integrate(v3.model(), v3.initial, adaptive(10.0));
  REQUIRE(r.report.termination == Termination::Completed);
  CHECK(r.report.max_rel_drift() <= 1e-7);
}

TEST_CASE("runs are deterministic") {
  const Scenario km = materialize("kepler-m");
  const FieldModel m = km.model().with_lambda(parse("sin(x1)", km.space));
  const FlowResult a = integrate(m, km.initial, adaptive(3.0));
  const FlowResult b = integrate(m, km.initial, adaptive(3.0));
  CHECK(a.trajectory.times == b.trajectory.times);
  CHECK(a.trajectory.states == b.trajectory.states);
}

TEST_CASE("tighter tolerances do not worsen drift") {
  for (const char* name : {"example1", "kepler-w", "kepler-m", "vortex3", "uhlenbeck"}) {
    const Scenario sc = materialize(name);
    const FieldModel m = sc.model();
    IntegratorConfig cfg = adaptive(10.0);
    const FlowResult loose = integrate(m, sc.initial, cfg);
    cfg.rtol /= 2;
    cfg.atol /= 2;
    const FlowResult tight = integrate(m, sc.initial, cfg);
    REQUIRE(loose.report.termination == Termination::Completed);
    REQUIRE(tight.report.termination == Termination::Completed);
    CHECK_MESSAGE(tight.report.max_rel_drift() <= 2 * loose.report.max_rel_drift() + 1e-15, name);
  }
}

TEST_CASE("monitoring is passive") {
  // The recorded integral values are recomputed from the recorded states.
  const Scenario kw = materialize("kepler-w");
  const FlowResult r = integrate(kw.model(), kw.initial, adaptive(2.0));
  const IntegralSet fs = kw.integral_set();
  for (std::size_t i = 0; i < r.trajectory.size(); i += 7) {
    CHECK(fs.values(r.trajectory.states[i]) == r.trajectory.integrals[i]);
  }
}
