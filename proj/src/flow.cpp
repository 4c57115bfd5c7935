#include "firstint/flow.hpp"

#include <algorithm>
#include <cmath>

#include "firstint/errors.hpp"

namespace firstint {

std::string_view to_string(Method m) {
  return m == Method::Rk4Fixed ? "rk4-fixed" : "adaptive45";
}

Method parse_method(std::string_view text) {
  if (text == "rk4-fixed") return Method::Rk4Fixed;
  if (text == "adaptive45") return Method::Adaptive45;
  throw ValidationError("unknown integration method '" + std::string(text) + "'");
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Completed: return "completed";
    case Termination::SingularLocus: return "singular-locus";
    case Termination::StepCollapse: return "step-collapse";
    case Termination::NonFinite: return "nonfinite";
    case Termination::MaxSteps: return "max-steps";
  }
  return "?";
}

void IntegratorConfig::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(t_end)) throw ValidationError("t_end must be positive");
  if (method == Method::Rk4Fixed && !positive(dt)) {
    throw ValidationError("dt must be positive for rk4-fixed");
  }
  if (!positive(rtol) || !positive(atol)) throw ValidationError("rtol and atol must be positive");
  if (max_steps == 0) throw ValidationError("max_steps must be positive");
  if (!positive(singular_stop)) throw ValidationError("singular_stop must be positive");
}

double ConservationReport::max_rel_drift() const {
  double m = 0.0;
  for (const IntegralDrift& d : integrals) m = std::max(m, d.max_rel_drift);
  return m;
}

ConservationReport conservation_report(const Trajectory& trajectory) {
  if (trajectory.integrals.empty()) throw ValidationError("empty trajectory");
  ConservationReport r;
  const std::vector<double>& first = trajectory.integrals.front();
  for (std::size_t a = 0; a < first.size(); ++a) {
    IntegralDrift d;
    d.name = a < trajectory.integral_names.size() ? trajectory.integral_names[a]
                                                  : "f" + std::to_string(a + 1);
    d.initial = first[a];
    for (const auto& row : trajectory.integrals) {
      const double drift = std::abs(row[a] - d.initial);
      d.max_abs_drift = std::max(d.max_abs_drift, drift);
    }
    d.max_rel_drift = d.max_abs_drift / (1.0 + std::abs(d.initial));
    r.integrals.push_back(std::move(d));
  }
  r.steps = trajectory.size() - 1;
  return r;
}

namespace {

using State = std::vector<double>;

/// Axpy helper: out = y + h * sum_i a_i k_i.
void combine(const State& y, double h, std::initializer_list<std::pair<double, const State*>> terms,
             State& out) {
  out = y;
  for (const auto& [a, k] : terms) {
    if (a == 0.0) continue;
    for (std::size_t i = 0; i < y.size(); ++i) out[i] += h * a * (*k)[i];
  }
}

bool all_finite(const State& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double max_norm(const State& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

enum class Failure { None, Singular, NonFinite };

class Runner {
 public:
  Runner(const FieldModel& model, const IntegratorConfig& cfg) : model_(model), cfg_(cfg) {
    stop_thresholds_ = model.thresholds();
    stop_thresholds_.determinant_zero = cfg.singular_stop;
    result_.trajectory.integral_names = model.integrals().names();
  }

  FlowResult run(std::span<const double> start) {
    State y(start.begin(), start.end());
    if (y.size() != static_cast<std::size_t>(model_.space().dimension())) {
      throw ValidationError("start point has the wrong dimension");
    }
    if (!all_finite(y)) throw ValidationError("start point must be finite");
    if (!record(0.0, y)) return finish();
    State f0(y.size());
    if (!eval(y, f0)) {
      terminate(failure_ == Failure::NonFinite ? Termination::NonFinite : Termination::SingularLocus);
      return finish();
    }
    if (cfg_.method == Method::Rk4Fixed) {
      run_rk4(std::move(y), std::move(f0));
    } else {
      run_dopri(std::move(y), std::move(f0));
    }
    return finish();
  }

 private:
  bool eval(const State& y, State& out) {
    try {
      evaluate_field(model_, y, out);
      failure_ = Failure::None;
      return true;
    } catch (const NonFinite& e) {
      failure_ = Failure::NonFinite;
      diagnostic_ = e.what();
    } catch (const SingularLocus& e) {
      failure_ = Failure::Singular;
      diagnostic_ = e.what();
    } catch (const InconsistentDrift& e) {
      failure_ = Failure::Singular;
      diagnostic_ = e.what();
    }
    return false;
  }

  /// Records an accepted state; false when the run must stop there.
  bool record(double t, const State& y) {
    if (!all_finite(y)) {
      diagnostic_ = "state became non-finite";
      terminate(Termination::NonFinite);
      return false;
    }
    try {
      auto values = model_.integrals().values(y);
      result_.trajectory.times.push_back(t);
      result_.trajectory.states.push_back(y);
      result_.trajectory.integrals.push_back(std::move(values));
    } catch (const NonFinite& e) {
      diagnostic_ = e.what();
      terminate(Termination::NonFinite);
      return false;
    }
    if (t > 0.0) {
      ++steps_;
      Classification c;
      try {
        c = classify(model_.integrals(), y, stop_thresholds_);
      } catch (const NonFinite& e) {
        diagnostic_ = e.what();
        terminate(Termination::NonFinite);
        return false;
      }
      if (c.regularity == Regularity::Singular) {
        diagnostic_ = c.diagnostic;
        terminate(Termination::SingularLocus);
        return false;
      }
    }
    return true;
  }

  void terminate(Termination t) {
    if (!terminated_) {
      terminated_ = true;
      termination_ = t;
    }
  }

  FlowResult finish() {
    ConservationReport r = conservation_report(result_.trajectory);
    r.steps = steps_;
    r.rejected = rejected_;
    r.termination = terminated_ ? termination_ : Termination::Completed;
    if (r.termination != Termination::Completed) r.diagnostic = diagnostic_;
    result_.report = std::move(r);
    return std::move(result_);
  }

  void fail_stage() {
    terminate(failure_ == Failure::NonFinite ? Termination::NonFinite : Termination::SingularLocus);
  }

  void run_rk4(State y, State k1) {
    const double t_end = cfg_.t_end;
    const auto n_steps = static_cast<std::size_t>(std::ceil(t_end / cfg_.dt - 1e-9));
    State k2(y.size()), k3(y.size()), k4(y.size()), tmp(y.size());
    for (std::size_t i = 0; i < n_steps; ++i) {
      if (steps_ >= cfg_.max_steps) return terminate(Termination::MaxSteps);
      const double t = static_cast<double>(i) * cfg_.dt;
      const bool last = i + 1 == n_steps;
      const double h = last ? t_end - t : cfg_.dt;
      if (i > 0 && !eval(y, k1)) return fail_stage();
      combine(y, 0.5 * h, {{1.0, &k1}}, tmp);
      if (!eval(tmp, k2)) return fail_stage();
      combine(y, 0.5 * h, {{1.0, &k2}}, tmp);
      if (!eval(tmp, k3)) return fail_stage();
      combine(y, h, {{1.0, &k3}}, tmp);
      if (!eval(tmp, k4)) return fail_stage();
      combine(y, h / 6.0, {{1.0, &k1}, {2.0, &k2}, {2.0, &k3}, {1.0, &k4}}, tmp);
      y.swap(tmp);
      if (!record(last ? t_end : t + h, y)) return;
    }
  }

  double initial_step(const State& y, const State& f0) {
    if (cfg_.dt > 0.0) return std::min(cfg_.dt, cfg_.t_end);
    // Hairer, Norsett & Wanner starting-step heuristic.
    auto scaled_rms = [&](const State& v) {
      double s = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double sc = cfg_.atol + cfg_.rtol * std::abs(y[i]);
        s += (v[i] / sc) * (v[i] / sc);
      }
      return std::sqrt(s / static_cast<double>(v.size()));
    };
    const double d0 = scaled_rms(y);
    const double d1 = scaled_rms(f0);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, cfg_.t_end);
    State y1(y.size()), f1(y.size());
    combine(y, h0, {{1.0, &f0}}, y1);
    if (!eval(y1, f1)) return h0 * 1e-3;
    State diff(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) diff[i] = f1[i] - f0[i];
    const double d2 = scaled_rms(diff) / h0;
    const double m = std::max(d1, d2);
    const double h1 = m <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / m, 1.0 / 5.0);
    return std::min({100.0 * h0, h1, cfg_.t_end});
  }

  void run_dopri(State y, State k1) {
    // Dormand-Prince 5(4), FSAL, advancing with the fifth-order solution.
    // The field is autonomous, so the node coefficients c_i are not needed.
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // Difference between the fifth- and fourth-order weights.
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    const double t_end = cfg_.t_end;
    const double min_step = 1e-14 * t_end;
    const std::size_t d = y.size();
    State k2(d), k3(d), k4(d), k5(d), k6(d), k7(d), tmp(d), y_new(d);
    double t = 0.0;
    double h = initial_step(y, k1);
    while (t < t_end) {
      if (steps_ >= cfg_.max_steps) return terminate(Termination::MaxSteps);
      bool last = false;
      if (t + h >= t_end) {
        h = t_end - t;
        last = true;
      }
      bool ok = true;
      combine(y, h, {{a21, &k1}}, tmp);
      ok = ok && eval(tmp, k2);
      if (ok) {
        combine(y, h, {{a31, &k1}, {a32, &k2}}, tmp);
        ok = eval(tmp, k3);
      }
      if (ok) {
        combine(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}, tmp);
        ok = eval(tmp, k4);
      }
      if (ok) {
        combine(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}, tmp);
        ok = eval(tmp, k5);
      }
      if (ok) {
        combine(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}, tmp);
        ok = eval(tmp, k6);
      }
      if (ok) {
        combine(y, h, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}}, y_new);
        ok = all_finite(y_new) && eval(y_new, k7);
      }
      if (!ok) {
        ++rejected_;
        h *= 0.2;
        if (h < min_step) {
          diagnostic_ = "step size collapsed at t = " + std::to_string(t) + ": " + diagnostic_;
          return terminate(failure_ == Failure::NonFinite ? Termination::NonFinite
                                                          : Termination::StepCollapse);
        }
        continue;
      }

      double err = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                              e7 * k7[i]);
        err = std::max(err, std::abs(e));
      }
      const double tol = cfg_.atol + cfg_.rtol * std::max(max_norm(y), max_norm(y_new));
      const double ratio = err / tol;
      if (ratio <= 1.0) {
        t = last ? t_end : t + h;
        y.swap(y_new);
        k1.swap(k7);
        if (!record(t, y)) return;
        const double factor = ratio == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(ratio, -0.2), 0.2, 5.0);
        h *= factor;
      } else {
        ++rejected_;
        h *= std::clamp(0.9 * std::pow(ratio, -0.2), 0.2, 1.0);
        if (h < min_step) {
          diagnostic_ = "step size collapsed at t = " + std::to_string(t) +
                        " (error estimate never met the tolerance)";
          return terminate(Termination::StepCollapse);
        }
      }
    }
  }

  const FieldModel& model_;
  const IntegratorConfig& cfg_;
  Thresholds stop_thresholds_;
  FlowResult result_;
  std::size_t steps_ = 0;
  std::size_t rejected_ = 0;
  bool terminated_ = false;
  Termination termination_ = Termination::Completed;
  Failure failure_ = Failure::None;
  std::string diagnostic_;
};

}  // namespace

FlowResult integrate(const FieldModel& model, std::span<const double> start,
                     const IntegratorConfig& config) {
  config.validate();
  return Runner(model, config).run(start);
}

OrderEstimate convergence_order(const FieldModel& model, std::span<const double> start, double dt,
                                double t_end) {
  IntegratorConfig cfg;
  cfg.method = Method::Rk4Fixed;
  cfg.t_end = t_end;
  cfg.singular_stop = model.thresholds().determinant_zero;
  auto final_state = [&](double step) {
    cfg.dt = step;
    FlowResult r = integrate(model, start, cfg);
    if (r.report.termination != Termination::Completed) {
      throw IntegrationFailure("rk4 run with dt=" + std::to_string(step) + " ended early (" +
                               std::string(to_string(r.report.termination)) + ")");
    }
    return r.trajectory.states.back();
  };
  const State coarse = final_state(dt);
  const State fine = final_state(dt / 2);
  const State reference = final_state(dt / 8);
  auto distance = [](const State& a, const State& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  OrderEstimate est;
  est.error_coarse = distance(coarse, reference);
  est.error_fine = distance(fine, reference);
  const double size = norm(reference);
  if (!std::isfinite(est.error_coarse) || est.error_coarse > 0.5 * (1.0 + size)) {
    throw IntegrationFailure("step too large: coarse solution is outside the asymptotic regime");
  }
  if (!(est.error_fine > 0.0) || est.error_fine >= est.error_coarse) {
    throw IntegrationFailure("errors do not decrease under step halving");
  }
  est.order = std::log2(est.error_coarse / est.error_fine);
  return est;
}

}  // namespace firstint
