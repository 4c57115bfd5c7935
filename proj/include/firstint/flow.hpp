#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "firstint/constructor.hpp"

namespace firstint {

enum class Method { Rk4Fixed, Adaptive45 };

std::string_view to_string(Method m);
Method parse_method(std::string_view text);

struct IntegratorConfig {
  Method method = Method::Adaptive45;
  double dt = 1e-2;  // fixed step; initial step guess for the adaptive method (<= 0: automatic)
  double rtol = 1e-10;
  double atol = 1e-12;
  double t_end = 1.0;
  std::size_t max_steps = 10'000'000;
  /// Determinant-zero threshold used by the singular-locus check at accepted steps.
  double singular_stop = 1e-9;

  /// Throws ValidationError on an invalid combination.
  void validate() const;
};

struct Trajectory {
  std::vector<std::string> integral_names;
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> integrals;  // f_1..f_N at each state

  std::size_t size() const noexcept { return times.size(); }
};

enum class Termination { Completed, SingularLocus, StepCollapse, NonFinite, MaxSteps };

std::string_view to_string(Termination t);

struct IntegralDrift {
  std::string name;
  double initial = 0.0;
  double max_abs_drift = 0.0;
  double max_rel_drift = 0.0;  // |f - f0| / (1 + |f0|)
};

struct ConservationReport {
  std::vector<IntegralDrift> integrals;
  std::size_t steps = 0;
  std::size_t rejected = 0;
  Termination termination = Termination::Completed;
  std::string diagnostic;

  double max_rel_drift() const;
};

struct FlowResult {
  Trajectory trajectory;
  ConservationReport report;
};

/// Integrates the constructed field from `start`. Integral values are only
/// recorded, never projected back.
FlowResult integrate(const FieldModel& model, std::span<const double> start,
                     const IntegratorConfig& config);

/// Drift statistics of a recorded trajectory. Step counters are derived from
/// the number of rows; rejected steps are unknown and reported as 0.
ConservationReport conservation_report(const Trajectory& trajectory);

struct OrderEstimate {
  double order = 0.0;
  double error_coarse = 0.0;  // |x(dt) - x(dt/8)|
  double error_fine = 0.0;    // |x(dt/2) - x(dt/8)|
};

/// Empirical RK4 order by step halving, with the dt/8 run as reference.
/// Throws when a run does not complete or the errors do not decrease.
OrderEstimate convergence_order(const FieldModel& model, std::span<const double> start, double dt,
                                double t_end);

}  // namespace firstint
