#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "firstint/constructor.hpp"
#include "firstint/expr.hpp"

namespace firstint {

struct ParameterInfo {
  std::string name;
  std::string default_value;
  std::string constraint;
};

struct ScenarioSummary {
  std::string name;
  std::string description;
  std::vector<ParameterInfo> parameters;
};

/// A materialized builtin: integrals, Hamiltonian, multiplier and a default
/// starting point away from the singular locus.
struct Scenario {
  std::string name;
  PhaseSpace space{1};
  std::vector<std::string> integral_names;
  std::vector<Expression> integrals;
  Expression hamiltonian;
  Expression lambda;
  Bindings bindings;
  std::vector<double> initial;
  /// Extra named expressions used by identity checks (e.g. the generating function F).
  std::map<std::string, Expression> auxiliary;
  /// Human-readable statements of the identities the family satisfies.
  std::vector<std::string> identities;

  ParameterNames parameter_names() const;
  IntegralSet integral_set() const;
  FieldModel model(Backend backend = Backend::Both, Thresholds thresholds = {}) const;
  /// All expressions of the scenario: integrals, H, lambda, auxiliaries.
  std::vector<Expression> expressions() const;
};

const std::vector<ScenarioSummary>& list_builtins();
const ScenarioSummary& builtin_summary(std::string_view name);

/// Builds a builtin. Unspecified parameters take their defaults; unknown
/// names and constraint violations raise ParameterViolation.
Scenario materialize(std::string_view name, const Bindings& params = {});

}  // namespace firstint
