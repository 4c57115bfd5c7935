#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "firstint/brackets.hpp"
#include "firstint/expr.hpp"

namespace firstint {

enum class Backend { Cramer, Solve, Both };
enum class Regularity { CaseI, CaseII, Singular };

std::string_view to_string(Backend b);
std::string_view to_string(Regularity r);
Backend parse_backend(std::string_view text);

struct Thresholds {
  /// A determinant counts as zero when |d| <= determinant_zero * Hadamard bound.
  double determinant_zero = 1e-9;
  /// Rank pivot floor relative to the largest entry.
  double rank_pivot = kDefaultRankThreshold;
  /// Relative residual above which a case-ii drift is reported as inconsistent.
  double drift_consistency = 1e-8;
};

/// Integrals, Hamiltonian and the free multiplier of the kernel term.
class FieldModel {
 public:
  FieldModel(IntegralSet integrals, Expression hamiltonian, Expression lambda = Expression(),
             Backend backend = Backend::Both, Thresholds thresholds = {});

  const IntegralSet& integrals() const noexcept { return integrals_; }
  const PhaseSpace& space() const noexcept { return integrals_.space(); }
  const Expression& hamiltonian() const noexcept { return hamiltonian_; }
  const Expression& lambda() const noexcept { return lambda_; }
  Backend backend() const noexcept { return backend_; }
  const Thresholds& thresholds() const noexcept { return thresholds_; }

  const CompiledFunction& compiled_hamiltonian() const noexcept { return h_; }
  const CompiledFunction& compiled_lambda() const noexcept { return lambda_fn_; }

  FieldModel with_lambda(Expression lambda) const;
  FieldModel with_backend(Backend backend) const;
  FieldModel with_thresholds(Thresholds thresholds) const;

 private:
  IntegralSet integrals_;
  Expression hamiltonian_;
  Expression lambda_;
  Backend backend_;
  Thresholds thresholds_;
  CompiledFunction h_;
  CompiledFunction lambda_fn_;
};

struct Classification {
  Regularity regularity = Regularity::Singular;
  BracketValue s0;
  BracketValue sn;
  int rank = 0;           // of the full N x 2N Jacobian
  int momentum_rank = 0;  // of df/dy
  std::string diagnostic;
};

Classification classify(const Matrix& jacobian, const Thresholds& thresholds = {});
Classification classify(const IntegralSet& fs, std::span<const double> point,
                        const Thresholds& thresholds = {});

/// Time derivative of each f_alpha along the canonical field of H:
/// sum_k (df/dx_k dH/dy_k - df/dy_k dH/dx_k).
std::vector<double> canonical_drift(const IntegralSet& fs, const Expression& hamiltonian,
                                    std::span<const double> point);

/// w_k = kernel_bracket(k). Throws DegenerateKernel unless the point is case ii
/// and w is not negligible.
std::vector<double> kernel_vector(const IntegralSet& fs, std::span<const double> point,
                                  const Thresholds& thresholds = {});

struct FieldSample {
  std::vector<double> point;
  std::vector<double> velocity;
  Regularity regularity = Regularity::Singular;
  BracketValue s0;
  BracketValue sn;
  /// |J_y c + drift| relative to the rounding scale of its terms.
  double correction_residual = 0.0;
  /// Largest |c_cramer - c_solve| over max(|c|) when both backends ran, else 0.
  double backend_discrepancy = 0.0;
  Backend backend_used = Backend::Solve;
  std::vector<double> correction;
  std::vector<double> kernel;  // empty outside case ii
  /// Case ii with a vanishing kernel bracket vector: the lambda-term is inactive.
  bool kernel_degenerate = false;
};

/// Velocity of the constructed field: xdot = dH/dy, ydot = -dH/dx + c (+ lambda w).
FieldSample build_field(const FieldModel& model, std::span<const double> point);

/// Writes the velocity only; same semantics as build_field.
void evaluate_field(const FieldModel& model, std::span<const double> point,
                    std::span<double> velocity);

double lie_derivative(const Expression& f, const FieldModel& model, std::span<const double> point);

}  // namespace firstint
