#include "firstint/constructor.hpp"

#include <algorithm>
#include <cmath>

#include "firstint/errors.hpp"

namespace firstint {

std::string_view to_string(Backend b) {
  switch (b) {
    case Backend::Cramer: return "cramer";
    case Backend::Solve: return "solve";
    case Backend::Both: return "both";
  }
  return "?";
}

std::string_view to_string(Regularity r) {
  switch (r) {
    case Regularity::CaseI: return "CaseI";
    case Regularity::CaseII: return "CaseII";
    case Regularity::Singular: return "Singular";
  }
  return "?";
}

Backend parse_backend(std::string_view text) {
  if (text == "cramer") return Backend::Cramer;
  if (text == "solve") return Backend::Solve;
  if (text == "both") return Backend::Both;
  throw ValidationError("unknown backend '" + std::string(text) + "'");
}

FieldModel::FieldModel(IntegralSet integrals, Expression hamiltonian, Expression lambda,
                       Backend backend, Thresholds thresholds)
    : integrals_(std::move(integrals)),
      hamiltonian_(std::move(hamiltonian)),
      lambda_(std::move(lambda)),
      backend_(backend),
      thresholds_(thresholds),
      h_(hamiltonian_, integrals_.bindings(), integrals_.space().dimension()),
      lambda_fn_(lambda_, integrals_.bindings(), integrals_.space().dimension()) {}

FieldModel FieldModel::with_lambda(Expression lambda) const {
  return FieldModel(integrals_, hamiltonian_, std::move(lambda), backend_, thresholds_);
}

FieldModel FieldModel::with_backend(Backend backend) const {
  return FieldModel(integrals_, hamiltonian_, lambda_, backend, thresholds_);
}

FieldModel FieldModel::with_thresholds(Thresholds thresholds) const {
  return FieldModel(integrals_, hamiltonian_, lambda_, backend_, thresholds);
}

Classification classify(const Matrix& jacobian, const Thresholds& thresholds) {
  const int n = static_cast<int>(jacobian.rows());
  Classification c;
  c.rank = independence_rank(jacobian, thresholds.rank_pivot);
  c.s0 = s_zero(jacobian);
  c.sn = s_n(jacobian);
  c.momentum_rank = numerical_rank(momentum_block(jacobian), thresholds.rank_pivot);
  if (!c.s0.vanishes(thresholds.determinant_zero)) {
    c.regularity = Regularity::CaseI;
    return c;
  }
  // |S|_0 already says df/dy is singular; a full numerical rank only means the
  // two tests disagree near the threshold, which still is corank one.
  if (c.momentum_rank < n - 1) {
    c.diagnostic = "|S|_0 vanishes and df/dy has rank " + std::to_string(c.momentum_rank) +
                   " (corank above one)";
    if (c.rank < n) c.diagnostic += "; integrals are rank deficient";
    return c;
  }
  // Dependent integrals with a corank-one df/dy still admit the least-squares
  // correction; build_field rejects it when the drift leaves the range.
  c.regularity = Regularity::CaseII;
  if (c.rank < n) {
    c.diagnostic = "integrals are rank deficient: rank " + std::to_string(c.rank) + " < " +
                   std::to_string(n);
  } else if (c.sn.vanishes(thresholds.determinant_zero)) {
    c.diagnostic = "|S|_N vanishes";
  }
  return c;
}

Classification classify(const IntegralSet& fs, std::span<const double> point,
                        const Thresholds& thresholds) {
  return classify(fs.jacobian(point), thresholds);
}

namespace {

struct Drift {
  std::vector<double> value;
  std::vector<double> scale;
};

Drift drift_of(const Matrix& jacobian, std::span<const double> grad_h) {
  const std::size_t n = jacobian.rows();
  Drift d{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t a = 0; a < n; ++a) {
    d.value[a] = poisson(jacobian.row(a), grad_h);
    d.scale[a] = poisson_scale(jacobian.row(a), grad_h);
  }
  return d;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

std::vector<double> canonical_drift(const IntegralSet& fs, const Expression& hamiltonian,
                                    std::span<const double> point) {
  const CompiledFunction h(hamiltonian, fs.bindings(), fs.space().dimension());
  std::vector<double> grad_h(point.size());
  h.value_and_gradient(point, grad_h);
  return drift_of(fs.jacobian(point), grad_h).value;
}

std::vector<double> kernel_vector(const IntegralSet& fs, std::span<const double> point,
                                  const Thresholds& thresholds) {
  const Matrix j = fs.jacobian(point);
  const Classification c = classify(j, thresholds);
  if (c.regularity != Regularity::CaseII) {
    throw DegenerateKernel("kernel direction requested at a " +
                           std::string(to_string(c.regularity)) + " point" +
                           (c.diagnostic.empty() ? "" : ": " + c.diagnostic));
  }
  const int n = fs.size();
  std::vector<double> w(n);
  double scale = 0.0;
  for (int k = 0; k < n; ++k) {
    const BracketValue b = kernel_bracket(j, k);
    w[k] = b.value;
    scale = std::max(scale, b.scale);
  }
  if (norm(w) <= thresholds.determinant_zero * scale) {
    throw DegenerateKernel("kernel direction vanishes");
  }
  return w;
}

FieldSample build_field(const FieldModel& model, std::span<const double> point) {
  const IntegralSet& fs = model.integrals();
  const int n = fs.size();
  const Thresholds& th = model.thresholds();

  FieldSample s;
  s.point.assign(point.begin(), point.end());
  const Matrix j = fs.jacobian(point);
  const Classification cls = classify(j, th);
  s.regularity = cls.regularity;
  s.s0 = cls.s0;
  s.sn = cls.sn;
  if (cls.regularity == Regularity::Singular) throw SingularLocus(cls.diagnostic);

  std::vector<double> grad_h(point.size());
  model.compiled_hamiltonian().value_and_gradient(point, grad_h);
  const Drift drift = drift_of(j, grad_h);
  const Matrix fy = momentum_block(j);
  std::vector<double> rhs(n);
  for (int a = 0; a < n; ++a) rhs[a] = -drift.value[a];

  std::vector<double> c;
  if (cls.regularity == Regularity::CaseI) {
    std::vector<double> cramer;
    std::vector<double> solved;
    if (model.backend() != Backend::Solve) {
      // c_k = (1/|S|_0) sum_j {H,f_j} cofactor(j,k), with {H,f_j} = -drift_j.
      cramer.assign(n, 0.0);
      for (int k = 0; k < n; ++k) {
        double sum = 0.0;
        for (int jj = 0; jj < n; ++jj) sum += rhs[jj] * cofactor_bracket(j, jj, k).value;
        cramer[k] = sum / cls.s0.value;
      }
    }
    if (model.backend() != Backend::Cramer) {
      auto x = solve(fy, rhs);
      if (!x) throw SingularLocus("df/dy is exactly singular");
      solved = std::move(*x);
    }
    if (model.backend() == Backend::Both) {
      const double mag = std::max(max_abs(cramer), max_abs(solved));
      double diff = 0.0;
      for (int k = 0; k < n; ++k) diff = std::max(diff, std::abs(cramer[k] - solved[k]));
      s.backend_discrepancy = mag > 0.0 ? diff / mag : 0.0;
    }
    s.backend_used = model.backend() == Backend::Cramer ? Backend::Cramer : Backend::Solve;
    c = s.backend_used == Backend::Cramer ? std::move(cramer) : std::move(solved);
  } else {
    c = min_norm_least_squares(fy, rhs, th.rank_pivot);
    s.backend_used = Backend::Solve;
  }

  auto applied = multiply(fy, c);
  for (int a = 0; a < n; ++a) applied[a] += drift.value[a];
  const double residual = norm(applied);
  const double scale = norm(drift.scale) + frobenius_norm(fy) * norm(c);
  s.correction_residual = residual == 0.0 ? 0.0 : residual / scale;
  if (cls.regularity == Regularity::CaseII && s.correction_residual > th.drift_consistency) {
    throw InconsistentDrift("canonical drift is not in the range of df/dy (relative residual " +
                            std::to_string(s.correction_residual) + ")");
  }

  s.velocity.assign(2 * n, 0.0);
  for (int k = 0; k < n; ++k) {
    s.velocity[k] = grad_h[n + k];
    s.velocity[n + k] = -grad_h[k] + c[k];
  }
  if (cls.regularity == Regularity::CaseII) {
    const double lambda = model.compiled_lambda().value(point);
    s.kernel.resize(n);
    double scale = 0.0;
    for (int k = 0; k < n; ++k) {
      const BracketValue b = kernel_bracket(j, k);
      s.kernel[k] = b.value;
      scale = std::max(scale, b.scale);
      s.velocity[n + k] += lambda * s.kernel[k];
    }
    s.kernel_degenerate = norm(s.kernel) <= th.determinant_zero * scale;
  }
  s.correction = std::move(c);
  return s;
}

void evaluate_field(const FieldModel& model, std::span<const double> point,
                    std::span<double> velocity) {
  const FieldSample s = build_field(model, point);
  std::copy(s.velocity.begin(), s.velocity.end(), velocity.begin());
}

double lie_derivative(const Expression& f, const FieldModel& model, std::span<const double> point) {
  const FieldSample s = build_field(model, point);
  const CompiledFunction fn(f, model.integrals().bindings(), model.space().dimension());
  std::vector<double> g(point.size());
  fn.value_and_gradient(point, g);
  double sum = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) sum += g[i] * s.velocity[i];
  return sum;
}

}  // namespace firstint
