#include "firstint/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "firstint/errors.hpp"

namespace firstint::cli {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double number_at(const json& j, const std::string& what) {
  if (!j.is_number()) throw ValidationError(what + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(what + " must be finite");
  return v;
}

std::string string_at(const json& j, const std::string& what) {
  if (!j.is_string()) throw ValidationError(what + " must be a string");
  return j.get<std::string>();
}

std::vector<double> numbers_at(const json& j, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + " must be an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(number_at(j[i], what + "[" + std::to_string(i) + "]"));
  }
  return out;
}

/// Scalars bind as is; an array "a": [..] binds a1, a2, ...
Bindings bindings_at(const json& j, const std::string& what) {
  if (!j.is_object()) throw ValidationError(what + " must be an object");
  Bindings b;
  for (const auto& [key, value] : j.items()) {
    if (value.is_array()) {
      const auto values = numbers_at(value, what + "." + key);
      for (std::size_t i = 0; i < values.size(); ++i) b[key + std::to_string(i + 1)] = values[i];
    } else {
      b[key] = number_at(value, what + "." + key);
    }
  }
  return b;
}

Expression parse_field(const json& j, const std::string& key, const Scenario& s) {
  const std::string text = string_at(j, key);
  try {
    return parse(text, s.space, s.parameter_names());
  } catch (const SyntaxError& e) {
    throw SyntaxError(e.position(), std::string("in \"") + key + "\": " + e.what());
  }
}

IntegratorConfig integrator_at(const json& j) {
  IntegratorConfig cfg;
  cfg.t_end = 10.0;
  if (!j.is_object()) throw ValidationError("\"integrator\" must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "method") {
      cfg.method = parse_method(string_at(value, "integrator.method"));
    } else if (key == "dt") {
      cfg.dt = number_at(value, "integrator.dt");
    } else if (key == "rtol") {
      cfg.rtol = number_at(value, "integrator.rtol");
    } else if (key == "atol") {
      cfg.atol = number_at(value, "integrator.atol");
    } else if (key == "t_end") {
      cfg.t_end = number_at(value, "integrator.t_end");
    } else {
      throw ValidationError("unknown integrator key \"" + key + "\"");
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace

ScenarioFile parse_scenario_file(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("scenario file must be a JSON object");
  static const ParameterNames kKeys = {"n",       "params",  "builtin", "builtin_params",
                                       "integrals", "hamiltonian", "lambda", "initial",
                                       "integrator", "backend", "names"};
  for (const auto& [key, value] : doc.items()) {
    if (!kKeys.contains(key)) throw ValidationError("unknown key \"" + key + "\"");
  }
  const bool builtin = doc.contains("builtin");
  if (builtin == doc.contains("integrals")) {
    throw ValidationError("exactly one of \"builtin\" and \"integrals\" is required");
  }

  ScenarioFile file;
  file.integrator.t_end = 10.0;
  Bindings extra = doc.contains("params") ? bindings_at(doc["params"], "params") : Bindings{};
  Scenario& s = file.scenario;
  if (builtin) {
    const Bindings bp =
        doc.contains("builtin_params") ? bindings_at(doc["builtin_params"], "builtin_params") : Bindings{};
    s = materialize(string_at(doc["builtin"], "builtin"), bp);
    for (const auto& [k, v] : extra) {
      if (s.bindings.contains(k)) throw ValidationError("params." + k + " shadows a builtin parameter");
      s.bindings[k] = v;
    }
    if (doc.contains("n") && number_at(doc["n"], "n") != s.space.n()) {
      throw ValidationError("\"n\" does not match builtin " + s.name);
    }
  } else {
    if (doc.contains("builtin_params")) throw ValidationError("\"builtin_params\" requires \"builtin\"");
    if (!doc.contains("n")) throw ValidationError("\"n\" is required");
    const double n = number_at(doc["n"], "n");
    if (n != std::floor(n)) throw ValidationError("\"n\" must be an integer");
    s.name = "file";
    s.space = PhaseSpace(static_cast<int>(n));
    s.bindings = std::move(extra);
    const json& integrals = doc["integrals"];
    if (!integrals.is_array() || static_cast<int>(integrals.size()) != s.space.n()) {
      throw ValidationError("\"integrals\" must be an array of n expression strings");
    }
    for (std::size_t i = 0; i < integrals.size(); ++i) {
      s.integrals.push_back(parse_field(integrals[i], "integrals[" + std::to_string(i) + "]", s));
      s.integral_names.push_back("f" + std::to_string(i + 1));
    }
    if (!doc.contains("hamiltonian")) throw ValidationError("\"hamiltonian\" is required");
    if (!doc.contains("initial")) throw ValidationError("\"initial\" is required");
    s.lambda = Expression::constant(0.0);
  }
  if (doc.contains("names")) {
    const json& names = doc["names"];
    if (!names.is_array() || static_cast<int>(names.size()) != s.space.n()) {
      throw ValidationError("\"names\" must list one name per integral");
    }
    for (std::size_t i = 0; i < names.size(); ++i) s.integral_names[i] = string_at(names[i], "names");
  }
  if (doc.contains("hamiltonian")) s.hamiltonian = parse_field(doc["hamiltonian"], "hamiltonian", s);
  if (doc.contains("lambda")) s.lambda = parse_field(doc["lambda"], "lambda", s);
  if (doc.contains("initial")) {
    s.initial = numbers_at(doc["initial"], "initial");
    if (static_cast<int>(s.initial.size()) != s.space.dimension()) {
      throw ValidationError("\"initial\" must have 2n = " + std::to_string(s.space.dimension()) +
                            " entries");
    }
  }
  if (doc.contains("integrator")) file.integrator = integrator_at(doc["integrator"]);
  if (doc.contains("backend")) file.backend = parse_backend(string_at(doc["backend"], "backend"));

  // Every expression must evaluate against the binding table.
  for (const Expression& e : s.expressions()) {
    for (const std::string& p : e.parameters()) {
      if (!s.bindings.contains(p)) throw ValidationError("parameter '" + p + "' has no value");
    }
  }
  s.integral_set();  // compiles every integral against the bindings
  return file;
}

ScenarioFile load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_file(buf.str());
}

std::string trajectory_csv(const Trajectory& trajectory, const PhaseSpace& space) {
  std::string out = "t";
  for (int i = 0; i < space.dimension(); ++i) out += "," + space.variable_name(i);
  for (int i = 0; i < space.n(); ++i) out += ",f" + std::to_string(i + 1);
  out += '\n';
  for (std::size_t r = 0; r < trajectory.size(); ++r) {
    out += format_double(trajectory.times[r]);
    for (double v : trajectory.states[r]) out += "," + format_double(v);
    for (double v : trajectory.integrals[r]) out += "," + format_double(v);
    out += '\n';
  }
  return out;
}

Trajectory read_trajectory_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty trajectory file");
  std::vector<std::string> header;
  {
    std::istringstream h(line);
    std::string cell;
    while (std::getline(h, cell, ',')) header.push_back(cell);
  }
  std::size_t n_integrals = 0;
  for (const std::string& c : header) n_integrals += (!c.empty() && c[0] == 'f') ? 1 : 0;
  const std::size_t dim = header.size() - 1 - n_integrals;
  if (header.empty() || header[0] != "t" || dim != 2 * n_integrals) {
    throw ValidationError("unexpected trajectory header");
  }
  Trajectory t;
  for (std::size_t i = 0; i < n_integrals; ++i) t.integral_names.push_back("f" + std::to_string(i + 1));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      char* end = nullptr;
      row.push_back(std::strtod(cell.c_str(), &end));
      if (end == cell.c_str() || *end != '\0') throw ValidationError("bad number '" + cell + "'");
    }
    if (row.size() != header.size()) throw ValidationError("row length does not match header");
    t.times.push_back(row[0]);
    t.states.emplace_back(row.begin() + 1, row.begin() + 1 + dim);
    t.integrals.emplace_back(row.begin() + 1 + dim, row.end());
  }
  return t;
}

std::string report_json(const ConservationReport& report) {
  ordered_json j;
  j["termination"] = std::string(to_string(report.termination));
  j["steps"] = report.steps;
  j["rejected"] = report.rejected;
  j["integrals"] = ordered_json::array();
  for (const IntegralDrift& d : report.integrals) {
    ordered_json e;
    e["name"] = d.name;
    e["initial"] = d.initial;
    e["max_abs_drift"] = d.max_abs_drift;
    e["max_rel_drift"] = d.max_rel_drift;
    j["integrals"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

void write_file_atomically(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw ValidationError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

std::vector<double> parse_point(const std::string& text, const PhaseSpace& space) {
  std::vector<double> p;
  std::istringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || *end != '\0' || !std::isfinite(v)) {
      throw ValidationError("--point: bad number '" + cell + "'");
    }
    p.push_back(v);
  }
  if (static_cast<int>(p.size()) != space.dimension()) {
    throw ValidationError("--point needs " + std::to_string(space.dimension()) + " values");
  }
  return p;
}

ordered_json matrix_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (double v : m.row(r)) row.push_back(v);
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json bracket_json(const BracketValue& b) {
  ordered_json j;
  j["value"] = b.value;
  j["relative"] = b.relative();
  return j;
}

struct Options {
  std::string file;
  std::string point;
  std::string backend;
  std::string out_path;
  std::string report_path;
  std::string scenario_name;
  int samples = 64;
  unsigned long long seed = 1;
  double t_end = 0.0;
  double max_drift = 0.0;
};

std::vector<double> chosen_point(const Options& o, const Scenario& s) {
  return o.point.empty() ? s.initial : parse_point(o.point, s.space);
}

int cmd_check(const Options& o, std::ostream& out) {
  const ScenarioFile file = load_scenario_file(o.file);
  const Scenario& s = file.scenario;
  const FieldModel model = s.model(file.backend);
  const IntegralSet& fs = model.integrals();
  const std::vector<double> p = chosen_point(o, s);

  const Matrix jac = fs.jacobian(p);
  const Classification cls = classify(jac, model.thresholds());
  out << "scenario: " << s.name << " (N=" << s.space.n() << ")\n";
  out << "independence rank: " << cls.rank << "\n";
  if (cls.rank < s.space.n()) {
    throw ValidationError("integrals are rank deficient at the point (rank " +
                          std::to_string(cls.rank) + ")");
  }
  out << "involution matrix:\n";
  const Matrix inv = involution_matrix(jac);
  for (std::size_t r = 0; r < inv.rows(); ++r) {
    out << " ";
    for (double v : inv.row(r)) out << " " << std::setw(24) << format_double(v);
    out << "\n";
  }
  out << "s_zero: " << format_double(cls.s0.value) << " (relative " << format_double(cls.s0.relative())
      << ")\n";
  out << "s_n: " << format_double(cls.sn.value) << " (relative " << format_double(cls.sn.relative())
      << ")\n";
  out << "classification: " << to_string(cls.regularity);
  if (!cls.diagnostic.empty()) out << " (" << cls.diagnostic << ")";
  out << "\n";
  if (cls.regularity == Regularity::Singular) throw SingularLocus(cls.diagnostic);

  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> offset(-0.1, 0.1);
  std::vector<CompiledFunction> compiled;
  for (int a = 0; a < fs.size(); ++a) compiled.push_back(fs.compiled(a));

  int evaluated = 0;
  int skipped = 0;
  int failed = 0;
  double worst = 0.0;
  std::vector<double> grad(p.size());
  for (int k = 0; k <= o.samples; ++k) {
    std::vector<double> q = p;
    if (k > 0) {
      for (double& v : q) v += offset(rng) * std::max(1.0, std::abs(v));
    }
    FieldSample sample;
    try {
      sample = build_field(model, q);
    } catch (const Error&) {
      if (k == 0) throw;
      ++skipped;
      continue;
    }
    ++evaluated;
    const double vnorm = norm(sample.velocity);
    for (int a = 0; a < fs.size(); ++a) {
      compiled[a].value_and_gradient(q, grad);
      double lie = 0.0;
      for (std::size_t i = 0; i < grad.size(); ++i) lie += grad[i] * sample.velocity[i];
      const double tol = 1e-9 * (1.0 + norm(grad) * vnorm);
      worst = std::max(worst, std::abs(lie) / tol);
      if (std::abs(lie) > tol) {
        ++failed;
        out << "  FAIL " << fs.name(a) << " at sample " << k << ": L f = " << format_double(lie)
            << "\n";
      }
    }
  }
  out << "lie-derivative check: " << evaluated << " points, " << skipped
      << " skipped (singular or outside domain), worst |L f|/tol = " << format_double(worst) << "\n";
  out << (failed == 0 ? "result: ok\n" : "result: FAILED\n");
  return failed == 0 ? kSuccess : kVerificationFailure;
}

int cmd_field(const Options& o, std::ostream& out) {
  const ScenarioFile file = load_scenario_file(o.file);
  const Backend backend = o.backend.empty() ? file.backend : parse_backend(o.backend);
  const FieldModel model = file.scenario.model(backend);
  const FieldSample s = build_field(model, chosen_point(o, file.scenario));
  ordered_json j;
  j["point"] = s.point;
  j["velocity"] = s.velocity;
  j["case"] = std::string(to_string(s.regularity));
  j["s0"] = s.s0.value;
  j["sN"] = s.sn.value;
  j["residual"] = s.correction_residual;
  j["backend"] = std::string(to_string(s.backend_used));
  j["backend_discrepancy"] = s.backend_discrepancy;
  j["correction"] = s.correction;
  if (!s.kernel.empty()) j["kernel"] = s.kernel;
  out << j.dump(2) << "\n";
  return kSuccess;
}

int cmd_brackets(const Options& o, std::ostream& out) {
  const ScenarioFile file = load_scenario_file(o.file);
  const IntegralSet fs = file.scenario.integral_set();
  const Matrix jac = fs.jacobian(chosen_point(o, file.scenario));
  const int n = fs.size();
  ordered_json j;
  j["poisson"] = matrix_json(involution_matrix(jac));
  j["s0"] = bracket_json(s_zero(jac));
  j["sN"] = bracket_json(s_n(jac));
  Matrix cof(n, n);
  for (int a = 0; a < n; ++a) {
    for (int k = 0; k < n; ++k) cof(a, k) = cofactor_bracket(jac, a, k).value;
  }
  j["cofactors"] = matrix_json(cof);
  std::vector<double> kernel;
  for (int k = 0; k < n; ++k) kernel.push_back(kernel_bracket(jac, k).value);
  j["kernel"] = kernel;
  j["rank"] = independence_rank(jac);
  out << j.dump(2) << "\n";
  return kSuccess;
}

int cmd_integrate(const Options& o, std::ostream& out, std::ostream& err) {
  ScenarioFile file = load_scenario_file(o.file);
  if (o.t_end > 0.0) file.integrator.t_end = o.t_end;
  const FieldModel model = file.scenario.model(file.backend);
  const FlowResult r = integrate(model, file.scenario.initial, file.integrator);
  out << "termination: " << to_string(r.report.termination) << ", steps " << r.report.steps
      << ", rejected " << r.report.rejected << "\n";
  for (const IntegralDrift& d : r.report.integrals) {
    out << "  " << d.name << ": initial " << format_double(d.initial) << ", max rel drift "
        << format_double(d.max_rel_drift) << "\n";
  }
  if (r.report.termination != Termination::Completed) {
    err << "error: integration stopped early: " << r.report.diagnostic << "\n";
    return kMathFailure;
  }
  if (o.max_drift > 0.0 && r.report.max_rel_drift() > o.max_drift) {
    err << "error: relative drift " << format_double(r.report.max_rel_drift())
        << " exceeds --max-drift " << format_double(o.max_drift) << "\n";
    return kVerificationFailure;
  }
  write_file_atomically(o.out_path, trajectory_csv(r.trajectory, model.space()));
  write_file_atomically(o.report_path, report_json(r.report));
  return kSuccess;
}

int cmd_scenarios(std::ostream& out) {
  for (const ScenarioSummary& s : list_builtins()) {
    out << std::left << std::setw(10) << s.name << "  " << s.description << "\n";
  }
  return kSuccess;
}

int cmd_show(const Options& o, std::ostream& out) {
  const ScenarioSummary& summary = builtin_summary(o.scenario_name);
  const Scenario s = materialize(o.scenario_name);
  out << s.name << ": " << summary.description << "\n";
  out << "parameters:\n";
  if (summary.parameters.empty()) out << "  (none)\n";
  for (const ParameterInfo& p : summary.parameters) {
    out << "  " << p.name << " (default " << p.default_value << "; " << p.constraint << ")\n";
  }
  out << "degrees of freedom: " << s.space.n() << "\n";
  out << "integrals:\n";
  for (std::size_t i = 0; i < s.integrals.size(); ++i) {
    out << "  " << s.integral_names[i] << " = " << to_text(s.integrals[i]) << "\n";
  }
  out << "hamiltonian: " << to_text(s.hamiltonian) << "\n";
  out << "lambda: " << to_text(s.lambda) << "\n";
  out << "default initial point:";
  for (double v : s.initial) out << " " << format_double(v);
  out << "\nidentities:\n";
  for (const std::string& id : s.identities) out << "  " << id << "\n";
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Vector fields with a prescribed complete set of first integrals"};
  app.require_subcommand(1);
  Options o;

  auto* check = app.add_subcommand("check", "Regularity, involution and conservation checks");
  check->add_option("file", o.file, "Scenario JSON file")->required();
  check->add_option("--point", o.point, "Comma-separated point (default: the file's initial point)");
  check->add_option("--samples", o.samples, "Random points for the Lie-derivative check")
      ->check(CLI::NonNegativeNumber);
  check->add_option("--seed", o.seed, "Seed for the random sampling");

  auto* field = app.add_subcommand("field", "Evaluate the constructed field at a point as JSON");
  field->add_option("file", o.file, "Scenario JSON file")->required();
  field->add_option("--point", o.point, "Comma-separated point");
  field->add_option("--backend", o.backend, "Correction backend")->check(CLI::IsMember({"cramer", "solve", "both"}));

  auto* brackets = app.add_subcommand("brackets", "Poisson matrix and determinant brackets as JSON");
  brackets->add_option("file", o.file, "Scenario JSON file")->required();
  brackets->add_option("--point", o.point, "Comma-separated point");

  auto* integ = app.add_subcommand("integrate", "Integrate and write trajectory CSV and report JSON");
  integ->add_option("file", o.file, "Scenario JSON file")->required();
  integ->add_option("--out", o.out_path, "Trajectory CSV path")->required();
  integ->add_option("--report", o.report_path, "Report JSON path")->required();
  integ->add_option("--t-end", o.t_end, "Override the final time");
  integ->add_option("--max-drift", o.max_drift, "Fail with exit 4 above this relative drift");

  auto* list = app.add_subcommand("scenarios", "List builtin scenarios");
  auto* scenario = app.add_subcommand("scenario", "Builtin scenario details");
  scenario->require_subcommand(1);
  auto* show = scenario->add_subcommand("show", "Parameter schema and expressions");
  show->add_option("name", o.scenario_name, "Builtin scenario name")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    if (app.get_subcommands().empty()) err << app.help();
    return kUsage;
  }

  try {
    if (check->parsed()) return cmd_check(o, out);
    if (field->parsed()) return cmd_field(o, out);
    if (brackets->parsed()) return cmd_brackets(o, out);
    if (integ->parsed()) return cmd_integrate(o, out, err);
    if (list->parsed()) return cmd_scenarios(out);
    if (show->parsed()) return cmd_show(o, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const SyntaxError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const UnknownVariable& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kMathFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  }
  return kUsage;
}

}  // namespace firstint::cli
