#include "qbat/report.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "qbat/errors.hpp"
#include "qbat/random.hpp"

namespace qbat {

std::vector<double> RunRow::values() const {
  return {t,       battery_energy, entropy,     w_max,     p_direct, p_finite_difference,
          sigma_f, qfi,            kernel_term, bound_rhs, slack};
}

std::string scenario_hash(const Scenario& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_scenario(s)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunRecord run_scenario(const Scenario& s) {
  s.validate();
  const ThermoContext ctx = s.thermo();
  const auto& reg = s.regularization;
  const DensityMatrix rho0 = s.initial_density();
  const std::vector<double> times = s.times.points();
  const double e0 = eig_hermitian(s.battery_hamiltonian).eigenvalues.minCoeff();

  Trajectory traj;
  std::vector<double> p_direct;
  std::vector<BoundReport> bounds;
  if (s.kind == ScenarioKind::kClosed) {
    const ClosedModel& model = *s.closed_model;
    traj = evolve_closed(model, rho0, times);
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const DensityMatrix& full = (*traj.full_states)[k];
      p_direct.push_back(power_closed(full, ctx, reg, model));
      bounds.push_back(open_bound_from_derivative(traj.states[k], reduced_battery_rhs(model, full),
                                                  ctx, reg, s.rank_tol));
    }
  } else {
    const LindbladModel& model = *s.lindblad_model;
    traj = evolve_lindblad(model, rho0, times, s.step);
    for (const auto& rho : traj.states) {
      p_direct.push_back(power_open(model, rho, ctx, reg));
      bounds.push_back(open_bound(model, rho, ctx, reg, s.rank_tol));
    }
  }
  const std::vector<double> p_fd = power_finite_difference(traj, ctx);

  RunRecord rec;
  rec.scenario_hash = scenario_hash(s);
  rec.rng_algorithm = std::string(kRngAlgorithm);
  rec.regularization = reg.describe();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const DensityMatrix& rho = traj.states[k];
    const BoundReport& b = bounds[k];
    RunRow row;
    row.t = traj.times[k];
    row.battery_energy = mean_energy(s.battery_hamiltonian, rho) - e0;
    row.entropy = von_neumann_entropy(rho);
    row.w_max = max_extractable_work(ctx, rho);
    row.p_direct = p_direct[k];
    row.p_finite_difference = p_fd[k];
    row.sigma_f = b.term("sigma_F");
    row.qfi = b.diagnostics.at("qfi");
    row.kernel_term = b.term("kernel_term");
    row.bound_rhs = b.rhs();
    row.slack = b.slack();
    rec.rows.push_back(row);
  }
  return rec;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "infinite" : "-infinite";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void write_csv(std::ostream& out, const RunRecord& record) {
  out << "# scenario_hash=" << record.scenario_hash << "\n";
  out << "# tool_version=" << record.tool_version << "\n";
  out << "# rng_algorithm=" << record.rng_algorithm << "\n";
  out << "# regularization=" << record.regularization << "\n";
  bool first = true;
  for (auto c : kRunColumns) {
    out << (first ? "" : ",") << c;
    first = false;
  }
  out << "\n";
  for (const auto& row : record.rows) {
    first = true;
    for (double v : row.values()) {
      out << (first ? "" : ",") << format_double(v);
      first = false;
    }
    out << "\n";
  }
}

nlohmann::json number_or_marker(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

nlohmann::json to_json(const RunRecord& record) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : record.rows) {
    nlohmann::json r = nlohmann::json::object();
    const auto values = row.values();
    for (std::size_t i = 0; i < values.size(); ++i)
      r[std::string(kRunColumns[i])] = number_or_marker(values[i]);
    rows.push_back(std::move(r));
  }
  nlohmann::json columns = nlohmann::json::array();
  for (auto c : kRunColumns) columns.push_back(std::string(c));
  return {{"scenario_hash", record.scenario_hash},
          {"tool_version", record.tool_version},
          {"rng_algorithm", record.rng_algorithm},
          {"regularization", record.regularization},
          {"columns", columns},
          {"rows", rows}};
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) {
      row.push_back(m(i, j).real());
      row.push_back(m(i, j).imag());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw InvalidArgument("matrix: expected a non-empty array of rows");
  const auto rows = static_cast<Index>(j.size());
  const auto width = j[0].size();
  if (width % 2 != 0) throw InvalidArgument("matrix: rows must hold re/im pairs");
  Matrix m(rows, static_cast<Index>(width / 2));
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || row.size() != width) throw InvalidArgument("matrix: ragged rows");
    for (Index k = 0; k < m.cols(); ++k)
      m(i, k) = Complex(row[static_cast<std::size_t>(2 * k)].get<double>(),
                        row[static_cast<std::size_t>(2 * k + 1)].get<double>());
  }
  return m;
}

nlohmann::json to_json(const BoundReport& report) {
  nlohmann::json terms = nlohmann::json::object();
  for (const auto& [name, value] : report.rhs_terms) terms[name] = number_or_marker(value);
  nlohmann::json diag = nlohmann::json::object();
  for (const auto& [name, value] : report.diagnostics) diag[name] = number_or_marker(value);
  return {{"kind", std::string(to_string(report.kind))},
          {"lhs", number_or_marker(report.lhs)},
          {"rhs", number_or_marker(report.rhs())},
          {"rhs_terms", terms},
          {"slack", number_or_marker(report.slack())},
          {"tol_violation", report.tol_violation()},
          {"violated", report.violated()},
          {"regularization", report.regularization},
          {"meta", report.meta},
          {"diagnostics", diag}};
}

}  // namespace qbat
