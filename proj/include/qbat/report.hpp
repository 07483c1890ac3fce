#pragma once

// Run records and their CSV/JSON serializations.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qbat/bounds.hpp"
#include "qbat/scenario.hpp"

namespace qbat {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Column order of the trajectory CSV. Fixed.
inline constexpr std::string_view kRunColumns[] = {
    "t",         "battery_energy", "entropy", "W_max",       "P_direct",  "P_finite_difference",
    "sigma_F",   "qfi",            "kernel_term", "bound_rhs", "slack"};

struct RunRow {
  double t = 0.0;
  double battery_energy = 0.0;  // tr(rho_W H_W) - min eig(H_W)
  double entropy = 0.0;
  double w_max = 0.0;
  double p_direct = 0.0;
  double p_finite_difference = 0.0;
  double sigma_f = 0.0;
  double qfi = 0.0;
  double kernel_term = 0.0;
  double bound_rhs = 0.0;
  double slack = 0.0;

  std::vector<double> values() const;
};

struct RunRecord {
  std::string scenario_hash;
  std::string tool_version{kToolVersion};
  std::string rng_algorithm;
  std::string regularization;
  std::vector<RunRow> rows;
};

// FNV-1a (64 bit) of the canonical serialized scenario, as 16 hex digits.
std::string scenario_hash(const Scenario& s);

// Evaluates every column along the scenario trajectory. Closed scenarios
// report the open bound of the reduced battery state with the exact reduced
// derivative; P_direct is the full-state commutator formula.
RunRecord run_scenario(const Scenario& s);

// Non-finite values print as "infinite" / "-infinite" / "nan".
std::string format_double(double v);

void write_csv(std::ostream& out, const RunRecord& record);
nlohmann::json to_json(const RunRecord& record);

// Row-major, real/imag interleaved: [[re, im, re, im, ...], ...].
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const BoundReport& report);

// Doubles that may be non-finite.
nlohmann::json number_or_marker(double v);

}  // namespace qbat
