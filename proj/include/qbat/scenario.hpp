#pragma once

// Named battery models and the scenario configuration document.
//
// A scenario is a YAML mapping; see README.md for the full schema. Unknown
// keys are rejected at every level.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qbat/dynamics.hpp"
#include "qbat/operators.hpp"
#include "qbat/thermodynamics.hpp"

namespace qbat {

enum class ScenarioKind { kClosed, kOpen };

struct TimeGrid {
  double start = 0.0;
  double end = 10.0;
  int samples = 101;

  std::vector<double> points() const;
  double spacing() const { return (end - start) / (samples - 1); }
  bool operator==(const TimeGrid&) const = default;
};

struct InitialStateSpec {
  // basis | random | maximally-mixed | thermal | matrix
  std::string type = "basis";
  Index index = 0;         // basis
  Index rank = 0;          // random; 0 means full rank
  std::optional<Matrix> entries;  // matrix
};

struct Scenario {
  ScenarioKind kind = ScenarioKind::kOpen;
  std::string model_name;                 // empty for explicit models
  std::map<std::string, double> params;   // named-model parameters
  std::optional<ClosedModel> closed_model;
  std::optional<LindbladModel> lindblad_model;
  HermitianOperator battery_hamiltonian;  // H_W
  InitialStateSpec initial_state;
  double beta = 1.0;
  TimeGrid times;
  RegularizationPolicy regularization;
  double rank_tol = kDefaultSupportTol;
  double step = 1e-3;
  std::uint64_t seed = 0;

  ThermoContext thermo() const { return ThermoContext(beta, battery_hamiltonian); }
  Index state_dim() const;
  DensityMatrix initial_density() const;
  // Throws ConfigError naming the offending field.
  void validate() const;
};

bool operator==(const Scenario& a, const Scenario& b);

const std::vector<std::string>& named_model_names();

// two-qubit-exchange (closed): H0 = (omega/2)(sz x 1 + 1 x sz),
//   V = g (s+ x s- + s- x s+), start |e>_S |g>_W
// qubit-amplitude-damping (open): H = (omega/2) sz, L = s-, start |e>
// qubit-dephasing (open): H = (omega/2) sz, L = sz, start |e>
// qubit-pumping (open): H = (omega/2) sz, L = s+, start |g>
// Defaults: omega = 1, g = 0.1, gamma = 1, beta = 1.
Scenario named_model(std::string_view name, const std::map<std::string, double>& params = {});

Scenario load_scenario(std::string_view text);
Scenario load_scenario_file(const std::string& path);
std::string serialize_scenario(const Scenario& s);

}  // namespace qbat
