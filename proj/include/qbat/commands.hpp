#pragma once

// Command implementations behind the qbat executable. Every command returns
// its process exit code:
//   0 success, 1 usage/config/IO error, 2 verification violation,
//   3 integrator failure.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qbat/operators.hpp"

namespace qbat {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitViolation = 2, kExitIntegrator = 3 };

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  unsigned jobs = 0;  // 0: hardware concurrency
  std::optional<double> rank_tol;
  std::optional<double> tol;
  std::string format = "csv";  // csv | json
};

struct SimulateOptions {
  std::string scenario_path;
  std::string output_path;  // empty or "-": stdout
};

struct VerifyOptions {
  std::string kind = "closed";  // closed | open
  // closed: number of random instances; open: random initial states per model
  long instances = 1000;
  std::vector<Index> dims = {2, 1, 1, 2};
  // open: named models, plus "random-lindblad" (battery dimension dims.back())
  std::vector<std::string> models;
  int time_points = 100;
  double beta = 1.0;
  std::string regularization = "support-truncate";
  double epsilon = 1e-6;
  std::string report_path;
  std::string replay_path;  // re-evaluate serialized instances instead
  bool timestamp = true;
};

struct ProbeOptions {
  std::string model = "qubit-amplitude-damping";
  std::map<std::string, double> params;
  std::optional<Index> state;  // computational basis index; default: model start
  double beta = 1.0;
  std::vector<double> eps = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  std::string output_path;
};

struct QfiCheckOptions {
  long instances = 1000;
  Index dim = 4;
  long rank_deficient = 0;  // extra rank-deficient instances
  std::string report_path;
  bool timestamp = true;
};

int cmd_simulate(const SimulateOptions& opts, const GlobalOptions& global, std::ostream& err);
int cmd_verify(const VerifyOptions& opts, const GlobalOptions& global, std::ostream& err);
int cmd_probe_singularity(const ProbeOptions& opts, const GlobalOptions& global, std::ostream& err);
int cmd_qfi_check(const QfiCheckOptions& opts, const GlobalOptions& global, std::ostream& err);

}  // namespace qbat
