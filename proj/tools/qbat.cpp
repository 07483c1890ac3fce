// qbat: simulate battery scenarios, run bound-verification campaigns, probe
// the log-singularity of the free energy operator and cross-check the QFI.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qbat/commands.hpp"
#include "qbat/report.hpp"

int main(int argc, char** argv) {
  using namespace qbat;
  CLI::App app{"Quantum battery charging-power toolkit"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  std::uint64_t seed = 0;
  double rank_tol = 0.0, tol = 0.0;
  auto* seed_opt = app.add_option("--seed", seed, "Base seed (instance i uses seed + i)");
  app.add_option("--jobs", global.jobs, "Worker threads (0: available parallelism)");
  auto* rank_opt = app.add_option("--rank-tol", rank_tol, "Eigenvalue-pair cutoff for the QFI split");
  auto* tol_opt = app.add_option("--tol", tol, "Violation tolerance base (verify) or agreement tolerance (qfi-check)");
  app.add_option("--format", global.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}));

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Run a scenario and write the trajectory table");
  simulate->add_option("scenario", sim.scenario_path, "Scenario YAML file")->required();
  simulate->add_option("-o,--output", sim.output_path, "Output file (default stdout)");

  VerifyOptions ver;
  auto* verify = app.add_subcommand("verify", "Fuzz the closed or open charging-power bound");
  verify->add_option("--kind", ver.kind, "closed | open")->check(CLI::IsMember({"closed", "open"}));
  verify->add_option("--instances", ver.instances,
                     "closed: random instances; open: random initial states per model");
  verify->add_option("--dims", ver.dims, "Subsystem dimensions S,B,A,W (battery last)")
      ->delimiter(',');
  verify->add_option("--models", ver.models, "Open models (default: all named models)")
      ->delimiter(',');
  verify->add_option("--time-points", ver.time_points, "Samples per open trajectory");
  verify->add_option("--beta", ver.beta, "Inverse temperature");
  verify->add_option("--regularization", ver.regularization,
                     "support-truncate | epsilon-mix | reject");
  verify->add_option("--epsilon", ver.epsilon, "Mixing weight for epsilon-mix");
  verify->add_option("-o,--report", ver.report_path, "Report file (default stdout)");
  verify->add_option("--replay", ver.replay_path, "Re-evaluate instances serialized in a report");
  verify->add_flag("!--no-timestamp", ver.timestamp, "Omit the timestamp field");

  ProbeOptions probe;
  std::optional<double> omega, gamma;
  std::optional<Index> state;
  auto* probe_cmd =
      app.add_subcommand("probe-singularity", "Fit P(eps) = a + b log eps near a pure state");
  probe_cmd->add_option("--model", probe.model, "Open named model");
  probe_cmd->add_option("--eps", probe.eps, "Descending geometric grid, >= 4 points in (0, 0.1]")
      ->delimiter(',');
  probe_cmd->add_option("--state", state, "Computational basis index of the pure state");
  probe_cmd->add_option("--beta", probe.beta, "Inverse temperature");
  probe_cmd->add_option("--omega", omega, "Model frequency");
  probe_cmd->add_option("--gamma", gamma, "Model rate");
  probe_cmd->add_option("-o,--output", probe.output_path, "Output file (default stdout)");

  QfiCheckOptions qfi;
  auto* qfi_cmd = app.add_subcommand("qfi-check", "Cross-check the QFI eigensum against the SLD");
  qfi_cmd->add_option("--instances", qfi.instances, "Full-rank instances");
  qfi_cmd->add_option("--dim", qfi.dim, "State dimension");
  qfi_cmd->add_option("--rank-deficient", qfi.rank_deficient, "Extra rank-deficient instances");
  qfi_cmd->add_option("-o,--report", qfi.report_path, "Report file (default stdout)");
  qfi_cmd->add_flag("!--no-timestamp", qfi.timestamp, "Omit the timestamp field");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*seed_opt) global.seed = seed;
  if (*rank_opt) global.rank_tol = rank_tol;
  if (*tol_opt) global.tol = tol;

  if (*simulate) return cmd_simulate(sim, global, std::cerr);
  if (*verify) return cmd_verify(ver, global, std::cerr);
  if (*probe_cmd) {
    if (omega) probe.params["omega"] = *omega;
    if (gamma) probe.params["gamma"] = *gamma;
    probe.state = state;
    return cmd_probe_singularity(probe, global, std::cerr);
  }
  if (*qfi_cmd) return cmd_qfi_check(qfi, global, std::cerr);
  return kExitUsage;
}
