#include "qbat/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "qbat/bounds.hpp"
#include "qbat/errors.hpp"
#include "qbat/random.hpp"
#include "qbat/report.hpp"
#include "qbat/scenario.hpp"

namespace qbat {

using nlohmann::json;

namespace {

// Usage errors detected while validating flags.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

unsigned worker_count(unsigned requested, std::size_t tasks) {
  unsigned n = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(tasks, 1)));
}

// Runs body(i) for i in [0, n) on a pool of workers. Results must be stored
// by index; completion order is unspecified.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& body) {
  const unsigned workers = worker_count(jobs, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  for (auto& t : pool) t.join();
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Writes `text` to `path` ("" or "-" is stdout). Returns false on IO failure.
bool emit(const std::string& path, const std::string& text, std::ostream& err) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return true;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    err << "error: cannot open '" << path << "' for writing\n";
    return false;
  }
  out << text;
  out.close();
  if (!out) {
    err << "error: failed writing '" << path << "'\n";
    return false;
  }
  return true;
}

double resolved_tol(const GlobalOptions& g, double fallback) {
  const double tol = g.tol.value_or(fallback);
  if (!(tol >= 0.0) || !std::isfinite(tol)) throw UsageError("--tol must be a finite value >= 0");
  return tol;
}

double resolved_rank_tol(const GlobalOptions& g) {
  const double r = g.rank_tol.value_or(kDefaultSupportTol);
  if (!(r >= 0.0) || !std::isfinite(r)) throw UsageError("--rank-tol must be a finite value >= 0");
  return r;
}

RegularizationPolicy make_regularization(const std::string& mode, double eps) {
  RegularizationPolicy reg;
  try {
    reg.mode = parse_regularization_mode(mode);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  if (reg.mode == RegularizationMode::kEpsilonMix) {
    if (!(eps > 0.0 && eps < 1.0)) throw UsageError("--epsilon must lie in (0, 1)");
    reg.epsilon = eps;
  }
  return reg;
}

json regularization_json(const RegularizationPolicy& r) {
  return {{"mode", std::string(to_string(r.mode))},
          {"epsilon", r.epsilon},
          {"support_tol", r.support_tol}};
}

RegularizationPolicy regularization_from_json(const json& j) {
  RegularizationPolicy r;
  r.mode = parse_regularization_mode(j.at("mode").get<std::string>());
  r.epsilon = j.at("epsilon").get<double>();
  r.support_tol = j.at("support_tol").get<double>();
  return r;
}

json closed_model_json(const ClosedModel& m, const HermitianOperator& h_w) {
  json dims = json::array();
  for (Index d : m.space().dims()) dims.push_back(d);
  return {{"dims", dims},
          {"local_hamiltonian", matrix_to_json(m.local().matrix())},
          {"interaction", matrix_to_json(m.interaction().matrix())},
          {"battery_hamiltonian", matrix_to_json(h_w.matrix())}};
}

ClosedModel closed_model_from_json(const json& j) {
  return ClosedModel(CompositeSpace(j.at("dims").get<std::vector<Index>>()),
                     HermitianOperator(matrix_from_json(j.at("local_hamiltonian"))),
                     HermitianOperator(matrix_from_json(j.at("interaction"))));
}

// ---------------------------------------------------------------------------
// Closed campaign

struct Tally {
  long evaluated = 0;
  long passed = 0;
  double worst = std::numeric_limits<double>::infinity();  // min slack or similar
  long worst_index = -1;

  void add(bool ok, double value, long index, bool lower_is_worse = true) {
    ++evaluated;
    if (ok) ++passed;
    const bool worse = lower_is_worse ? value < worst : (worst_index < 0 || value > worst);
    if (worse || worst_index < 0) {
      worst = value;
      worst_index = index;
    }
  }
  json to_json(const char* worst_name) const {
    return {{"evaluated", evaluated},
            {"passed", passed},
            {"failed", evaluated - passed},
            {worst_name, evaluated > 0 ? number_or_marker(worst) : json(nullptr)},
            {"worst_index", worst_index}};
  }
};

struct ClosedOutcome {
  bool bound_ok = true, identity_ok = true, pair_ok = true, rhs_ok = true;
  double slack = 0.0, pair_gap = 0.0, rhs = 0.0;
  std::string error;
  json violation;  // null unless something failed
};

// Criterion-level tolerances of the conjugate-pair and rhs-sign checks.
constexpr double kPairGapTol = 1e-10;
constexpr double kRhsFloor = -1e-12;

json evaluate_closed_instance(const ClosedModel& model, const HermitianOperator& h_w,
                              const DensityMatrix& rho, double beta,
                              const RegularizationPolicy& reg, double tol, ClosedOutcome& out) {
  const ThermoContext ctx(beta, h_w);
  json failed = json::array();
  json report = nullptr;
  try {
    const BoundReport r = closed_bound(rho, ctx, reg, model, tol);
    out.slack = r.slack();
    out.rhs = r.rhs();
    out.pair_gap = r.diagnostics.at("conjugate_pair_gap");
    out.bound_ok = !r.violated();
    out.rhs_ok = out.rhs >= kRhsFloor;
    out.pair_ok = out.pair_gap < kPairGapTol;
    report = to_json(r);
  } catch (const ConsistencyError& e) {
    out.identity_ok = false;
    out.error = e.what();
  }
  if (!out.bound_ok) failed.push_back("closed_bound");
  if (!out.identity_ok) failed.push_back("power_identity");
  if (!out.pair_ok) failed.push_back("conjugate_pair");
  if (!out.rhs_ok) failed.push_back("rhs_nonnegative");
  return {{"failed", failed}, {"report", report}, {"error", out.error}};
}

json run_closed_campaign(const VerifyOptions& o, const GlobalOptions& g, double tol,
                         double rank_tol, const RegularizationPolicy& reg, bool& violated) {
  if (o.dims.size() < 2) throw UsageError("--dims needs at least two subsystems (battery last)");
  for (Index d : o.dims)
    if (d < 1) throw UsageError("--dims entries must be >= 1");
  const CompositeSpace space(o.dims);
  const std::uint64_t base = g.seed.value_or(0);
  const auto n = static_cast<std::size_t>(o.instances);

  std::vector<ClosedOutcome> outcomes(n);
  parallel_for(n, g.jobs, [&](std::size_t i) {
    const std::uint64_t seed = base + i;
    const ClosedInstance inst = random_closed_instance(space, seed);
    ClosedOutcome& out = outcomes[i];
    json eval = evaluate_closed_instance(inst.model, inst.battery_hamiltonian, inst.state, o.beta,
                                         reg, tol, out);
    if (!eval["failed"].empty()) {
      out.violation = {{"type", "closed"},
                       {"index", i},
                       {"seed", seed},
                       {"beta", o.beta},
                       {"tol", tol},
                       {"rank_tol", rank_tol},
                       {"regularization", regularization_json(reg)},
                       {"model", closed_model_json(inst.model, inst.battery_hamiltonian)},
                       {"state", matrix_to_json(inst.state.matrix())},
                       {"failed", eval["failed"]},
                       {"report", eval["report"]},
                       {"error", eval["error"]}};
    }
  });

  Tally bound, identity, pair, rhs;
  json violations = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& out = outcomes[i];
    const long idx = static_cast<long>(i);
    identity.add(out.identity_ok, out.identity_ok ? 0.0 : 1.0, idx, false);
    if (out.identity_ok) {
      bound.add(out.bound_ok, out.slack, idx);
      pair.add(out.pair_ok, out.pair_gap, idx, false);
      rhs.add(out.rhs_ok, out.rhs, idx);
    }
    if (!out.violation.is_null()) violations.push_back(out.violation);
  }
  violated = !violations.empty();
  json dims = json::array();
  for (Index d : o.dims) dims.push_back(d);
  return {{"kind", "closed"},
          {"instances", o.instances},
          {"dims", dims},
          {"beta", o.beta},
          {"checks",
           {{"closed_bound", bound.to_json("worst_slack")},
            {"power_identity", identity.to_json("worst_flag")},
            {"conjugate_pair", pair.to_json("max_gap")},
            {"rhs_nonnegative", rhs.to_json("min_rhs")}}},
          {"violations", violations}};
}

// ---------------------------------------------------------------------------
// Open campaign

struct OpenTask {
  std::string model;
  long state_index = 0;
  std::uint64_t seed = 0;
};

struct OpenOutcome {
  long evaluated = 0, bound_passed = 0, identity_passed = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  double max_identity_gap = 0.0;
  std::string error;
  json violation;
};

constexpr double kIdentityTol = 1e-9;

struct OpenEval {
  bool bound_ok = true, identity_ok = true;
  double slack = 0.0, identity_gap = 0.0;
  std::string error;
  json report;
};

OpenEval evaluate_open_sample(const DensityMatrix& rho, const HermitianOperator& rho_dot,
                              const ThermoContext& ctx, const RegularizationPolicy& reg,
                              double rank_tol, double tol) {
  OpenEval e;
  try {
    const BoundReport r = open_bound_from_derivative(rho, rho_dot, ctx, reg, rank_tol, tol);
    const double twice_var = r.diagnostics.at("twice_variance");
    e.identity_gap = std::abs(r.diagnostics.at("fisher_weight_sum") - twice_var);
    e.identity_ok = e.identity_gap <= kIdentityTol * std::max(1.0, twice_var);
    e.slack = r.slack();
    e.bound_ok = !r.violated();
    e.report = to_json(r);
  } catch (const ConsistencyError& ex) {
    e.identity_ok = false;
    e.bound_ok = false;
    e.error = ex.what();
    e.report = nullptr;
  }
  return e;
}

bool is_open_model(const std::string& name) {
  return name == "random-lindblad" ||
         std::find(named_model_names().begin(), named_model_names().end(), name) !=
             named_model_names().end();
}

OpenOutcome run_open_task(const OpenTask& task, const VerifyOptions& o, double tol,
                          double rank_tol, const RegularizationPolicy& reg) {
  OpenOutcome out;
  Rng rng(task.seed);
  Scenario s;
  std::optional<LindbladModel> random_model;
  if (task.model == "random-lindblad") {
    const Index d = o.dims.back();
    random_model.emplace(random_lindblad(d, 2, 1.0, rng));
    s = named_model("qubit-amplitude-damping");  // grid and step defaults only
    s.battery_hamiltonian = random_model->hamiltonian();
  } else {
    s = named_model(task.model);
  }
  const ThermoContext ctx(o.beta, s.battery_hamiltonian);
  TimeGrid grid = s.times;
  grid.samples = o.time_points;
  const std::vector<double> times = grid.points();

  std::vector<DensityMatrix> states;
  std::vector<HermitianOperator> derivatives;
  std::optional<DensityMatrix> full0;
  if (s.kind == ScenarioKind::kClosed) {
    const ClosedModel& m = *s.closed_model;
    full0 = random_density(m.space().total_dim(), m.space().total_dim(), rng);
    const Trajectory traj = evolve_closed(m, *full0, times);
    for (std::size_t k = 0; k < traj.size(); ++k) {
      states.push_back(traj.states[k]);
      derivatives.push_back(reduced_battery_rhs(m, (*traj.full_states)[k]));
    }
  } else {
    const LindbladModel& m = random_model ? *random_model : *s.lindblad_model;
    const DensityMatrix rho0 = random_density(m.dim(), m.dim(), rng);
    IntegratorOptions io;
    io.step = std::min(s.step, grid.spacing());
    const Trajectory traj = evolve_lindblad(m, rho0, times, io);
    for (const auto& rho : traj.states) {
      states.push_back(rho);
      derivatives.push_back(lindblad_rhs(m, rho));
    }
  }

  for (std::size_t k = 0; k < states.size(); ++k) {
    const OpenEval e = evaluate_open_sample(states[k], derivatives[k], ctx, reg, rank_tol, tol);
    ++out.evaluated;
    if (e.bound_ok) ++out.bound_passed;
    if (e.identity_ok) ++out.identity_passed;
    if (e.error.empty()) out.worst_slack = std::min(out.worst_slack, e.slack);
    out.max_identity_gap = std::max(out.max_identity_gap, e.identity_gap);
    if ((!e.bound_ok || !e.identity_ok) && out.violation.is_null()) {
      json failed = json::array();
      if (!e.bound_ok) failed.push_back("open_bound");
      if (!e.identity_ok) failed.push_back("variance_identity");
      json inst = {{"type", "open"},
                   {"model_name", task.model},
                   {"state_index", task.state_index},
                   {"seed", task.seed},
                   {"time", times[k]},
                   {"beta", o.beta},
                   {"tol", tol},
                   {"rank_tol", rank_tol},
                   {"regularization", regularization_json(reg)},
                   {"state", matrix_to_json(states[k].matrix())},
                   {"rho_dot", matrix_to_json(derivatives[k].matrix())},
                   {"battery_hamiltonian", matrix_to_json(s.battery_hamiltonian.matrix())},
                   {"failed", failed},
                   {"report", e.report},
                   {"error", e.error}};
      out.violation = std::move(inst);
    }
  }
  return out;
}

json run_open_campaign(const VerifyOptions& o, const GlobalOptions& g, double tol, double rank_tol,
                       const RegularizationPolicy& reg, bool& violated) {
  std::vector<std::string> models = o.models;
  if (models.empty()) models = named_model_names();
  for (const auto& m : models)
    if (!is_open_model(m)) throw UsageError("unknown model '" + m + "'");
  if (o.time_points < 3) throw UsageError("--time-points must be >= 3");
  if (std::find(models.begin(), models.end(), "random-lindblad") != models.end() &&
      (o.dims.empty() || o.dims.back() < 1))
    throw UsageError("random-lindblad needs a battery dimension via --dims");

  const std::uint64_t base = g.seed.value_or(0);
  std::vector<OpenTask> tasks;
  for (const auto& m : models)
    for (long j = 0; j < o.instances; ++j)
      tasks.push_back({m, j, base + static_cast<std::uint64_t>(tasks.size())});

  std::vector<OpenOutcome> outcomes(tasks.size());
  std::vector<std::string> errors(tasks.size());
  parallel_for(tasks.size(), g.jobs, [&](std::size_t i) {
    try {
      outcomes[i] = run_open_task(tasks[i], o, tol, rank_tol, reg);
    } catch (const IntegratorFailure& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < tasks.size(); ++i)
    if (!errors[i].empty()) throw IntegratorFailure(errors[i], 0.0);

  json per_model = json::object();
  json violations = json::array();
  long total = 0, bound_ok = 0, identity_ok = 0;
  double worst = std::numeric_limits<double>::infinity(), max_gap = 0.0;
  for (const auto& m : models) {
    long ev = 0, bp = 0, ip = 0;
    double w = std::numeric_limits<double>::infinity(), gap = 0.0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].model != m) continue;
      const auto& out = outcomes[i];
      ev += out.evaluated;
      bp += out.bound_passed;
      ip += out.identity_passed;
      w = std::min(w, out.worst_slack);
      gap = std::max(gap, out.max_identity_gap);
      if (!out.violation.is_null()) violations.push_back(out.violation);
    }
    per_model[m] = {{"evaluated", ev},
                    {"bound_passed", bp},
                    {"identity_passed", ip},
                    {"worst_slack", number_or_marker(w)},
                    {"max_identity_gap", gap}};
    total += ev;
    bound_ok += bp;
    identity_ok += ip;
    worst = std::min(worst, w);
    max_gap = std::max(max_gap, gap);
  }
  violated = !violations.empty();
  json model_list = models;
  return {{"kind", "open"},
          {"instances_per_model", o.instances},
          {"time_points", o.time_points},
          {"models", model_list},
          {"beta", o.beta},
          {"checks",
           {{"open_bound",
             {{"evaluated", total},
              {"passed", bound_ok},
              {"failed", total - bound_ok},
              {"worst_slack", number_or_marker(worst)}}},
            {"variance_identity",
             {{"evaluated", total},
              {"passed", identity_ok},
              {"failed", total - identity_ok},
              {"max_gap", max_gap}}}}},
          {"per_model", per_model},
          {"violations", violations}};
}

// ---------------------------------------------------------------------------
// Replay

json replay_instance(const json& inst, bool& failed_any) {
  const std::string type = inst.at("type").get<std::string>();
  const double beta = inst.at("beta").get<double>();
  const double tol = inst.at("tol").get<double>();
  const double rank_tol = inst.at("rank_tol").get<double>();
  const RegularizationPolicy reg = regularization_from_json(inst.at("regularization"));
  json result;
  if (type == "closed") {
    const json& mj = inst.at("model");
    const ClosedModel model = closed_model_from_json(mj);
    const HermitianOperator h_w(matrix_from_json(mj.at("battery_hamiltonian")));
    const DensityMatrix rho(matrix_from_json(inst.at("state")));
    ClosedOutcome out;
    result = evaluate_closed_instance(model, h_w, rho, beta, reg, tol, out);
  } else if (type == "open") {
    const HermitianOperator h_w(matrix_from_json(inst.at("battery_hamiltonian")));
    const DensityMatrix rho(matrix_from_json(inst.at("state")));
    const HermitianOperator rho_dot(matrix_from_json(inst.at("rho_dot")));
    const OpenEval e =
        evaluate_open_sample(rho, rho_dot, ThermoContext(beta, h_w), reg, rank_tol, tol);
    json failed = json::array();
    if (!e.bound_ok) failed.push_back("open_bound");
    if (!e.identity_ok) failed.push_back("variance_identity");
    result = {{"failed", failed}, {"report", e.report}, {"error", e.error}};
  } else {
    throw InvalidArgument("replay: unknown instance type '" + type + "'");
  }
  if (!result["failed"].empty()) failed_any = true;
  result["type"] = type;
  if (inst.contains("index")) result["index"] = inst["index"];
  if (inst.contains("seed")) result["seed"] = inst["seed"];
  return result;
}

int run_replay(const VerifyOptions& o, std::ostream& err) {
  std::ifstream in(o.replay_path);
  if (!in) {
    err << "error: cannot read '" << o.replay_path << "'\n";
    return kExitUsage;
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    err << "error: " << o.replay_path << ": " << e.what() << "\n";
    return kExitUsage;
  }
  std::vector<json> instances;
  if (doc.contains("violations")) {
    for (const auto& v : doc["violations"]) instances.push_back(v);
  } else {
    instances.push_back(doc);
  }
  bool failed_any = false;
  json results = json::array();
  try {
    for (const auto& inst : instances) results.push_back(replay_instance(inst, failed_any));
  } catch (const std::exception& e) {
    err << "error: replay: " << e.what() << "\n";
    return kExitUsage;
  }
  json report = {{"command", "verify-replay"},
                 {"tool_version", std::string(kToolVersion)},
                 {"replayed", results}};
  if (!emit(o.report_path, report.dump(2) + "\n", err)) return kExitUsage;
  return failed_any ? kExitViolation : kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_simulate(const SimulateOptions& opts, const GlobalOptions& global, std::ostream& err) {
  if (global.format != "csv" && global.format != "json") {
    err << "error: --format must be csv or json\n";
    return kExitUsage;
  }
  RunRecord record;
  try {
    Scenario s = load_scenario_file(opts.scenario_path);
    if (global.seed) s.seed = *global.seed;
    if (global.rank_tol) {
      s.rank_tol = resolved_rank_tol(global);
    }
    s.validate();
    record = run_scenario(s);
  } catch (const ConfigError& e) {
    err << "error: " << opts.scenario_path << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << opts.scenario_path << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const IntegratorFailure& e) {
    err << "error: integrator failure: " << e.what() << "\n";
    return kExitIntegrator;
  } catch (const ConsistencyError& e) {
    err << "error: consistency check failed: " << e.what() << "\n";
    return kExitViolation;
  } catch (const SingularLogarithm& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  std::ostringstream text;
  if (global.format == "csv") {
    write_csv(text, record);
  } else {
    text << to_json(record).dump(2) << "\n";
  }
  return emit(opts.output_path, text.str(), err) ? kExitOk : kExitUsage;
}

int cmd_verify(const VerifyOptions& opts, const GlobalOptions& global, std::ostream& err) {
  if (!opts.replay_path.empty()) return run_replay(opts, err);
  bool violated = false;
  json body;
  double tol = 0.0, rank_tol = 0.0;
  RegularizationPolicy reg;
  try {
    tol = resolved_tol(global, kDefaultViolationTol);
    rank_tol = resolved_rank_tol(global);
    if (opts.instances < 1) throw UsageError("--instances must be >= 1");
    if (!(opts.beta > 0.0) || !std::isfinite(opts.beta)) throw UsageError("--beta must be > 0");
    reg = make_regularization(opts.regularization, opts.epsilon);
    if (opts.kind == "closed") {
      body = run_closed_campaign(opts, global, tol, rank_tol, reg, violated);
    } else if (opts.kind == "open") {
      body = run_open_campaign(opts, global, tol, rank_tol, reg, violated);
    } else {
      throw UsageError("--kind must be closed or open");
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IntegratorFailure& e) {
    err << "error: integrator failure: " << e.what() << "\n";
    return kExitIntegrator;
  }
  json report = {{"command", "verify"},
                 {"tool_version", std::string(kToolVersion)},
                 {"rng_algorithm", std::string(kRngAlgorithm)},
                 {"seed", global.seed.value_or(0)},
                 {"tolerance", tol},
                 {"rank_tol", rank_tol},
                 {"regularization", regularization_json(reg)},
                 {"passed", !violated}};
  report.update(body);
  if (opts.timestamp) report["timestamp"] = utc_timestamp();
  if (!emit(opts.report_path, report.dump(2) + "\n", err)) return kExitUsage;
  if (violated) err << "verify: violations found\n";
  return violated ? kExitViolation : kExitOk;
}

int cmd_probe_singularity(const ProbeOptions& opts, const GlobalOptions& global,
                          std::ostream& err) {
  if (global.format != "csv" && global.format != "json") {
    err << "error: --format must be csv or json\n";
    return kExitUsage;
  }
  SingularityFit fit;
  Scenario s;
  Index state = 0;
  try {
    s = named_model(opts.model, opts.params);
    if (s.kind != ScenarioKind::kOpen)
      throw UsageError("probe-singularity needs an open model, not '" + opts.model + "'");
    if (!(opts.beta > 0.0) || !std::isfinite(opts.beta)) throw UsageError("--beta must be > 0");
    state = opts.state.value_or(s.initial_state.index);
    if (state < 0 || state >= s.state_dim()) throw UsageError("--state out of range");
    fit = singularity_probe(*s.lindblad_model, ThermoContext(opts.beta, s.battery_hamiltonian),
                            state, opts.eps);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  if (fit.poor_fit) err << "warning: poor fit (residual " << fit.residual << ")\n";

  std::ostringstream text;
  if (global.format == "csv") {
    text << "# model=" << opts.model << "\n";
    text << "# state=" << state << "\n";
    text << "# beta=" << format_double(opts.beta) << "\n";
    text << "# a=" << format_double(fit.a) << "\n";
    text << "# b=" << format_double(fit.b) << "\n";
    text << "# residual=" << format_double(fit.residual) << "\n";
    text << "# poor_fit=" << (fit.poor_fit ? "true" : "false") << "\n";
    text << "eps,power,fitted\n";
    for (std::size_t i = 0; i < fit.eps.size(); ++i)
      text << format_double(fit.eps[i]) << "," << format_double(fit.power[i]) << ","
           << format_double(fit.a + fit.b * std::log(fit.eps[i])) << "\n";
  } else {
    json params = json::object();
    for (const auto& [k, v] : s.params) params[k] = v;
    json j = {{"command", "probe-singularity"},
              {"tool_version", std::string(kToolVersion)},
              {"model", opts.model},
              {"params", params},
              {"state", state},
              {"beta", opts.beta},
              {"eps", fit.eps},
              {"power", fit.power},
              {"fit", {{"a", fit.a}, {"b", fit.b}, {"residual", fit.residual}, {"poor_fit", fit.poor_fit}}}};
    text << j.dump(2) << "\n";
  }
  return emit(opts.output_path, text.str(), err) ? kExitOk : kExitUsage;
}

int cmd_qfi_check(const QfiCheckOptions& opts, const GlobalOptions& global, std::ostream& err) {
  double tol = 0.0, rank_tol = 0.0;
  try {
    tol = resolved_tol(global, 1e-8);
    rank_tol = resolved_rank_tol(global);
    if (opts.instances < 0 || opts.rank_deficient < 0)
      throw UsageError("instance counts must be >= 0");
    if (opts.instances + opts.rank_deficient < 1) throw UsageError("nothing to check");
    if (opts.dim < 1) throw UsageError("--dim must be >= 1");
    if (opts.rank_deficient > 0 && opts.dim < 2)
      throw UsageError("rank-deficient instances need --dim >= 2");
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  const std::uint64_t base = global.seed.value_or(0);
  const Index d = opts.dim;

  struct Row {
    double eigsum = 0.0, sld = 0.0, deviation = 0.0;
    Index excluded = 0;
    bool finite = true;
    Matrix state, rho_dot;
  };
  const auto full = static_cast<std::size_t>(opts.instances);
  const auto total = full + static_cast<std::size_t>(opts.rank_deficient);
  std::vector<Row> rows(total);
  parallel_for(total, global.jobs, [&](std::size_t i) {
    Rng rng(base + i);
    const bool deficient = i >= full;
    const Index rank = deficient ? std::max<Index>(1, d / 2) : d;
    const DensityMatrix rho = random_density(d, rank, rng);
    const LindbladModel model = random_lindblad(d, 2, 1.0, rng);
    const HermitianOperator rho_dot = lindblad_rhs(model, rho);
    Row& r = rows[i];
    const QfiResult q = qfi_eigsum(rho.spectral(), rho_dot, rank_tol);
    r.eigsum = q.value;
    r.excluded = q.excluded_pairs;
    r.finite = std::isfinite(q.value);
    if (!deficient) {
      r.sld = qfi_sld(rho, rho_dot);
      const double scale = std::max(std::abs(r.eigsum), std::abs(r.sld));
      r.deviation = scale > 0.0 ? std::abs(r.eigsum - r.sld) / scale : 0.0;
      r.finite = r.finite && std::isfinite(r.sld);
    }
    r.state = rho.matrix();
    r.rho_dot = rho_dot.matrix();
  });

  double max_dev = 0.0;
  long worst = -1, passed = 0, finite_count = 0;
  Index min_excluded = std::numeric_limits<Index>::max();
  double max_value = 0.0;
  json violations = json::array();
  for (std::size_t i = 0; i < total; ++i) {
    const Row& r = rows[i];
    const bool deficient = i >= full;
    bool ok = r.finite;
    if (!deficient) {
      ok = ok && r.deviation <= tol;
      if (ok) ++passed;
      if (worst < 0 || r.deviation > max_dev) {
        max_dev = r.deviation;
        worst = static_cast<long>(i);
      }
    } else {
      if (r.finite) ++finite_count;
      min_excluded = std::min(min_excluded, r.excluded);
      max_value = std::max(max_value, r.eigsum);
    }
    if (!ok)
      violations.push_back({{"index", i},
                            {"seed", base + i},
                            {"rank_deficient", deficient},
                            {"qfi_eigsum", number_or_marker(r.eigsum)},
                            {"qfi_sld", number_or_marker(r.sld)},
                            {"relative_deviation", number_or_marker(r.deviation)},
                            {"state", matrix_to_json(r.state)},
                            {"rho_dot", matrix_to_json(r.rho_dot)}});
  }
  json report = {
      {"command", "qfi-check"},
      {"tool_version", std::string(kToolVersion)},
      {"rng_algorithm", std::string(kRngAlgorithm)},
      {"seed", base},
      {"dim", d},
      {"tolerance", tol},
      {"rank_tol", rank_tol},
      {"full_rank",
       {{"evaluated", opts.instances},
        {"passed", passed},
        {"max_relative_deviation", max_dev},
        {"worst_index", worst}}},
      {"rank_deficient",
       {{"evaluated", opts.rank_deficient},
        {"finite", finite_count},
        {"min_excluded_pairs", opts.rank_deficient > 0 ? json(min_excluded) : json(nullptr)},
        {"max_value", max_value}}},
      {"passed", violations.empty()},
      {"violations", violations}};
  if (opts.timestamp) report["timestamp"] = utc_timestamp();
  if (!emit(opts.report_path, report.dump(2) + "\n", err)) return kExitUsage;
  return violations.empty() ? kExitOk : kExitViolation;
}

}  // namespace qbat
