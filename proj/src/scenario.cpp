#include "qbat/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "qbat/errors.hpp"
#include "qbat/random.hpp"

namespace qbat {

std::vector<double> TimeGrid::points() const {
  std::vector<double> t(static_cast<std::size_t>(samples));
  const double h = spacing();
  for (int i = 0; i < samples; ++i) t[static_cast<std::size_t>(i)] = start + h * i;
  t.back() = end;
  return t;
}

// ---------------------------------------------------------------------------
// Named models

const std::vector<std::string>& named_model_names() {
  static const std::vector<std::string> names = {
      "two-qubit-exchange", "qubit-amplitude-damping", "qubit-dephasing", "qubit-pumping"};
  return names;
}

namespace {

const std::map<std::string, std::set<std::string>>& model_parameters() {
  static const std::map<std::string, std::set<std::string>> p = {
      {"two-qubit-exchange", {"omega", "g"}},
      {"qubit-amplitude-damping", {"omega", "gamma"}},
      {"qubit-dephasing", {"omega", "gamma"}},
      {"qubit-pumping", {"omega", "gamma"}},
  };
  return p;
}

double param_or(const std::map<std::string, double>& params, const std::string& key,
                double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

std::string join_names() {
  std::string out;
  for (const auto& n : named_model_names()) out += (out.empty() ? "" : ", ") + n;
  return out;
}

}  // namespace

Scenario named_model(std::string_view name_view, const std::map<std::string, double>& given) {
  const std::string name(name_view);
  auto allowed = model_parameters().find(name);
  if (allowed == model_parameters().end())
    throw InvalidArgument("unknown model '" + name + "'; valid names: " + join_names());
  for (const auto& [key, value] : given) {
    if (!allowed->second.count(key))
      throw InvalidArgument("model '" + name + "' has no parameter '" + key + "'");
    if (!std::isfinite(value)) throw InvalidArgument("model parameter '" + key + "' must be finite");
  }

  Scenario s;
  s.model_name = name;
  const double omega = param_or(given, "omega", 1.0);
  const Matrix h_qubit = 0.5 * omega * pauli::z();
  s.battery_hamiltonian = HermitianOperator(h_qubit);

  if (name == "two-qubit-exchange") {
    const double g = param_or(given, "g", 0.1);
    s.params = {{"omega", omega}, {"g", g}};
    const CompositeSpace space = CompositeSpace::sbaw(2, 1, 1, 2);
    const Matrix h0 = embed(h_qubit, space, 0) + embed(h_qubit, space, 3);
    const Matrix v = g * (kron(pauli::raising(), pauli::lowering()) +
                          kron(pauli::lowering(), pauli::raising()));
    s.kind = ScenarioKind::kClosed;
    s.closed_model.emplace(space, HermitianOperator(h0), HermitianOperator(v));
    s.initial_state.type = "basis";
    s.initial_state.index = 1;  // |e>_S |g>_W
    s.times = {0.0, 20.0, 201};
    s.step = 0.1;
    return s;
  }

  const double gamma = param_or(given, "gamma", 1.0);
  s.params = {{"omega", omega}, {"gamma", gamma}};
  if (gamma < 0.0) throw InvalidArgument("model parameter 'gamma' must be >= 0");
  Matrix jump;
  Index start = 0;  // |e>
  if (name == "qubit-amplitude-damping") {
    jump = pauli::lowering();
  } else if (name == "qubit-dephasing") {
    jump = pauli::z();
  } else {
    jump = pauli::raising();
    start = 1;  // |g>
  }
  s.kind = ScenarioKind::kOpen;
  s.lindblad_model.emplace(HermitianOperator(h_qubit),
                           std::vector<LindbladChannel>{{gamma, jump}});
  s.initial_state.type = "basis";
  s.initial_state.index = start;
  s.times = {0.0, 5.0, 101};
  s.step = 1e-3;
  return s;
}

// ---------------------------------------------------------------------------
// Scenario

Index Scenario::state_dim() const {
  if (kind == ScenarioKind::kClosed && closed_model) return closed_model->space().total_dim();
  if (lindblad_model) return lindblad_model->dim();
  return battery_hamiltonian.dim();
}

DensityMatrix Scenario::initial_density() const {
  const Index d = state_dim();
  const auto& st = initial_state;
  if (st.type == "basis") return DensityMatrix::basis_state(d, st.index);
  if (st.type == "random") return random_density(d, st.rank == 0 ? d : st.rank, seed);
  if (st.type == "maximally-mixed") return DensityMatrix::maximally_mixed(d);
  if (st.type == "thermal") {
    if (kind == ScenarioKind::kClosed) return thermal_state(ThermoContext(beta, closed_model->total()));
    return thermal_state(thermo());
  }
  if (st.type == "matrix" && st.entries) return DensityMatrix(*st.entries);
  throw ConfigError("initial_state: unknown type '" + st.type + "'");
}

void Scenario::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (kind == ScenarioKind::kClosed) {
    if (!closed_model || lindblad_model) fail("model: a closed scenario needs exactly a closed model");
    if (battery_hamiltonian.dim() != closed_model->space().battery_dim())
      fail("model.battery_hamiltonian: dimension must equal the battery dimension");
  } else {
    if (!lindblad_model || closed_model) fail("model: an open scenario needs exactly a Lindblad model");
    if (battery_hamiltonian.dim() != lindblad_model->dim())
      fail("model.hamiltonian: dimension mismatch");
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) fail("beta: must be > 0 and finite");
  if (!(times.start >= 0.0)) fail("times.start: must be >= 0");
  if (!(times.end > times.start)) fail("times.end: must be > times.start");
  if (times.samples < 2) fail("times.samples: must be >= 2");
  if (!(rank_tol >= 0.0)) fail("rank_tol: must be >= 0");
  if (!(step > 0.0)) fail("step: must be > 0");
  if (kind == ScenarioKind::kOpen) {
    if (step > times.spacing() * (1.0 + 1e-9)) fail("step: must not exceed the sample spacing");
    const double hnorm = eig_hermitian(lindblad_model->hamiltonian()).eigenvalues.cwiseAbs().maxCoeff();
    if (step * std::max(lindblad_model->max_rate(), hnorm) > 0.1)
      fail("step: step * max(gamma, ||H||) must be <= 0.1");
  }
  if (regularization.mode == RegularizationMode::kEpsilonMix &&
      !(regularization.epsilon > 0.0 && regularization.epsilon < 1.0))
    fail("regularization.epsilon: must lie in (0, 1)");
  if (!(regularization.support_tol >= 0.0)) fail("regularization.support_tol: must be >= 0");
  const Index d = state_dim();
  const auto& st = initial_state;
  if (st.type == "basis") {
    if (st.index < 0 || st.index >= d) fail("initial_state.index: must lie in [0, dim)");
  } else if (st.type == "random") {
    if (st.rank < 0 || st.rank > d) fail("initial_state.rank: must lie in [0, dim]");
  } else if (st.type == "matrix") {
    if (!st.entries || st.entries->rows() != d || st.entries->cols() != d)
      fail("initial_state.entries: must be a dim x dim matrix");
  } else if (st.type != "maximally-mixed" && st.type != "thermal") {
    fail("initial_state.type: must be one of basis, random, maximally-mixed, thermal, matrix");
  }
}

bool operator==(const Scenario& a, const Scenario& b) {
  auto same_matrix = [](const Matrix& x, const Matrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  if (a.kind != b.kind || a.model_name != b.model_name || a.params != b.params) return false;
  if (a.closed_model.has_value() != b.closed_model.has_value()) return false;
  if (a.closed_model) {
    const auto& x = *a.closed_model;
    const auto& y = *b.closed_model;
    if (!(x.space() == y.space()) || !same_matrix(x.local().matrix(), y.local().matrix()) ||
        !same_matrix(x.interaction().matrix(), y.interaction().matrix()))
      return false;
  }
  if (a.lindblad_model.has_value() != b.lindblad_model.has_value()) return false;
  if (a.lindblad_model) {
    const auto& x = *a.lindblad_model;
    const auto& y = *b.lindblad_model;
    if (!same_matrix(x.hamiltonian().matrix(), y.hamiltonian().matrix())) return false;
    if (x.channels().size() != y.channels().size()) return false;
    for (std::size_t i = 0; i < x.channels().size(); ++i)
      if (x.channels()[i].gamma != y.channels()[i].gamma ||
          !same_matrix(x.channels()[i].jump, y.channels()[i].jump))
        return false;
  }
  if (!same_matrix(a.battery_hamiltonian.matrix(), b.battery_hamiltonian.matrix())) return false;
  const auto& sa = a.initial_state;
  const auto& sb = b.initial_state;
  if (sa.type != sb.type || sa.index != sb.index || sa.rank != sb.rank ||
      sa.entries.has_value() != sb.entries.has_value())
    return false;
  if (sa.entries && !same_matrix(*sa.entries, *sb.entries)) return false;
  return a.beta == b.beta && a.times == b.times && a.regularization == b.regularization &&
         a.rank_tol == b.rank_tol && a.step == b.step && a.seed == b.seed;
}

// ---------------------------------------------------------------------------
// YAML ingestion

namespace {

[[noreturn]] void fail_at(const YAML::Node& node, const std::string& key, const std::string& msg) {
  std::ostringstream os;
  if (node.IsDefined() && node.Mark().line >= 0) os << "line " << node.Mark().line + 1 << ": ";
  os << key << ": " << msg;
  throw ConfigError(os.str());
}

void check_keys(const YAML::Node& node, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!node.IsMap()) fail_at(node, where, "expected a mapping");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail_at(kv.first, where.empty() ? key : where + "." + key,
              "unknown key (allowed: " + list + ")");
    }
  }
}

double read_double(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    fail_at(node, key, "expected a number");
  }
}

std::int64_t read_int(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<std::int64_t>();
  } catch (const YAML::Exception&) {
    fail_at(node, key, "expected an integer");
  }
}

std::string read_string(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) fail_at(node, key, "expected a string");
  return node.as<std::string>();
}

Matrix read_matrix(const YAML::Node& node, const std::string& key) {
  if (!node.IsSequence() || node.size() == 0) fail_at(node, key, "expected a list of rows");
  const auto rows = static_cast<Index>(node.size());
  Matrix m(rows, rows);
  for (Index i = 0; i < rows; ++i) {
    const YAML::Node row = node[static_cast<std::size_t>(i)];
    if (!row.IsSequence() || static_cast<Index>(row.size()) != rows)
      fail_at(row, key, "expected a square matrix (each row a list of equal length)");
    for (Index j = 0; j < rows; ++j) {
      const YAML::Node e = row[static_cast<std::size_t>(j)];
      if (e.IsScalar()) {
        m(i, j) = read_double(e, key);
      } else if (e.IsSequence() && e.size() == 2) {
        m(i, j) = Complex(read_double(e[0], key), read_double(e[1], key));
      } else {
        fail_at(e, key, "matrix entries must be a number or a [re, im] pair");
      }
    }
  }
  return m;
}

HermitianOperator read_hermitian(const YAML::Node& node, const std::string& key) {
  try {
    return HermitianOperator(read_matrix(node, key));
  } catch (const InvalidArgument& e) {
    fail_at(node, key, e.what());
  }
}

void load_model(const YAML::Node& node, const YAML::Node& kind_node, Scenario& s) {
  if (!node.IsMap()) fail_at(node, "model", "expected a mapping");
  if (node["name"]) {
    const std::string name = read_string(node["name"], "model.name");
    auto allowed = model_parameters().find(name);
    if (allowed == model_parameters().end())
      fail_at(node["name"], "model.name", "unknown model '" + name + "'; valid names: " + join_names());
    std::set<std::string> keys = allowed->second;
    keys.insert("name");
    check_keys(node, "model", keys);
    std::map<std::string, double> params;
    for (const auto& p : allowed->second)
      if (node[p]) params[p] = read_double(node[p], "model." + p);
    if (params.count("gamma") && params["gamma"] < 0.0)
      fail_at(node["gamma"], "model.gamma", "must be >= 0");
    if (params.count("omega") && !(params["omega"] > 0.0))
      fail_at(node["omega"], "model.omega", "must be > 0");
    if (params.count("g") && params["g"] < 0.0) fail_at(node["g"], "model.g", "must be >= 0");
    s = named_model(name, params);
    if (kind_node) {
      const std::string kind = read_string(kind_node, "kind");
      const std::string expected = s.kind == ScenarioKind::kClosed ? "closed" : "open";
      if (kind != expected)
        fail_at(kind_node, "kind", "model '" + name + "' is " + expected + ", not " + kind);
    }
    return;
  }

  if (!kind_node) fail_at(node, "kind", "required for explicit models (closed or open)");
  const std::string kind = read_string(kind_node, "kind");
  if (kind == "closed") {
    check_keys(node, "model", {"dims", "local_hamiltonian", "interaction", "battery_hamiltonian"});
    for (const char* k : {"dims", "local_hamiltonian", "interaction", "battery_hamiltonian"})
      if (!node[k]) fail_at(node, std::string("model.") + k, "required");
    const YAML::Node dn = node["dims"];
    if (!dn.IsSequence() || dn.size() == 0) fail_at(dn, "model.dims", "expected a list of dimensions");
    std::vector<Index> dims;
    for (const auto& d : dn) {
      const auto v = read_int(d, "model.dims");
      if (v < 1) fail_at(d, "model.dims", "each dimension must be >= 1");
      dims.push_back(v);
    }
    try {
      CompositeSpace space(dims);
      s.kind = ScenarioKind::kClosed;
      s.closed_model.emplace(space, read_hermitian(node["local_hamiltonian"], "model.local_hamiltonian"),
                             read_hermitian(node["interaction"], "model.interaction"));
    } catch (const InvalidArgument& e) {
      fail_at(node, "model", e.what());
    }
    s.battery_hamiltonian = read_hermitian(node["battery_hamiltonian"], "model.battery_hamiltonian");
  } else if (kind == "open") {
    check_keys(node, "model", {"hamiltonian", "channels"});
    if (!node["hamiltonian"]) fail_at(node, "model.hamiltonian", "required");
    HermitianOperator h = read_hermitian(node["hamiltonian"], "model.hamiltonian");
    std::vector<LindbladChannel> channels;
    if (node["channels"]) {
      const YAML::Node cn = node["channels"];
      if (!cn.IsSequence()) fail_at(cn, "model.channels", "expected a list");
      for (const auto& c : cn) {
        check_keys(c, "model.channels[]", {"gamma", "operator"});
        if (!c["gamma"] || !c["operator"]) fail_at(c, "model.channels[]", "gamma and operator are required");
        LindbladChannel ch;
        ch.gamma = read_double(c["gamma"], "model.channels[].gamma");
        if (!(ch.gamma >= 0.0)) fail_at(c["gamma"], "model.channels[].gamma", "must be >= 0");
        ch.jump = read_matrix(c["operator"], "model.channels[].operator");
        if (ch.jump.rows() != h.dim())
          fail_at(c["operator"], "model.channels[].operator", "dimension must match the Hamiltonian");
        channels.push_back(std::move(ch));
      }
    }
    s.kind = ScenarioKind::kOpen;
    s.battery_hamiltonian = h;
    s.lindblad_model.emplace(std::move(h), std::move(channels));
  } else {
    fail_at(kind_node, "kind", "must be 'closed' or 'open'");
  }
}

}  // namespace

Scenario load_scenario(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    std::ostringstream os;
    os << "parse error at line " << e.mark.line + 1 << ", column " << e.mark.column + 1 << ": "
       << e.msg;
    throw ConfigError(os.str());
  }
  if (!root.IsMap()) throw ConfigError("scenario document must be a mapping");
  check_keys(root, "", {"kind", "model", "initial_state", "beta", "times", "regularization",
                        "rank_tol", "step", "seed"});
  if (!root["model"]) throw ConfigError("model: required");

  Scenario s;
  load_model(root["model"], root["kind"], s);

  if (const auto n = root["beta"]) {
    s.beta = read_double(n, "beta");
    if (!(s.beta > 0.0) || !std::isfinite(s.beta)) fail_at(n, "beta", "must be > 0");
  }
  if (const auto n = root["times"]) {
    check_keys(n, "times", {"start", "end", "samples"});
    if (n["start"]) s.times.start = read_double(n["start"], "times.start");
    if (n["end"]) s.times.end = read_double(n["end"], "times.end");
    if (n["samples"]) {
      const auto v = read_int(n["samples"], "times.samples");
      if (v < 2 || v > 10000000) fail_at(n["samples"], "times.samples", "must be >= 2");
      s.times.samples = static_cast<int>(v);
    }
    if (!(s.times.start >= 0.0)) fail_at(n, "times.start", "must be >= 0");
    if (!(s.times.end > s.times.start)) fail_at(n, "times.end", "must be > times.start");
  }
  if (const auto n = root["regularization"]) {
    check_keys(n, "regularization", {"mode", "epsilon", "support_tol"});
    if (n["mode"]) {
      try {
        s.regularization.mode = parse_regularization_mode(read_string(n["mode"], "regularization.mode"));
      } catch (const InvalidArgument& e) {
        fail_at(n["mode"], "regularization.mode", e.what());
      }
    }
    if (n["epsilon"]) s.regularization.epsilon = read_double(n["epsilon"], "regularization.epsilon");
    if (n["support_tol"])
      s.regularization.support_tol = read_double(n["support_tol"], "regularization.support_tol");
    if (s.regularization.mode == RegularizationMode::kEpsilonMix &&
        !(s.regularization.epsilon > 0.0 && s.regularization.epsilon < 1.0))
      fail_at(n, "regularization.epsilon", "must lie in (0, 1) for epsilon-mix");
  }
  if (const auto n = root["rank_tol"]) {
    s.rank_tol = read_double(n, "rank_tol");
    if (!(s.rank_tol >= 0.0)) fail_at(n, "rank_tol", "must be >= 0");
  }
  if (const auto n = root["step"]) {
    s.step = read_double(n, "step");
    if (!(s.step > 0.0)) fail_at(n, "step", "must be > 0");
  }
  if (const auto n = root["seed"]) {
    try {
      s.seed = n.as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      fail_at(n, "seed", "expected an unsigned 64-bit integer");
    }
  }
  if (const auto n = root["initial_state"]) {
    check_keys(n, "initial_state", {"type", "index", "rank", "entries"});
    InitialStateSpec st;
    if (n["type"]) st.type = read_string(n["type"], "initial_state.type");
    if (n["index"]) st.index = read_int(n["index"], "initial_state.index");
    if (n["rank"]) st.rank = read_int(n["rank"], "initial_state.rank");
    if (n["entries"]) st.entries = read_matrix(n["entries"], "initial_state.entries");
    s.initial_state = std::move(st);
  }
  s.validate();
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load_scenario(buf.str());
}

namespace {

void emit_matrix(YAML::Emitter& out, const Matrix& m) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Index i = 0; i < m.rows(); ++i) {
    out << YAML::BeginSeq;
    for (Index j = 0; j < m.cols(); ++j)
      out << YAML::BeginSeq << m(i, j).real() << m(i, j).imag() << YAML::EndSeq;
    out << YAML::EndSeq;
  }
  out << YAML::EndSeq;
}

}  // namespace

std::string serialize_scenario(const Scenario& s) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << (s.kind == ScenarioKind::kClosed ? "closed" : "open");
  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  if (!s.model_name.empty()) {
    out << YAML::Key << "name" << YAML::Value << s.model_name;
    for (const auto& [k, v] : s.params) out << YAML::Key << k << YAML::Value << v;
  } else if (s.closed_model) {
    out << YAML::Key << "dims" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (Index d : s.closed_model->space().dims()) out << static_cast<long long>(d);
    out << YAML::EndSeq;
    out << YAML::Key << "local_hamiltonian" << YAML::Value;
    emit_matrix(out, s.closed_model->local().matrix());
    out << YAML::Key << "interaction" << YAML::Value;
    emit_matrix(out, s.closed_model->interaction().matrix());
    out << YAML::Key << "battery_hamiltonian" << YAML::Value;
    emit_matrix(out, s.battery_hamiltonian.matrix());
  } else if (s.lindblad_model) {
    out << YAML::Key << "hamiltonian" << YAML::Value;
    emit_matrix(out, s.lindblad_model->hamiltonian().matrix());
    out << YAML::Key << "channels" << YAML::Value << YAML::BeginSeq;
    for (const auto& c : s.lindblad_model->channels()) {
      out << YAML::BeginMap << YAML::Key << "gamma" << YAML::Value << c.gamma;
      out << YAML::Key << "operator" << YAML::Value;
      emit_matrix(out, c.jump);
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
  }
  out << YAML::EndMap;

  out << YAML::Key << "initial_state" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "type" << YAML::Value << s.initial_state.type;
  out << YAML::Key << "index" << YAML::Value << static_cast<long long>(s.initial_state.index);
  out << YAML::Key << "rank" << YAML::Value << static_cast<long long>(s.initial_state.rank);
  if (s.initial_state.entries) {
    out << YAML::Key << "entries" << YAML::Value;
    emit_matrix(out, *s.initial_state.entries);
  }
  out << YAML::EndMap;

  out << YAML::Key << "beta" << YAML::Value << s.beta;
  out << YAML::Key << "times" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "start" << YAML::Value << s.times.start;
  out << YAML::Key << "end" << YAML::Value << s.times.end;
  out << YAML::Key << "samples" << YAML::Value << s.times.samples;
  out << YAML::EndMap;
  out << YAML::Key << "regularization" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "mode" << YAML::Value << std::string(to_string(s.regularization.mode));
  out << YAML::Key << "epsilon" << YAML::Value << s.regularization.epsilon;
  out << YAML::Key << "support_tol" << YAML::Value << s.regularization.support_tol;
  out << YAML::EndMap;
  out << YAML::Key << "rank_tol" << YAML::Value << s.rank_tol;
  out << YAML::Key << "step" << YAML::Value << s.step;
  out << YAML::Key << "seed" << YAML::Value << static_cast<unsigned long long>(s.seed);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace qbat
