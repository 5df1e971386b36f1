#pragma once

// Project configuration and the design -> simulate -> monitor -> verify
// pipeline used by the command-line tool.

#include <stlfunnel/io.hpp>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <ctime>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace stlfunnel {

inline constexpr const char* kToolVersion = "1.0.0";

struct TaskGroup {
  std::vector<int> subsystems;  // resolved ids
  std::string selection;        // "odd", "even", "all" or empty for explicit ids
  std::string formula;
  SelectionPolicy policy;
};

struct ModelSpec {
  std::string kind = "rooms";  // rooms | robots | linear
  int rooms = 3;
  RoomParameters room;
  RobotParameters robot;
  json linear;  // subsystems of the inline linear model
  std::map<int, Vector> initial_states;
};

struct OutputSpec {
  std::string dir = "out";
  bool plot = true;
  std::size_t stride = 1;
};

struct ProjectConfig {
  PredicateEnv predicates;
  std::vector<TaskGroup> tasks;
  ModelSpec model;
  SimConfig sim;
  OutputSpec output;
  RhoOptOptions rho_opt;
  double clamp_margin = 1e-9;
  json source;  // the parsed document, used for hashing
};

namespace detail {

inline Matrix to_matrix(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw Error(std::string(what) + " must be a non-empty array of rows");
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw Error(std::string(what) + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return m;
}

inline void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& ctx) {
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw Error(ctx + ": unknown field '" + k + "'");
}

}  // namespace detail

inline ProjectConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error("config must be a JSON object");
  detail::reject_unknown(j, {"predicates", "tasks", "model", "sim", "output", "rho_opt", "seed",
                             "clamp_margin", "description"},
                         "config");
  ProjectConfig cfg;
  cfg.source = j;
  cfg.predicates = predicates_from_json(detail::require(j, "predicates", "config"));

  for (const auto& t : detail::require(j, "tasks", "config")) {
    detail::reject_unknown(t, {"subsystems", "formula", "policy"}, "task");
    TaskGroup g;
    const json& sel = detail::require(t, "subsystems", "task");
    if (sel.is_string()) {
      g.selection = sel.get<std::string>();
      if (g.selection != "odd" && g.selection != "even" && g.selection != "all")
        throw Error("task: subsystems must be an id list or one of odd, even, all");
    } else {
      g.subsystems = sel.get<std::vector<int>>();
    }
    g.formula = detail::require(t, "formula", "task").get<std::string>();
    parse_formula(g.formula, cfg.predicates);
    g.policy = policy_from_json(t.value("policy", json()));
    cfg.tasks.push_back(std::move(g));
  }

  const json& m = detail::require(j, "model", "config");
  detail::reject_unknown(m, {"builtin", "n", "parameters", "subsystems", "initial_states"}, "model");
  if (m.contains("builtin")) {
    cfg.model.kind = m.at("builtin").get<std::string>();
    const json prm = m.value("parameters", json::object());
    if (cfg.model.kind == "rooms") {
      cfg.model.rooms = m.value("n", 3);
      auto& r = cfg.model.room;
      detail::reject_unknown(prm, {"alpha", "alpha_e", "alpha_h", "t_e", "t_h", "t0_odd", "t0_even"},
                             "room parameters");
      r.alpha = prm.value("alpha", r.alpha);
      r.alpha_e = prm.value("alpha_e", r.alpha_e);
      r.alpha_h = prm.value("alpha_h", r.alpha_h);
      r.t_e = prm.value("t_e", r.t_e);
      r.t_h = prm.value("t_h", r.t_h);
      r.t0_odd = prm.value("t0_odd", r.t0_odd);
      r.t0_even = prm.value("t0_even", r.t0_even);
    } else if (cfg.model.kind == "robots") {
      auto& r = cfg.model.robot;
      detail::reject_unknown(prm, {"wheel_radius", "body_radius", "coupling"}, "robot parameters");
      r.wheel_radius = prm.value("wheel_radius", r.wheel_radius);
      r.body_radius = prm.value("body_radius", r.body_radius);
      r.coupling = prm.value("coupling", r.coupling);
    } else {
      throw Error("model: unknown builtin '" + cfg.model.kind + "'");
    }
  } else {
    cfg.model.kind = "linear";
    cfg.model.linear = detail::require(m, "subsystems", "model");
  }
  if (m.contains("initial_states"))
    for (const auto& [id, v] : m.at("initial_states").items())
      cfg.model.initial_states[std::stoi(id)] = detail::to_vector(v, "initial state");

  if (j.contains("sim")) {
    const json& s = j.at("sim");
    detail::reject_unknown(s, {"dt", "horizon", "integrator", "substeps", "parallel", "threads",
                               "probe_actuation"},
                           "sim");
    cfg.sim.dt = s.value("dt", cfg.sim.dt);
    cfg.sim.horizon = s.value("horizon", cfg.sim.horizon);
    const std::string integ = s.value("integrator", std::string("rk4"));
    if (integ == "rk4")
      cfg.sim.integrator = Integrator::Rk4;
    else if (integ == "euler")
      cfg.sim.integrator = Integrator::Euler;
    else
      throw Error("sim: integrator must be rk4 or euler");
    cfg.sim.substeps = s.value("substeps", 1);
    cfg.sim.parallel = s.value("parallel", false);
    cfg.sim.threads = s.value("threads", 0u);
    cfg.sim.probe_actuation = s.value("probe_actuation", false);
    cfg.sim.steps();
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    detail::reject_unknown(o, {"dir", "plot", "stride"}, "output");
    cfg.output.dir = o.value("dir", cfg.output.dir);
    cfg.output.plot = o.value("plot", cfg.output.plot);
    cfg.output.stride = o.value("stride", std::size_t{1});
    if (cfg.output.stride == 0) throw Error("output: stride must be positive");
  }
  if (j.contains("rho_opt")) {
    const json& r = j.at("rho_opt");
    detail::reject_unknown(r, {"box", "starts"}, "rho_opt");
    if (r.contains("box")) {
      const auto box = r.at("box").get<std::vector<double>>();
      if (box.size() != 2 || !(box[0] < box[1])) throw Error("rho_opt: box must be [lo, hi] with lo < hi");
      cfg.rho_opt.box_lo = box[0];
      cfg.rho_opt.box_hi = box[1];
    }
    cfg.rho_opt.starts = r.value("starts", cfg.rho_opt.starts);
  }
  cfg.rho_opt.seed = j.value("seed", std::uint64_t{0});
  cfg.clamp_margin = j.value("clamp_margin", cfg.clamp_margin);
  return cfg;
}

inline ProjectConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

/// Linear subsystems x' = A x + c + B u + H w.
inline Network linear_model(const json& subsystems) {
  std::vector<Subsystem> out;
  for (const auto& js : subsystems) {
    detail::reject_unknown(js, {"id", "A", "c", "B", "H", "neighbors", "x0"}, "linear subsystem");
    Subsystem s;
    s.id = detail::require(js, "id", "linear subsystem").get<int>();
    const std::string ctx = "linear subsystem " + std::to_string(s.id);
    const Matrix a = detail::to_matrix(detail::require(js, "A", ctx), "A");
    const Matrix b = detail::to_matrix(detail::require(js, "B", ctx), "B");
    s.n = static_cast<int>(a.rows());
    s.m = static_cast<int>(b.cols());
    if (a.cols() != a.rows() || b.rows() != a.rows()) throw DimensionError(ctx + ": A must be n x n and B n x m");
    const Vector c = js.contains("c") ? detail::to_vector(js.at("c"), "c") : Vector::Zero(s.n);
    if (c.size() != s.n) throw DimensionError(ctx + ": c must have length n");
    s.neighbors = js.value("neighbors", std::vector<int>{});
    Matrix h;
    if (js.contains("H")) {
      h = detail::to_matrix(js.at("H"), "H");
      if (h.rows() != s.n) throw DimensionError(ctx + ": H must have n rows");
    } else {
      h = Matrix::Zero(s.n, 0);
    }
    s.p = static_cast<int>(h.cols());
    s.f = [a, c](const Vector& x) -> Vector { return a * x + c; };
    s.g = [b](const Vector&) -> Matrix { return b; };
    s.h = [h](const Vector& w) -> Vector { return h * w; };
    if (js.contains("x0")) s.x0 = detail::to_vector(js.at("x0"), "x0");
    out.push_back(std::move(s));
  }
  return Network(std::move(out));
}

inline Network build_network(const ProjectConfig& cfg) {
  if (cfg.model.kind == "rooms") return builtin_room_model(cfg.model.rooms, cfg.model.room);
  if (cfg.model.kind == "robots") return builtin_robot_model(cfg.model.robot);
  return linear_model(cfg.model.linear);
}

inline Vector initial_state(const ProjectConfig& cfg, const Network& net) {
  Vector x(net.dim());
  for (std::size_t k = 0; k < net.size(); ++k) {
    const auto& s = net.subsystems()[k];
    auto it = cfg.model.initial_states.find(s.id);
    const Vector& xi = it != cfg.model.initial_states.end() ? it->second : s.x0;
    if (xi.size() != s.n)
      throw InitialConditionError("subsystem " + std::to_string(s.id) +
                                  ": missing or mis-sized initial state");
    x.segment(net.offset(k), s.n) = xi;
  }
  for (const auto& [id, v] : cfg.model.initial_states)
    if (!net.contains(id)) throw TopologyError("initial state given for unknown subsystem " + std::to_string(id));
  return x;
}

struct ResolvedTask {
  TemporalFormula phi;
  std::string formula;
  SelectionPolicy policy;
};

/// One task per subsystem; every subsystem needs exactly one.
inline std::map<int, ResolvedTask> resolve_tasks(const ProjectConfig& cfg, const Network& net) {
  std::map<int, ResolvedTask> out;
  for (const auto& g : cfg.tasks) {
    std::vector<int> ids = g.subsystems;
    if (!g.selection.empty())
      for (const auto& s : net.subsystems())
        if (g.selection == "all" || (g.selection == "odd") == (s.id % 2 != 0)) ids.push_back(s.id);
    for (int id : ids) {
      if (!net.contains(id)) throw TopologyError("task given for unknown subsystem " + std::to_string(id));
      ResolvedTask t{parse_formula(g.formula, cfg.predicates), g.formula, g.policy};
      const int need = t.phi.psi.required_dim();
      if (need > net.at(id).n)
        throw DimensionError("task of subsystem " + std::to_string(id) +
                             " selects coordinates beyond the state dimension");
      if (!out.emplace(id, std::move(t)).second)
        throw Error("subsystem " + std::to_string(id) + " has more than one task");
    }
  }
  for (const auto& s : net.subsystems())
    if (!out.count(s.id)) throw Error("subsystem " + std::to_string(s.id) + " has no task");
  return out;
}

/// Designs one encoding per subsystem. Subsystems with equal formula, policy
/// and initial robustness share one encoding object; rho_opt is computed
/// once per formula.
inline EncodingMap design(const ProjectConfig& cfg, const Network& net, const Vector& x0) {
  const auto tasks = resolve_tasks(cfg, net);
  std::map<std::string, double> opt_cache;
  std::vector<std::shared_ptr<const TaskEncoding>> pool;
  EncodingMap out;
  for (std::size_t k = 0; k < net.size(); ++k) {
    const int id = net.subsystems()[k].id;
    const ResolvedTask& t = tasks.at(id);
    const auto rep = validate_concavity(t.phi.psi);
    if (!rep.concave) throw ConcavityError("task of subsystem " + std::to_string(id) + " is not concave");
    auto it = opt_cache.find(t.formula);
    if (it == opt_cache.end()) it = opt_cache.emplace(t.formula, rho_opt(t.phi.psi, cfg.rho_opt)).first;
    const double rho0 = eval_rho(t.phi.psi, net.state_of(x0, k));
    TaskEncoding enc;
    try {
      enc = design_parameters(t.phi, rho0, it->second, t.policy);
    } catch (const InfeasibleTaskError& e) {
      throw InfeasibleTaskError("subsystem " + std::to_string(id) + ": " + e.what());
    }
    auto same = std::find_if(pool.begin(), pool.end(), [&](const auto& p) { return *p == enc; });
    if (same == pool.end()) {
      pool.push_back(std::make_shared<const TaskEncoding>(std::move(enc)));
      same = pool.end() - 1;
    }
    out.emplace(id, *same);
  }
  return out;
}

inline std::vector<ControlLaw> make_laws(const Network& net, const EncodingMap& encodings,
                                         double clamp_margin = 1e-9) {
  std::vector<ControlLaw> laws;
  auto find = [&](int id) {
    auto it = encodings.find(id);
    if (it == encodings.end()) throw Error("no task encoding for subsystem " + std::to_string(id));
    return it->second;
  };
  for (const auto& s : net.subsystems()) {
    std::vector<NeighborFunnel> nb;
    for (int j : s.neighbors) nb.push_back({find(j)->funnel, net.at(j).n});
    laws.emplace_back(s.id, find(s.id), std::move(nb), clamp_margin);
  }
  return laws;
}

// ---------------------------------------------------------------- analysis

struct MonitorEntry {
  int subsystem = 0;
  std::string formula;
  double value = 0.0;
  bool complete = true;
  double r = 0.0;
  bool pass = false;
  std::string error;  // coverage problems
};

/// rho^phi(x, 0) per subsystem from its rho-trace; pass iff value >= r.
/// Eventually-windows reaching past the trace are scored on the witnesses
/// the trace contains.
template <class TraceOf>
std::vector<MonitorEntry> monitor_all(const EncodingMap& encodings, TraceOf&& trace_of) {
  std::vector<MonitorEntry> out;
  for (const auto& [id, enc] : encodings) {
    MonitorEntry m;
    m.subsystem = id;
    m.formula = to_string(enc->phi);
    m.r = enc->r;
    try {
      const MonitorResult res = monitor_bound(enc->phi, trace_of(id));
      m.value = res.value;
      m.complete = res.complete;
      m.pass = res.value >= enc->r;
    } catch (const CoverageError& e) {
      m.error = e.what();
      m.pass = false;
    }
    out.push_back(std::move(m));
  }
  return out;
}

struct VerifyResult {
  ContractMap contracts;
  std::map<int, SatisfactionReport> weak;
  std::map<int, SatisfactionReport> strong;
  CompositionReport composition;

  bool all_uniform_strong() const {
    return std::all_of(strong.begin(), strong.end(),
                       [](const auto& p) { return p.second.verdict == Verdict::UniformStrong; });
  }
};

template <class TraceOf>
VerifyResult verify(const Network& net, const EncodingMap& encodings, const Vector& x0,
                    TraceOf&& trace_of, double horizon) {
  VerifyResult v;
  v.contracts = assemble_contracts(net, encodings);
  std::map<int, Vector> init;
  for (std::size_t k = 0; k < net.size(); ++k) init[net.subsystems()[k].id] = net.state_of(x0, k);
  for (const auto& s : net.subsystems()) {
    const RobustnessTrace own = trace_of(s.id);
    std::vector<RobustnessTrace> nbs;
    for (int j : s.neighbors) nbs.push_back(trace_of(j));
    const Contract& c = v.contracts.at(s.id);
    v.weak.emplace(s.id, check_weak(own, nbs, c));
    v.strong.emplace(s.id, check_uniform_strong(own, nbs, c));
  }
  CompositionOptions opt;
  opt.horizon = horizon;
  v.composition = check_composition(v.contracts, net, init, v.strong, opt);
  return v;
}

/// Overall outcome; ok() is the exit-code contract of the tool.
struct RunSummary {
  std::size_t violations = 0;
  std::size_t clamps = 0;
  std::size_t monitor_failures = 0;
  std::size_t not_uniform_strong = 0;
  bool composition_failed = false;

  bool ok() const {
    return violations == 0 && clamps == 0 && monitor_failures == 0 && not_uniform_strong == 0 &&
           !composition_failed;
  }
};

// ---------------------------------------------------------------- manifest

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string config_hash(const ProjectConfig& cfg) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(cfg.source.dump());
  return os.str();
}

/// UTC time in ISO 8601; SOURCE_DATE_EPOCH overrides the clock.
inline std::string timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::strtoll(sde, nullptr, 10));
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline json contracts_to_json(const ContractMap& contracts) {
  json arr = json::array();
  for (const auto& [id, c] : contracts) {
    std::vector<int> assumed;
    for (const auto& a : c.assumptions) assumed.push_back(a.subsystem);
    arr.push_back({{"subsystem", id}, {"assumes", assumed}, {"guarantee", c.guarantee.subsystem}});
  }
  return arr;
}

inline json manifest(const ProjectConfig& cfg, const Network& net, const EncodingMap& encodings) {
  return {{"tool", "stlfunnel"},
          {"version", kToolVersion},
          {"config_hash", config_hash(cfg)},
          {"created", timestamp()},
          {"subsystems", net.size()},
          {"encodings", encodings_to_json(encodings).at("encodings")},
          {"contracts", contracts_to_json(assemble_contracts(net, encodings))}};
}

// ---------------------------------------------------------------- demos

/// Temperature regulation of a circular building. Odd rooms settle in
/// [21, 25], even rooms in [28, 30]. The funnels reach their final bound at
/// the start of the always-window.
inline json rooms_demo_config(int n = 3) {
  const json left = {{"t_star_fraction", 0.0}};
  return {
      {"description", "Circular building of N rooms with per-room temperature tasks"},
      {"predicates",
       {{"le25", {{"type", "affine"}, {"coeffs", {-1.0}}, {"offset", 25.0}}},
        {"ge21", {{"type", "affine"}, {"coeffs", {1.0}}, {"offset", -21.0}}},
        {"le30", {{"type", "affine"}, {"coeffs", {-1.0}}, {"offset", 30.0}}},
        {"ge28", {{"type", "affine"}, {"coeffs", {1.0}}, {"offset", -28.0}}}}},
      {"tasks",
       {{{"subsystems", "odd"}, {"formula", "F[0,1000]G[200,1000] (le25 & ge21)"}, {"policy", left}},
        {{"subsystems", "even"}, {"formula", "F[0,1000]G[500,1000] (le30 & ge28)"}, {"policy", left}}}},
      {"model", {{"builtin", "rooms"}, {"n", n}}},
      {"sim", {{"dt", 0.1}, {"horizon", 1000.0}, {"integrator", "rk4"}, {"substeps", 4}}},
      {"output", {{"dir", "out/rooms"}, {"plot", true}, {"stride", n > 10 ? 100 : 1}}},
      {"seed", 0}};
}

/// Five omnidirectional robots, each reaching a goal disc with a prescribed
/// heading within 7.5 degrees.
inline json robots_demo_config() {
  const double deg = 180.0 / std::numbers::pi;
  struct Goal {
    double x, y, radius, heading;
  };
  const Goal goals[] = {{0.7, 0.6, 0.05, 0.0},
                        {0.725, 0.45, 0.5, -90.0},
                        {0.5, 0.425, 0.5, -180.0},
                        {0.475, 0.55, 0.5, 145.0},
                        {0.575, 0.65, 0.5, 45.0}};
  json preds = json::object();
  json tasks = json::array();
  for (int i = 1; i <= 5; ++i) {
    const Goal& g = goals[i - 1];
    const std::string s = std::to_string(i);
    preds["goal" + s] = {{"type", "ball"}, {"center", {g.x, g.y}}, {"radius", g.radius}, {"selector", {0, 1}}};
    preds["head" + s + "_hi"] = {{"type", "affine"}, {"coeffs", {-deg}}, {"offset", g.heading + 7.5}, {"selector", {2}}};
    preds["head" + s + "_lo"] = {{"type", "affine"}, {"coeffs", {deg}}, {"offset", -(g.heading - 7.5)}, {"selector", {2}}};
    tasks.push_back({{"subsystems", {i}},
                     {"formula", "F[0,35]G[30,35] (goal" + s + " & head" + s + "_hi & head" + s + "_lo)"},
                     {"policy", {{"t_star_fraction", 0.0}}}});
  }
  return {{"description", "Five omnidirectional robots with goal-disc and heading tasks"},
          {"predicates", preds},
          {"tasks", tasks},
          {"model", {{"builtin", "robots"}}},
          {"sim", {{"dt", 0.001}, {"horizon", 35.0}, {"integrator", "rk4"}, {"substeps", 1}}},
          {"output", {{"dir", "out/robots"}, {"plot", true}, {"stride", 10}}},
          {"seed", 0}};
}

}  // namespace stlfunnel
