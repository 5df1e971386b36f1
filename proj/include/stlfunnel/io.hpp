#pragma once

// JSON encodings of predicates, selection policies, task encodings and
// reports, and the trajectory CSV format.

#include <stlfunnel/contracts.hpp>
#include <stlfunnel/parser.hpp>
#include <stlfunnel/simulate.hpp>

#include <nlohmann/json.hpp>

#include <charconv>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace stlfunnel {

using json = nlohmann::json;

namespace detail {

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline Vector to_vector(const json& j, const char* what) {
  if (!j.is_array()) throw Error(std::string(what) + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw Error(std::string(what) + " must be an array of numbers");
    v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
  }
  return v;
}

inline const json& require(const json& j, const char* key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key)) throw Error(ctx + ": missing field '" + key + "'");
  return j.at(key);
}

}  // namespace detail

// ---------------------------------------------------------------- predicates

inline json predicate_to_json(const Predicate& p) {
  json j;
  if (p.is_affine()) {
    j["type"] = "affine";
    j["coeffs"] = detail::to_std(p.as_affine().coeffs);
    j["offset"] = p.as_affine().offset;
  } else {
    j["type"] = "ball";
    j["center"] = detail::to_std(p.as_ball().center);
    j["radius"] = p.as_ball().radius;
  }
  j["selector"] = p.selector();
  return j;
}

/// {"type": "affine", "coeffs": [...], "offset": b, "selector": [...]} or
/// {"type": "ball", "center": [...], "radius": r, "selector": [...]}.
/// The selector defaults to 0..k-1.
inline Predicate predicate_from_json(const json& j, const std::string& name = "predicate") {
  const std::string ctx = "predicate '" + name + "'";
  const std::string type = detail::require(j, "type", ctx).get<std::string>();
  auto selector = [&](Eigen::Index k) {
    std::vector<int> sel;
    if (j.contains("selector")) {
      sel = j.at("selector").get<std::vector<int>>();
    } else {
      for (int i = 0; i < k; ++i) sel.push_back(i);
    }
    return sel;
  };
  if (type == "affine") {
    Vector a = detail::to_vector(detail::require(j, "coeffs", ctx), "coeffs");
    const double b = j.value("offset", 0.0);
    auto sel = selector(a.size());
    return Predicate::affine(std::move(a), b, std::move(sel));
  }
  if (type == "ball") {
    Vector c = detail::to_vector(detail::require(j, "center", ctx), "center");
    const double r = detail::require(j, "radius", ctx).get<double>();
    auto sel = selector(c.size());
    return Predicate::ball(std::move(c), r, std::move(sel));
  }
  throw Error(ctx + ": unknown type '" + type + "'");
}

inline PredicateEnv predicates_from_json(const json& j) {
  if (!j.is_object()) throw Error("predicates must be an object mapping names to predicates");
  PredicateEnv env;
  for (const auto& [name, spec] : j.items()) env.emplace(name, predicate_from_json(spec, name));
  return env;
}

// ---------------------------------------------------------------- policy

inline json policy_to_json(const SelectionPolicy& p) {
  return {{"t_star_fraction", p.t_star_fraction},   {"rho_max_fraction", p.rho_max_fraction},
          {"unbounded_margin", p.unbounded_margin}, {"r_fraction", p.r_fraction},
          {"gamma0_headroom", p.gamma0_headroom},   {"gamma_inf_fraction", p.gamma_inf_fraction},
          {"free_decay", p.free_decay}};
}

/// Applies the fields present in `j` on top of `base`.
inline SelectionPolicy policy_from_json(const json& j, SelectionPolicy base = {}) {
  if (j.is_null()) return base;
  if (!j.is_object()) throw Error("policy must be an object");
  static const std::set<std::string> known = {"t_star_fraction", "rho_max_fraction",
                                              "unbounded_margin", "r_fraction",
                                              "gamma0_headroom", "gamma_inf_fraction",
                                              "free_decay"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw Error("policy: unknown field '" + k + "'");
  base.t_star_fraction = j.value("t_star_fraction", base.t_star_fraction);
  base.rho_max_fraction = j.value("rho_max_fraction", base.rho_max_fraction);
  base.unbounded_margin = j.value("unbounded_margin", base.unbounded_margin);
  base.r_fraction = j.value("r_fraction", base.r_fraction);
  base.gamma0_headroom = j.value("gamma0_headroom", base.gamma0_headroom);
  base.gamma_inf_fraction = j.value("gamma_inf_fraction", base.gamma_inf_fraction);
  base.free_decay = j.value("free_decay", base.free_decay);
  base.validate();
  return base;
}

// ---------------------------------------------------------------- encodings

inline json encoding_to_json(const TaskEncoding& e) {
  json preds = json::object();
  for (const auto& lit : e.psi().literals()) preds[lit.name] = predicate_to_json(lit.predicate);
  return {{"formula", to_string(e.phi)},
          {"predicates", preds},
          {"funnel", {{"gamma0", e.funnel.gamma0}, {"gamma_inf", e.funnel.gamma_inf},
                      {"decay", e.funnel.decay}}},
          {"rho_max", e.rho_max},
          {"r", e.r},
          {"t_star", e.t_star},
          {"rho0", e.rho0},
          {"rho_opt", e.rho_opt},
          {"decay_solved", e.decay_solved}};
}

inline TaskEncoding encoding_from_json(const json& j) {
  const std::string ctx = "encoding";
  TaskEncoding e;
  const PredicateEnv env = predicates_from_json(detail::require(j, "predicates", ctx));
  e.phi = parse_formula(detail::require(j, "formula", ctx).get<std::string>(), env);
  const json& f = detail::require(j, "funnel", ctx);
  e.funnel = Funnel(detail::require(f, "gamma0", "funnel").get<double>(),
                    detail::require(f, "gamma_inf", "funnel").get<double>(),
                    detail::require(f, "decay", "funnel").get<double>());
  e.rho_max = detail::require(j, "rho_max", ctx).get<double>();
  e.r = detail::require(j, "r", ctx).get<double>();
  e.t_star = detail::require(j, "t_star", ctx).get<double>();
  e.rho0 = j.value("rho0", 0.0);
  e.rho_opt = j.value("rho_opt", 0.0);
  e.decay_solved = j.value("decay_solved", false);
  if (!(e.r > 0.0 && e.r < e.rho_max)) throw Error("encoding: r must lie in (0, rho_max)");
  return e;
}

/// Encodings file: distinct encodings, each listed once with the ids of the
/// subsystems that carry it. Instances sharing an encoding object, or equal
/// encodings, collapse into one group.
inline json encodings_to_json(const EncodingMap& encodings) {
  std::vector<std::pair<std::shared_ptr<const TaskEncoding>, std::vector<int>>> groups;
  for (const auto& [id, enc] : encodings) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == enc || *g.first == *enc; });
    if (it == groups.end())
      groups.push_back({enc, {id}});
    else
      it->second.push_back(id);
  }
  json arr = json::array();
  for (const auto& [enc, ids] : groups) {
    json g = encoding_to_json(*enc);
    g["subsystems"] = ids;
    arr.push_back(std::move(g));
  }
  return {{"encodings", arr}};
}

/// Inverse of `encodings_to_json`; subsystems of one group share one object.
inline EncodingMap encodings_from_json(const json& j) {
  EncodingMap out;
  for (const auto& g : detail::require(j, "encodings", "encodings file")) {
    auto enc = std::make_shared<const TaskEncoding>(encoding_from_json(g));
    for (int id : detail::require(g, "subsystems", "encoding group").get<std::vector<int>>())
      if (!out.emplace(id, enc).second)
        throw Error("encodings file lists subsystem " + std::to_string(id) + " twice");
  }
  return out;
}

// ---------------------------------------------------------------- reports

inline json report_to_json(const SatisfactionReport& r) {
  json j = {{"subsystem", r.subsystem},
            {"verdict", to_string(r.verdict)},
            {"delta", r.delta},
            {"which", to_string(r.which)}};
  j["violation_time"] = r.violation_time ? json(*r.violation_time) : json(nullptr);
  j["assumption_failure"] = r.assumption_failure ? json(*r.assumption_failure) : json(nullptr);
  j["guarantee_failure"] = r.guarantee_failure ? json(*r.guarantee_failure) : json(nullptr);
  if (!r.margins.empty())
    j["min_margin"] = *std::min_element(r.margins.begin(), r.margins.end());
  return j;
}

inline json composition_to_json(const CompositionReport& c) {
  return {{"initial_inside", c.initial_inside},
          {"uniform_strong", c.uniform_strong},
          {"assumptions_covered", c.assumptions_covered},
          {"passed", c.passed()},
          {"failures", c.failures}};
}

inline json clamp_event_to_json(const ClampEvent& e) {
  return {{"subsystem", e.subsystem}, {"t", e.t}, {"e_hat", e.e_hat}};
}

inline json violation_to_json(const Violation& v) {
  return {{"subsystem", v.subsystem}, {"t", v.t},         {"rho", v.rho},
          {"lower", v.lower},         {"upper", v.upper}};
}

// ---------------------------------------------------------------- CSV

namespace detail {

inline void put_number(std::string& out, double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  out.append(buf, ptr);
}

}  // namespace detail

/// Columns: t, then per subsystem <id>.x1..xn, <id>.u1..um, <id>.rho,
/// <id>.lower, <id>.upper. Every `stride`-th sample is written, always
/// including the first.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj, std::size_t stride = 1) {
  if (stride == 0) throw Error("CSV stride must be positive");
  std::string line = "t";
  for (std::size_t k = 0; k < traj.ids.size(); ++k) {
    const std::string id = std::to_string(traj.ids[k]);
    for (int i = 1; i <= traj.state_dims[k]; ++i) line += "," + id + ".x" + std::to_string(i);
    for (int i = 1; i <= traj.input_dims[k]; ++i) line += "," + id + ".u" + std::to_string(i);
    line += "," + id + ".rho," + id + ".lower," + id + ".upper";
  }
  line += '\n';
  os << line;
  for (std::size_t s = 0; s < traj.samples(); s += stride) {
    line.clear();
    const double t = traj.times[s];
    detail::put_number(line, t);
    for (std::size_t k = 0; k < traj.ids.size(); ++k) {
      const auto n = static_cast<std::size_t>(traj.state_dims[k]);
      const auto m = static_cast<std::size_t>(traj.input_dims[k]);
      for (std::size_t i = 0; i < n; ++i) {
        line += ',';
        detail::put_number(line, traj.states[k][s * n + i]);
      }
      for (std::size_t i = 0; i < m; ++i) {
        line += ',';
        detail::put_number(line, traj.inputs[k][s * m + i]);
      }
      const Envelope env = envelope(*traj.encodings[k], t);
      line += ',';
      detail::put_number(line, traj.rho[k][s]);
      line += ',';
      detail::put_number(line, env.lower);
      line += ',';
      detail::put_number(line, env.upper);
    }
    line += '\n';
    os << line;
  }
}

/// Column-wise view of a trajectory CSV.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

  bool has(const std::string& name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
  }

  const std::vector<double>& column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("CSV has no column '" + name + "'");
    return columns[static_cast<std::size_t>(it - header.begin())];
  }

  const std::vector<double>& times() const { return column("t"); }

  /// Subsystem ids in column order, taken from the "<id>.rho" columns.
  std::vector<int> ids() const {
    std::vector<int> out;
    for (const auto& h : header) {
      const auto dot = h.find('.');
      if (dot != std::string::npos && h.substr(dot + 1) == "rho") out.push_back(std::stoi(h.substr(0, dot)));
    }
    return out;
  }

  int state_dim(int id) const {
    int n = 0;
    while (has(std::to_string(id) + ".x" + std::to_string(n + 1))) ++n;
    return n;
  }

  RobustnessTrace rho_trace(int id) const { return {times(), column(std::to_string(id) + ".rho")}; }
};

inline CsvTable read_csv(std::istream& is) {
  CsvTable tab;
  std::string line;
  if (!std::getline(is, line)) return tab;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) tab.header.push_back(cell);
  }
  if (tab.header.empty() || tab.header.front() != "t") throw Error("CSV: first column must be 't'");
  tab.columns.resize(tab.header.size());
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t col = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (true) {
      if (col >= tab.header.size()) throw Error("CSV row " + std::to_string(row) + ": too many fields");
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) throw Error("CSV row " + std::to_string(row) + ": malformed number");
      tab.columns[col++].push_back(v);
      if (next == end) break;
      if (*next != ',') throw Error("CSV row " + std::to_string(row) + ": malformed number");
      p = next + 1;
    }
    if (col != tab.header.size()) throw Error("CSV row " + std::to_string(row) + ": too few fields");
  }
  return tab;
}

}  // namespace stlfunnel
