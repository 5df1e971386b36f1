// stlfunnel: design, simulate, monitor, verify and plot funnel-based STL
// controllers for interconnected systems.
//
// Exit codes: 0 success, 1 a run completed but a check failed (funnel
// violation, clamp event, monitor below r, contract not uniform-strong),
// 2 usage or input error.

#include <stlfunnel.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace stlfunnel;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string encodings;
  std::string trajectory;
  std::optional<double> dt;
  std::optional<double> horizon;
  std::optional<int> n;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> stride;
  bool parallel = false;
  std::size_t max_plots = 8;
  bool emit_config = false;
  std::string demo;
};

std::string output_dir(const Options& o, const ProjectConfig* cfg) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("STLFUNNEL_OUT"); env && *env) return env;
  return cfg ? cfg->output.dir : std::string("out");
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write '" + p.string() + "'");
  f << text;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw Error("'" + path + "': " + e.what());
  }
}

/// Applies the command-line overrides to a parsed config document.
ProjectConfig resolve_config(json doc, const Options& o) {
  if (o.n) {
    if (!doc.contains("model") || doc["model"].value("builtin", "") != "rooms")
      throw Error("--n applies to the rooms model only");
    doc["model"]["n"] = *o.n;
  }
  if (o.dt) doc["sim"]["dt"] = *o.dt;
  if (o.horizon) doc["sim"]["horizon"] = *o.horizon;
  if (o.parallel) doc["sim"]["parallel"] = true;
  if (o.seed) doc["seed"] = *o.seed;
  if (o.stride) doc["output"]["stride"] = *o.stride;
  return config_from_json(doc);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void print_design(const EncodingMap& encodings) {
  const json groups = encodings_to_json(encodings).at("encodings");
  std::cout << groups.size() << " distinct encoding(s) for " << encodings.size()
            << " subsystem(s)\n";
  for (const auto& g : groups) {
    const auto ids = g.at("subsystems").get<std::vector<int>>();
    std::cout << "  " << g.at("formula").get<std::string>() << "  [" << ids.size()
              << " subsystem(s), first " << ids.front() << "]\n"
              << "    t*=" << fmt(g["t_star"]) << " rho_max=" << fmt(g["rho_max"])
              << " r=" << fmt(g["r"]) << " gamma0=" << fmt(g["funnel"]["gamma0"])
              << " gamma_inf=" << fmt(g["funnel"]["gamma_inf"]) << " l=" << fmt(g["funnel"]["decay"])
              << " rho0=" << fmt(g["rho0"]) << " rho_opt=" << fmt(g["rho_opt"]) << "\n";
  }
}

std::string design_report(const EncodingMap& encodings) {
  std::ostringstream os;
  os << "subsystem  t_star  rho_max  r  gamma0  gamma_inf  l  rho0  rho_opt  formula\n";
  for (const auto& [id, e] : encodings)
    os << id << "  " << fmt(e->t_star) << "  " << fmt(e->rho_max) << "  " << fmt(e->r) << "  "
       << fmt(e->funnel.gamma0) << "  " << fmt(e->funnel.gamma_inf) << "  " << fmt(e->funnel.decay)
       << "  " << fmt(e->rho0) << "  " << fmt(e->rho_opt) << "  " << to_string(e->phi) << "\n";
  return os.str();
}

json monitor_json(const std::vector<MonitorEntry>& entries) {
  json arr = json::array();
  for (const auto& m : entries) {
    json j = {{"subsystem", m.subsystem}, {"formula", m.formula}, {"value", m.value},
              {"r", m.r},                 {"margin", m.value - m.r}, {"complete", m.complete},
              {"pass", m.pass}};
    if (!m.error.empty()) j["error"] = m.error;
    arr.push_back(std::move(j));
  }
  return arr;
}

std::size_t print_monitor(const std::vector<MonitorEntry>& entries, std::size_t show = 10) {
  std::size_t failed = 0, shown = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& m : entries) {
    if (!m.pass) ++failed;
    if (m.error.empty()) worst = std::min(worst, m.value - m.r);
    if (shown < show || !m.pass) {
      std::cout << "  subsystem " << m.subsystem << ": rho=" << fmt(m.value) << " r=" << fmt(m.r)
                << (m.complete ? "" : " (windows cut by horizon)") << (m.pass ? "  pass" : "  FAIL")
                << (m.error.empty() ? "" : "  " + m.error) << "\n";
      ++shown;
    }
  }
  if (entries.size() > shown) std::cout << "  ... " << entries.size() - shown << " more\n";
  std::cout << "monitor: " << entries.size() - failed << "/" << entries.size()
            << " pass, smallest margin " << fmt(worst) << "\n";
  return failed;
}

json verify_json(const VerifyResult& v) {
  json reports = json::array();
  for (const auto& [id, r] : v.strong) {
    json j = report_to_json(r);
    j["weak"] = to_string(v.weak.at(id).verdict);
    reports.push_back(std::move(j));
  }
  return {{"reports", reports},
          {"composition", composition_to_json(v.composition)},
          {"contracts", contracts_to_json(v.contracts)},
          {"global", v.composition.passed() && v.all_uniform_strong() ? "satisfied" : "not established"}};
}

std::size_t print_verify(const VerifyResult& v) {
  std::size_t bad = 0;
  double dmin = std::numeric_limits<double>::infinity();
  for (const auto& [id, r] : v.strong) {
    dmin = std::min(dmin, r.delta);
    if (r.verdict != Verdict::UniformStrong) {
      ++bad;
      std::cout << "  subsystem " << id << ": " << to_string(r.verdict) << " (weak: "
                << to_string(v.weak.at(id).verdict) << ", delta=" << fmt(r.delta) << ")\n";
    }
  }
  std::cout << "contracts: " << v.strong.size() - bad << "/" << v.strong.size()
            << " uniform-strong, smallest delta " << fmt(dmin) << "\n";
  std::cout << "composition: (i) initial " << (v.composition.initial_inside ? "ok" : "FAIL")
            << ", (ii) uniform-strong " << (v.composition.uniform_strong ? "ok" : "FAIL")
            << ", (iii) assumptions cover guarantees "
            << (v.composition.assumptions_covered ? "ok" : "FAIL") << "\n";
  for (std::size_t k = 0; k < std::min<std::size_t>(10, v.composition.failures.size()); ++k)
    std::cout << "  " << v.composition.failures[k] << "\n";
  return bad;
}

std::vector<int> plotted_ids(const std::vector<int>& ids, std::size_t max_plots) {
  if (ids.size() <= max_plots) return ids;
  std::vector<int> out;
  for (std::size_t k = 0; k < max_plots; ++k) out.push_back(ids[k]);
  return out;
}

void plot_csv(const CsvTable& tab, const EncodingMap* encodings, const fs::path& dir,
              const std::string& csv_name, std::size_t max_plots) {
  fs::create_directories(dir);
  const std::vector<int> ids = tab.ids();
  if (tab.rows() == 0 || ids.empty()) {
    std::cerr << "warning: trajectory is empty, writing an empty plot\n";
    PlotSpec p;
    p.title = "empty trajectory";
    std::ofstream f(dir / "funnels.svg");
    write_svg(f, p);
    return;
  }
  const auto& t = tab.times();
  const auto shown = plotted_ids(ids, max_plots);
  for (int id : shown) {
    const std::string s = std::to_string(id);
    PlotSpec p = funnel_plot("Funnel of subsystem " + s, t, tab.column(s + ".rho"),
                             tab.column(s + ".lower"), tab.column(s + ".upper"));
    std::ofstream f(dir / ("funnel_" + s + ".svg"));
    write_svg(f, p);
  }
  PlotSpec st;
  const int n = tab.state_dim(ids.front());
  if (n >= 2) {
    st.title = "Planar trajectories";
    st.xlabel = "x1";
    st.ylabel = "x2";
    st.equal_aspect = true;
    for (std::size_t k = 0; k < shown.size(); ++k) {
      const std::string s = std::to_string(shown[k]);
      const std::string color = palette()[k % palette().size()];
      st.series.push_back({s, tab.column(s + ".x1"), tab.column(s + ".x2"), false, color});
      if (encodings && encodings->count(shown[k]))
        for (const auto& lit : encodings->at(shown[k])->psi().literals())
          if (lit.predicate.is_ball() && lit.predicate.selector() == std::vector<int>{0, 1}) {
            const auto& b = lit.predicate.as_ball();
            st.circles.push_back({b.center[0], b.center[1], b.radius, color});
          }
    }
  } else {
    st.title = "States";
    st.xlabel = "t [s]";
    st.ylabel = "x1";
    for (std::size_t k = 0; k < shown.size(); ++k) {
      const std::string s = std::to_string(shown[k]);
      st.series.push_back({s, t, tab.column(s + ".x1"), false, palette()[k % palette().size()]});
    }
  }
  {
    std::ofstream f(dir / "states.svg");
    write_svg(f, st);
  }
  write_text(dir / "funnels.gp", gnuplot_script(csv_name, shown, tab.header));
  std::cout << "plots: " << shown.size() << " funnel plot(s) and states.svg in " << dir.string() << "\n";
}

CsvTable load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open trajectory '" + path + "'");
  return read_csv(f);
}

/// States of the first CSV row, stacked in network order.
Vector initial_state_from_csv(const CsvTable& tab, const Network& net) {
  if (tab.rows() == 0) throw Error("trajectory is empty");
  Vector x(net.dim());
  for (std::size_t k = 0; k < net.size(); ++k) {
    const auto& s = net.subsystems()[k];
    for (int i = 0; i < s.n; ++i)
      x[net.offset(k) + i] = tab.column(std::to_string(s.id) + ".x" + std::to_string(i + 1)).front();
  }
  return x;
}

struct SimOutcome {
  Trajectory traj;
  std::vector<Violation> violations;
};

SimOutcome run_and_write_sim(const ProjectConfig& cfg, const Network& net, const EncodingMap& enc,
                             const Vector& x0, const fs::path& dir) {
  const auto laws = make_laws(net, enc, cfg.clamp_margin);
  const auto t0 = std::chrono::steady_clock::now();
  SimOutcome out{simulate(net, laws, cfg.sim, x0), {}};
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.violations = envelope_violations(out.traj);
  {
    std::ofstream f(dir / "trajectory.csv", std::ios::binary);
    write_trajectory_csv(f, out.traj, cfg.output.stride);
  }
  {
    std::string lines;
    for (const auto& e : out.traj.clamp_events) lines += clamp_event_to_json(e).dump() + "\n";
    write_text(dir / "events.jsonl", lines);
  }
  json viol = json::array();
  for (const auto& v : out.violations) viol.push_back(violation_to_json(v));
  write_json(dir / "violations.json", viol);
  std::cout << "simulated " << net.size() << " subsystem(s), " << out.traj.samples()
            << " samples in " << fmt(secs) << " s; " << out.violations.size()
            << " funnel violation(s), " << out.traj.clamp_events.size() << " clamp event(s)\n";
  for (std::size_t k = 0; k < std::min<std::size_t>(10, out.violations.size()); ++k) {
    const auto& v = out.violations[k];
    std::cout << "  subsystem " << v.subsystem << " leaves its funnel at t=" << fmt(v.t)
              << " (rho=" << fmt(v.rho) << ", envelope (" << fmt(v.lower) << ", " << fmt(v.upper)
              << "))\n";
  }
  return out;
}

EncodingMap load_or_design(const ProjectConfig& cfg, const Network& net, const Vector& x0,
                           const Options& o, const fs::path& dir) {
  std::string path = o.encodings;
  if (path.empty() && fs::exists(dir / "encodings.json")) path = (dir / "encodings.json").string();
  if (!path.empty()) {
    EncodingMap enc = encodings_from_json(read_json(path));
    for (const auto& s : net.subsystems())
      if (!enc.count(s.id)) throw Error("encodings file has no entry for subsystem " + std::to_string(s.id));
    return enc;
  }
  std::cout << "no encodings given, designing from the config\n";
  return design(cfg, net, x0);
}

int cmd_design(const Options& o) {
  const ProjectConfig cfg = resolve_config(read_json(o.config), o);
  const fs::path dir = output_dir(o, &cfg);
  fs::create_directories(dir);
  const Network net = build_network(cfg);
  const Vector x0 = initial_state(cfg, net);
  const EncodingMap enc = design(cfg, net, x0);
  write_json(dir / "encodings.json", encodings_to_json(enc));
  write_json(dir / "manifest.json", manifest(cfg, net, enc));
  write_text(dir / "design.txt", design_report(enc));
  print_design(enc);
  std::cout << "wrote " << (dir / "encodings.json").string() << "\n";
  return 0;
}

int cmd_simulate(const Options& o) {
  const ProjectConfig cfg = resolve_config(read_json(o.config), o);
  const fs::path dir = output_dir(o, &cfg);
  fs::create_directories(dir);
  const Network net = build_network(cfg);
  const Vector x0 = initial_state(cfg, net);
  const EncodingMap enc = load_or_design(cfg, net, x0, o, dir);
  SimOutcome sim;
  try {
    sim = run_and_write_sim(cfg, net, enc, x0, dir);
  } catch (const InitialConditionError& e) {
    json rep = {{"error", "initial condition"}, {"message", e.what()}};
    write_json(dir / "violations.json", rep);
    std::cout << "violation: " << e.what() << "\n";
    return 1;
  }
  return sim.violations.empty() && sim.traj.clamp_events.empty() ? 0 : 1;
}

int cmd_monitor(const Options& o) {
  const CsvTable tab = load_csv(o.trajectory);
  if (o.encodings.empty()) throw Error("monitor needs --encodings");
  const EncodingMap enc = encodings_from_json(read_json(o.encodings));
  const auto ids = tab.ids();
  for (const auto& [id, e] : enc)
    if (std::find(ids.begin(), ids.end(), id) == ids.end())
      throw Error("trajectory has no column '" + std::to_string(id) + ".rho'");
  const auto entries = monitor_all(enc, [&](int id) { return tab.rho_trace(id); });
  const std::size_t failed = print_monitor(entries);
  if (!o.out.empty() || std::getenv("STLFUNNEL_OUT")) {
    const fs::path dir = output_dir(o, nullptr);
    fs::create_directories(dir);
    write_json(dir / "monitor.json", monitor_json(entries));
  }
  return failed == 0 ? 0 : 1;
}

int cmd_verify(const Options& o) {
  const ProjectConfig cfg = resolve_config(read_json(o.config), o);
  const CsvTable tab = load_csv(o.trajectory);
  const Network net = build_network(cfg);
  const Vector x0 = initial_state_from_csv(tab, net);
  const fs::path dir = output_dir(o, &cfg);
  const EncodingMap enc = load_or_design(cfg, net, initial_state(cfg, net), o, dir);
  const auto ids = tab.ids();
  if (ids.size() != net.size()) throw TopologyError("trajectory and config describe different networks");
  const VerifyResult v = verify(net, enc, x0, [&](int id) { return tab.rho_trace(id); },
                                tab.times().back());
  const std::size_t bad = print_verify(v);
  fs::create_directories(dir);
  write_json(dir / "contracts.json", verify_json(v));
  return bad == 0 && v.composition.passed() ? 0 : 1;
}

int cmd_plot(const Options& o) {
  const CsvTable tab = load_csv(o.trajectory);
  std::optional<EncodingMap> enc;
  if (!o.encodings.empty()) enc = encodings_from_json(read_json(o.encodings));
  const fs::path dir = output_dir(o, nullptr);
  plot_csv(tab, enc ? &*enc : nullptr, dir, fs::absolute(o.trajectory).string(), o.max_plots);
  return 0;
}

int cmd_demo(const Options& o) {
  json doc = o.demo == "rooms" ? rooms_demo_config(o.n.value_or(3)) : robots_demo_config();
  Options opt = o;
  opt.n.reset();
  if (o.demo == "robots" && o.n) throw Error("--n applies to the rooms demo only");
  if (o.demo == "rooms" && o.n && !o.stride) doc["output"]["stride"] = *o.n > 10 ? 100 : 1;
  const ProjectConfig cfg = resolve_config(doc, opt);
  const fs::path dir = output_dir(o, &cfg);
  fs::create_directories(dir);
  if (o.emit_config) {
    write_json(dir / "config.json", doc);
    std::cout << "wrote " << (dir / "config.json").string() << "\n";
    return 0;
  }
  const Network net = build_network(cfg);
  const Vector x0 = initial_state(cfg, net);

  const EncodingMap enc = design(cfg, net, x0);
  write_json(dir / "config.json", doc);
  write_json(dir / "encodings.json", encodings_to_json(enc));
  write_json(dir / "manifest.json", manifest(cfg, net, enc));
  write_text(dir / "design.txt", design_report(enc));
  print_design(enc);

  const SimOutcome sim = run_and_write_sim(cfg, net, enc, x0, dir);

  // monitor and verify on the full simulation grid
  const auto entries = monitor_all(enc, [&](int id) { return sim.traj.rho_trace(sim.traj.index_of(id)); });
  write_json(dir / "monitor.json", monitor_json(entries));
  const std::size_t mon_failed = print_monitor(entries);
  const VerifyResult v = verify(net, enc, x0,
                                [&](int id) { return sim.traj.rho_trace(sim.traj.index_of(id)); },
                                cfg.sim.horizon);
  write_json(dir / "contracts.json", verify_json(v));
  const std::size_t not_strong = print_verify(v);

  if (cfg.output.plot) {
    std::ifstream f(dir / "trajectory.csv");
    plot_csv(read_csv(f), &enc, dir / "plots", "../trajectory.csv", o.max_plots);
  }

  RunSummary s;
  s.violations = sim.violations.size();
  s.clamps = sim.traj.clamp_events.size();
  s.monitor_failures = mon_failed;
  s.not_uniform_strong = not_strong;
  s.composition_failed = !v.composition.passed();
  std::cout << (s.ok() ? "demo passed" : "demo FAILED") << "; artifacts in " << dir.string() << "\n";
  return s.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Funnel-based STL controller synthesis for interconnected systems"};
  app.require_subcommand(1);
  Options o;

  auto add_sim_flags = [&](CLI::App* c) {
    c->add_option("--dt", o.dt, "integration grid step [s]")->check(CLI::PositiveNumber);
    c->add_option("--horizon", o.horizon, "simulated time [s]")->check(CLI::PositiveNumber);
    c->add_option("--n", o.n, "number of rooms (rooms model)")->check(CLI::Range(3, 1000000));
    c->add_flag("--parallel", o.parallel, "evaluate subsystems on worker threads");
    c->add_option("--stride", o.stride, "write every k-th sample to the CSV")->check(CLI::PositiveNumber);
  };

  auto* design = app.add_subcommand("design", "compute funnel encodings for every task");
  design->add_option("--config", o.config, "project config (JSON)")->required();
  design->add_option("--out", o.out, "output directory");
  design->add_option("--seed", o.seed, "seed of the rho_opt multistart");
  design->add_option("--n", o.n, "number of rooms (rooms model)")->check(CLI::Range(3, 1000000));

  auto* simulate = app.add_subcommand("simulate", "simulate the closed loop and write the trajectory");
  simulate->add_option("--config", o.config, "project config (JSON)")->required();
  simulate->add_option("--encodings", o.encodings, "encodings file from 'design'");
  simulate->add_option("--out", o.out, "output directory");
  simulate->add_option("--seed", o.seed, "seed of the rho_opt multistart");
  add_sim_flags(simulate);

  auto* monitor = app.add_subcommand("monitor", "robustness of every task on a trajectory");
  monitor->add_option("--trajectory", o.trajectory, "trajectory CSV")->required();
  monitor->add_option("--encodings", o.encodings, "encodings file")->required();
  monitor->add_option("--out", o.out, "output directory for monitor.json");

  auto* verify = app.add_subcommand("verify", "check the assume-guarantee contracts on a trajectory");
  verify->add_option("--trajectory", o.trajectory, "trajectory CSV")->required();
  verify->add_option("--config", o.config, "project config (JSON)")->required();
  verify->add_option("--encodings", o.encodings, "encodings file");
  verify->add_option("--out", o.out, "output directory");
  verify->add_option("--n", o.n, "number of rooms (rooms model)")->check(CLI::Range(3, 1000000));

  auto* plot = app.add_subcommand("plot", "SVG funnel and state plots plus a gnuplot script");
  plot->add_option("--trajectory", o.trajectory, "trajectory CSV")->required();
  plot->add_option("--encodings", o.encodings, "encodings file (adds goal regions)");
  plot->add_option("--out", o.out, "output directory");
  plot->add_option("--max-plots", o.max_plots, "at most this many funnel plots");

  auto* demo = app.add_subcommand("demo", "run a built-in case study end to end");
  demo->add_option("name", o.demo, "rooms or robots")->required()->check(CLI::IsMember({"rooms", "robots"}));
  demo->add_option("--out", o.out, "output directory");
  demo->add_option("--seed", o.seed, "seed of the rho_opt multistart");
  demo->add_option("--max-plots", o.max_plots, "at most this many funnel plots");
  demo->add_flag("--emit-config", o.emit_config, "only write the demo config");
  add_sim_flags(demo);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*design) return cmd_design(o);
    if (*simulate) return cmd_simulate(o);
    if (*monitor) return cmd_monitor(o);
    if (*verify) return cmd_verify(o);
    if (*plot) return cmd_plot(o);
    if (*demo) return cmd_demo(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
