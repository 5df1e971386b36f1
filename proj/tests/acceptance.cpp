// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>

using namespace stlfunnel;
using namespace stlfunnel::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct DemoRun {
  std::string name;
  ProjectConfig cfg;
  Network net;
  Vector x0;
  EncodingMap enc;
  Trajectory traj;
  double seconds = 0.0;
};

DemoRun run_demo(const std::string& name, const json& doc) {
  DemoRun d;
  d.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  d.cfg = config_from_json(doc);
  d.net = build_network(d.cfg);
  d.x0 = initial_state(d.cfg, d.net);
  d.enc = design(d.cfg, d.net, d.x0);
  d.traj = simulate(d.net, make_laws(d.net, d.enc, d.cfg.clamp_margin), d.cfg.sim, d.x0);
  d.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return d;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

/// Containment on every sample, no clamps, every monitor >= r > 0.
Outcome closed_loop_checks(const DemoRun& d, std::size_t expected_samples) {
  std::ostringstream why;
  bool ok = true;
  if (d.traj.samples() != expected_samples) {
    ok = false;
    why << d.traj.samples() << " samples, expected " << expected_samples << "; ";
  }
  std::size_t outside = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < d.traj.ids.size(); ++k) {
    const TaskEncoding& e = *d.traj.encodings[k];
    for (std::size_t s = 0; s < d.traj.samples(); ++s) {
      const double t = d.traj.times[s], rho = d.traj.rho[k][s];
      const double lo = e.rho_max - e.funnel.gamma(t), hi = e.rho_max;
      worst = std::min(worst, std::min(rho - lo, hi - rho));
      if (!(lo < rho && rho < hi)) ++outside;
    }
  }
  if (outside) {
    ok = false;
    why << outside << " samples outside their funnel; ";
  }
  if (!d.traj.clamp_events.empty()) {
    ok = false;
    why << d.traj.clamp_events.size() << " clamp events; ";
  }
  std::size_t failed = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  const auto entries = monitor_all(d.enc, [&](int id) { return d.traj.rho_trace(d.traj.index_of(id)); });
  for (const auto& m : entries) {
    if (!(m.pass && m.r > 0.0)) ++failed;
    min_slack = std::min(min_slack, m.value - m.r);
  }
  if (failed) {
    ok = false;
    why << failed << " monitors below r; ";
  }
  why << d.net.size() << " subsystems, " << d.traj.samples() << " samples, min funnel margin " << fmt(worst)
      << ", min monitor - r " << fmt(min_slack) << ", " << fmt(d.seconds) << " s";
  return {ok, why.str()};
}

Outcome ac1(const DemoRun& d) {
  Outcome o = closed_loop_checks(d, 10001);
  if (d.seconds > 300.0) {
    o.pass = false;
    o.detail += " (over 300 s)";
  }
  return o;
}

Outcome ac2(const DemoRun& d) {
  Outcome o = closed_loop_checks(d, 10001);
  if (d.seconds > 5.0) {
    o.pass = false;
    o.detail += " (over 5 s)";
  }
  return o;
}

Outcome ac3(const DemoRun& d) {
  Outcome o = closed_loop_checks(d, 35001);
  o.detail += "; plots from 'stlfunnel demo robots' are checked by eye";
  return o;
}

// Random feasible design inputs, checked against the admissible intervals.
Outcome ac4() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto psi = room_band();
  std::size_t checked = 0, solved = 0, bad = 0;
  double worst_boundary = 0.0;
  std::string first;
  while (checked < 500) {
    const double a = std::floor(20 * u(rng)), len = 1 + std::floor(50 * u(rng));
    TemporalFormula phi;
    switch (checked % 3) {
      case 0: phi = TemporalFormula::always({a, a + len}, psi); break;
      case 1: phi = TemporalFormula::eventually({a, a + len}, psi); break;
      default: phi = TemporalFormula::eventually_always({a, a + len}, {std::floor(10 * u(rng)), 10 + len}, psi);
    }
    const bool unbounded = u(rng) < 0.1;
    const double ropt = unbounded ? kUnbounded : 0.05 + 10 * u(rng);
    const double rho0 = unbounded ? -20 + 40 * u(rng) : -20 + (ropt + 20) * u(rng);
    SelectionPolicy pol;
    pol.t_star_fraction = u(rng) < 0.2 ? 0.0 : u(rng);
    pol.rho_max_fraction = 0.05 + 0.9 * u(rng);
    pol.r_fraction = 0.05 + 0.9 * u(rng);
    pol.gamma0_headroom = 0.01 + u(rng);
    pol.gamma_inf_fraction = 0.05 + 0.9 * u(rng);
    pol.free_decay = u(rng);

    // independent t* and feasibility of the t* = 0 branch
    double ts_lo = a, ts_hi = a + len;
    if (phi.kind == TemporalFormula::Kind::Always) ts_hi = a;
    if (phi.kind == TemporalFormula::Kind::EventuallyAlways) {
      ts_lo += phi.inner.a;
      ts_hi += phi.inner.a;
    }
    const double ts = phi.kind == TemporalFormula::Kind::Always ? a : ts_lo + pol.t_star_fraction * (ts_hi - ts_lo);
    const double lo = std::max(0.0, rho0);
    const double rmax = unbounded ? lo + pol.unbounded_margin : lo + pol.rho_max_fraction * (ropt - lo);
    if (ts == 0.0 && !(rmax - rho0 < rmax - pol.r_fraction * rmax)) continue;  // infeasible draw
    ++checked;

    std::vector<std::string> v;
    try {
      const TaskEncoding e = design_parameters(phi, rho0, ropt, pol);
      const double g0 = e.funnel.gamma0, gi = e.funnel.gamma_inf, l = e.funnel.decay;
      if (std::abs(e.t_star - ts) > 1e-9 || e.t_star < ts_lo - 1e-9 || e.t_star > ts_hi + 1e-9) v.push_back("t*");
      if (!(e.rho_max > lo && (unbounded || e.rho_max < ropt))) v.push_back("rho_max");
      if (!(e.r > 0 && e.r < e.rho_max)) v.push_back("r");
      if (!(g0 > e.rho_max - rho0)) v.push_back("gamma0 lower");
      if (e.t_star == 0.0 && !(g0 <= e.rho_max - e.r)) v.push_back("gamma0 upper");
      if (!(gi > 0 && gi <= std::min(g0, e.rho_max - e.r))) v.push_back("gamma_inf");
      if (!(l >= 0 && std::isfinite(l))) v.push_back("decay");
      if (e.rho_max - e.funnel.gamma(e.t_star) < e.r - 1e-9) v.push_back("bound at t*");
      const bool needs_solve = e.rho_max - g0 < e.r;
      if (needs_solve != e.decay_solved) v.push_back("decay branch");
      if (e.decay_solved) {
        ++solved;
        const double dev = std::abs(e.funnel.gamma(e.t_star) - (e.rho_max - e.r));
        worst_boundary = std::max(worst_boundary, dev);
        if (dev > 1e-9) v.push_back("gamma(t*) = rho_max - r");
      }
    } catch (const std::exception& ex) {
      v.push_back(ex.what());
    }
    if (!v.empty()) {
      ++bad;
      if (first.empty()) first = "first failure: " + v.front() + "; ";
    }
  }
  return {bad == 0, first + std::to_string(checked) + " designs, " + std::to_string(solved) +
                        " with solved decay, max |gamma(t*) - (rho_max - r)| " + fmt(worst_boundary)};
}

Outcome ac5() {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int f = 0; f < 20; ++f) {
    const int dim = 1 + f % 4;
    const auto psi = random_psi(rng, dim, 6);
    for (int p = 0; p < 100; ++p) {
      const Vector x = random_vector(rng, dim, -3, 3);
      const Vector g = grad_rho(psi, x);
      Vector fd(dim);
      const double h = 1e-6;
      for (int i = 0; i < dim; ++i) {
        Vector xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        fd[i] = (eval_rho(psi, xp) - eval_rho(psi, xm)) / (2 * h);
      }
      worst = std::max(worst, (g - fd).lpNorm<Eigen::Infinity>() / std::max(1.0, fd.lpNorm<Eigen::Infinity>()));
    }
  }
  return {worst <= 1e-6, "2000 points, max relative error " + fmt(worst)};
}

Outcome ac6() {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> m(1, 8);
  std::uniform_real_distribution<double> u(-50, 50);
  std::size_t bad = 0;
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> v(static_cast<std::size_t>(m(rng)));
    for (double& x : v) x = u(rng);
    const double mn = *std::min_element(v.begin(), v.end());
    const double s = smooth_min(v);
    const double tol = 1e-12 * std::max(1.0, std::abs(mn));
    if (!(s >= mn - std::log(static_cast<double>(v.size())) - tol && s <= mn + tol)) ++bad;
  }
  return {bad == 0, "1000 vectors, " + std::to_string(bad) + " outside the bounds"};
}

Outcome ac7() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> e(-1.0, 0.0), y(-8.0, 8.0);
  std::size_t bad_mono = 0, bad_jac = 0;
  double worst_inv = 0.0;
  for (int k = 0; k < 1000; ++k) {
    double a = e(rng), b = e(rng);
    if (a == b || a <= -1.0 || b <= -1.0 || a >= 0.0 || b >= 0.0) continue;
    if (a > b) std::swap(a, b);
    if (!(transform(a) < transform(b))) ++bad_mono;
    const double t = y(rng);
    worst_inv = std::max(worst_inv, std::abs(transform(transform_inverse(t)) - t));
  }
  TaskEncoding enc;
  enc.rho_max = 1.0;
  enc.funnel = Funnel(2.0, 0.5, 0.1);
  const double margin = 1e-9;
  for (int k = 0; k <= 1000; ++k) {
    const double eh = -1.0 + margin + (1.0 - 2 * margin) * k / 1000.0;
    for (double t : {0.0, 1.0, 100.0}) {
      const double rho = enc.rho_max + eh * enc.funnel.gamma(t);
      const auto s = error_state_from_rho(enc, rho, t, margin);
      if (!(s.jacobian > 0.0 && std::isfinite(s.jacobian))) ++bad_jac;
      if (t == 0.0) worst_inv = std::max(worst_inv, std::abs(transform_inverse(transform(eh)) - eh));
    }
  }
  return {bad_mono == 0 && worst_inv <= 1e-12 && bad_jac == 0,
          std::to_string(bad_mono) + " order inversions, max round-trip error " + fmt(worst_inv) + ", " +
              std::to_string(bad_jac) + " non-positive J"};
}

Outcome ac8(const std::vector<const DemoRun*>& demos) {
  std::ostringstream why;
  bool ok = true;

  // randomized implication
  auto enc = std::make_shared<TaskEncoding>();
  enc->phi = TemporalFormula::always({0, 1}, NonTemporalFormula::atom("x", scalar_affine(1, 0)));
  enc->rho_max = 1.0;
  enc->r = 0.1;
  enc->funnel = Funnel(1, 1, 0);
  const Contract c{1, {{2, enc, 0.0}, {3, enc, 0.0}}, {1, enc, 0.0}};
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> len(2, 40), cut(0, 45);
  std::uniform_real_distribution<double> inside(0.01, 0.99), outside(1.01, 3.0);
  int strong = 0, broken = 0;
  for (int k = 0; k < 200; ++k) {
    const int n = len(rng), ka = cut(rng), kb = cut(rng), kg = cut(rng);
    std::vector<double> g(n), a(n), b(n);
    for (int s = 0; s < n; ++s) {
      g[s] = s < kg ? inside(rng) : outside(rng);
      a[s] = s < ka ? inside(rng) : outside(rng);
      b[s] = s < kb ? inside(rng) : outside(rng);
    }
    const auto tg = uniform_trace(g, 0.1), ta = uniform_trace(a, 0.1), tb = uniform_trace(b, 0.1);
    if (check_uniform_strong(tg, {ta, tb}, c).verdict == Verdict::UniformStrong) {
      ++strong;
      if (check_weak(tg, {ta, tb}, c).verdict == Verdict::Violated) ++broken;
    }
  }
  if (broken) ok = false;
  why << strong << "/200 uniform-strong, " << broken << " not weak; ";

  // vacuity: assumptions false from t = 0, guarantee anything
  const auto vac = uniform_trace({5.0, 5.0, 5.0}, 0.1);
  const auto bad_nb = uniform_trace({-1.0, -1.0, -1.0}, 0.1);
  const bool vacuous = check_weak(vac, {bad_nb, bad_nb}, c).verdict == Verdict::WeakSatisfied &&
                       check_uniform_strong(vac, {bad_nb, bad_nb}, c).verdict == Verdict::UniformStrong;
  if (!vacuous) ok = false;
  why << "vacuity " << (vacuous ? "ok" : "FAIL");

  for (const DemoRun* d : demos) {
    auto trace_of = [&](int id) { return d->traj.rho_trace(d->traj.index_of(id)); };
    const VerifyResult v = verify(d->net, d->enc, d->x0, trace_of, d->cfg.sim.horizon);
    double dmin = std::numeric_limits<double>::infinity();
    std::size_t not_strong = 0;
    for (const auto& [id, r] : v.strong) {
      dmin = std::min(dmin, r.delta);
      if (r.verdict != Verdict::UniformStrong || r.delta < d->cfg.sim.dt - 1e-9) ++not_strong;
    }
    if (not_strong || !v.composition.passed()) ok = false;
    why << "; " << d->name << ": " << v.strong.size() - not_strong << "/" << v.strong.size()
        << " uniform-strong, min delta " << fmt(dmin) << ", composition (i) "
        << (v.composition.initial_inside ? "ok" : "FAIL") << " (ii) " << (v.composition.uniform_strong ? "ok" : "FAIL")
        << " (iii) " << (v.composition.assumptions_covered ? "ok" : "FAIL");
  }
  return {ok, why.str()};
}

Outcome ac9() {
  // x' = -x through a subsystem whose input matrix vanishes
  Subsystem s;
  s.id = 1;
  s.n = s.m = 1;
  s.f = [](const Vector& x) -> Vector { return -x; };
  s.g = [](const Vector&) -> Matrix { return Matrix::Zero(1, 1); };
  s.h = [](const Vector&) -> Vector { return Vector::Zero(1); };
  s.x0 = Vector::Constant(1, 1.0);
  const Network decay({s});
  const auto psi = NonTemporalFormula::atom("b", Predicate::ball(Vector::Zero(1), 10.0, {0}));
  const std::vector<ControlLaw> laws = {
      ControlLaw(1, std::make_shared<const TaskEncoding>(design_parameters(TemporalFormula::always({0, 1}, psi), 99.0, 100.0)), {})};
  auto err = [&](double dt) {
    SimConfig cfg;
    cfg.dt = dt;
    cfg.horizon = 1.0;
    return std::abs(simulate(decay, laws, cfg, decay.initial_state()).states[0].back() - std::exp(-1.0));
  };
  const double ratio = err(0.1) / err(0.05);

  json doc = rooms_demo_config(5);
  doc["sim"]["horizon"] = 100.0;
  const ProjectConfig cfg = config_from_json(doc);
  const Network net = build_network(cfg);
  const Vector x0 = initial_state(cfg, net);
  const auto room_laws = make_laws(net, design(cfg, net, x0));
  auto csv = [&](bool parallel) {
    SimConfig c = cfg.sim;
    c.parallel = parallel;
    c.threads = parallel ? 4 : 0;
    std::ostringstream os;
    write_trajectory_csv(os, simulate(net, room_laws, c, x0));
    return os.str();
  };
  const std::string a = csv(false), b = csv(false), p = csv(true);
  const bool same = a == b && a == p;
  return {ratio >= 12.0 && ratio <= 20.0 && same,
          "error ratio " + fmt(ratio) + ", CSV " + (same ? "identical" : "DIFFERS") + " (" +
              std::to_string(a.size()) + " bytes)"};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const char* id, const char* what, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << id << " " << what << ": " << o.detail << std::endl;
  };

  std::optional<DemoRun> rooms1000, rooms3, robots;
  report("AC1", "rooms N=1000", [&] {
    rooms1000 = run_demo("rooms N=1000", rooms_demo_config(1000));
    return ac1(*rooms1000);
  });
  report("AC2", "rooms N=3", [&] {
    rooms3 = run_demo("rooms N=3", rooms_demo_config(3));
    return ac2(*rooms3);
  });
  report("AC3", "robots N=5", [&] {
    robots = run_demo("robots", robots_demo_config());
    return ac3(*robots);
  });
  report("AC4", "funnel design intervals", ac4);
  report("AC5", "gradient vs finite differences", ac5);
  report("AC6", "smooth-min sandwich", ac6);
  report("AC7", "error transform", ac7);
  report("AC8", "contract checkers", [&] {
    std::vector<const DemoRun*> demos;
    for (const auto* d : {&rooms3, &robots, &rooms1000})
      if (d->has_value()) demos.push_back(&**d);
    if (demos.size() != 3) return Outcome{false, "a closed-loop demo did not run"};
    return ac8(demos);
  });
  report("AC9", "integrator and determinism", ac9);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
