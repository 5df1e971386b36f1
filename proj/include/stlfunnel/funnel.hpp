#pragma once

#include <stlfunnel/stl.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace stlfunnel {

/// Performance function gamma(t) = (gamma0 - gamma_inf) exp(-decay t) + gamma_inf.
struct Funnel {
  double gamma0 = 1.0;
  double gamma_inf = 1.0;
  double decay = 0.0;

  Funnel() = default;
  Funnel(double g0, double ginf, double l) : gamma0(g0), gamma_inf(ginf), decay(l) {
    if (!(ginf > 0.0)) throw Error("funnel: gamma_inf must be positive");
    if (!(g0 >= ginf)) throw Error("funnel: gamma0 must be at least gamma_inf");
    if (!(l >= 0.0) || !std::isfinite(l)) throw Error("funnel: decay must be finite and non-negative");
  }

  double gamma(double t) const { return (gamma0 - gamma_inf) * std::exp(-decay * t) + gamma_inf; }
  double gamma_dot(double t) const { return -decay * (gamma0 - gamma_inf) * std::exp(-decay * t); }
  double alpha(double t) const { return -gamma_dot(t) / gamma(t); }

  friend bool operator==(const Funnel&, const Funnel&) = default;
};

/// Resolves the admissible parameter intervals of the funnel design into
/// concrete values. Fractions are positions inside the respective interval.
struct SelectionPolicy {
  /// Position of t* inside its admissible interval (0 = earliest, 1 = latest).
  /// Ignored for always-tasks, where t* is fixed.
  double t_star_fraction = 1.0;
  /// rho_max = lo + fraction * (rho_opt - lo), lo = max(0, rho0).
  double rho_max_fraction = 0.8;
  /// rho_max = lo + margin when rho_opt is unbounded.
  double unbounded_margin = 1.0;
  /// r = fraction * rho_max.
  double r_fraction = 0.1;
  /// gamma0 = (1 + headroom) * (rho_max - rho0) when t* > 0.
  double gamma0_headroom = 0.2;
  /// gamma_inf = fraction * min(gamma0, rho_max - r).
  double gamma_inf_fraction = 0.9;
  /// Decay used when any non-negative rate is admissible.
  double free_decay = 0.0;

  void validate() const {
    auto in01 = [](double v, bool lo_open, bool hi_open) {
      return (lo_open ? v > 0.0 : v >= 0.0) && (hi_open ? v < 1.0 : v <= 1.0);
    };
    if (!in01(t_star_fraction, false, false)) throw Error("policy: t_star_fraction must lie in [0,1]");
    if (!in01(rho_max_fraction, true, true)) throw Error("policy: rho_max_fraction must lie in (0,1)");
    if (!(unbounded_margin > 0.0)) throw Error("policy: unbounded_margin must be positive");
    if (!in01(r_fraction, true, true)) throw Error("policy: r_fraction must lie in (0,1)");
    if (!(gamma0_headroom > 0.0)) throw Error("policy: gamma0_headroom must be positive");
    if (!in01(gamma_inf_fraction, true, false)) throw Error("policy: gamma_inf_fraction must lie in (0,1]");
    if (!(free_decay >= 0.0)) throw Error("policy: free_decay must be non-negative");
  }

  friend bool operator==(const SelectionPolicy&, const SelectionPolicy&) = default;
};

/// A temporal task encoded as the funnel
///   rho_max - gamma(t) < rho^psi(x(t)) < rho_max,
/// which implies rho^phi(x, 0) >= r.
struct TaskEncoding {
  TemporalFormula phi;
  Funnel funnel;
  double rho_max = 0.0;
  double r = 0.0;
  double t_star = 0.0;
  // design inputs, kept for inspection
  double rho0 = 0.0;
  double rho_opt = 0.0;
  bool decay_solved = false;

  const NonTemporalFormula& psi() const { return phi.psi; }

  friend bool operator==(const TaskEncoding&, const TaskEncoding&) = default;
};

struct Envelope {
  double lower = 0.0;
  double upper = 0.0;
};

inline Envelope envelope(const TaskEncoding& enc, double t) {
  return {enc.rho_max - enc.funnel.gamma(t), enc.rho_max};
}

inline bool contains(const TaskEncoding& enc, double t, double rho) {
  const Envelope e = envelope(enc, t);
  return e.lower < rho && rho < e.upper;
}

/// Admissible interval for t*.
inline std::pair<double, double> t_star_interval(const TemporalFormula& phi) {
  switch (phi.kind) {
    case TemporalFormula::Kind::Always:
      return {phi.outer.a, phi.outer.a};
    case TemporalFormula::Kind::Eventually:
      return {phi.outer.a, phi.outer.b};
    case TemporalFormula::Kind::EventuallyAlways:
      return {phi.outer.a + phi.inner.a, phi.outer.b + phi.inner.a};
  }
  return {0.0, 0.0};
}

/// Names of the admissible-interval constraints the encoding violates, given
/// the design inputs it was produced from. Empty means all constraints hold.
inline std::vector<std::string> design_violations(const TaskEncoding& enc) {
  std::vector<std::string> v;
  const auto [ts_lo, ts_hi] = t_star_interval(enc.phi);
  if (enc.t_star < ts_lo - kTimeTolerance || enc.t_star > ts_hi + kTimeTolerance) v.push_back("t_star");
  const double lo = std::max(0.0, enc.rho0);
  if (!(enc.rho_max > lo && (is_unbounded(enc.rho_opt) || enc.rho_max < enc.rho_opt)))
    v.push_back("rho_max");
  if (!(enc.r > 0.0 && enc.r < enc.rho_max)) v.push_back("r");
  const double g0 = enc.funnel.gamma0;
  if (enc.t_star > 0.0) {
    if (!(g0 > enc.rho_max - enc.rho0)) v.push_back("gamma0");
  } else {
    if (!(g0 > enc.rho_max - enc.rho0 && g0 <= enc.rho_max - enc.r)) v.push_back("gamma0");
  }
  const double ginf = enc.funnel.gamma_inf;
  if (!(ginf > 0.0 && ginf <= std::min(g0, enc.rho_max - enc.r))) v.push_back("gamma_inf");
  if (-g0 + enc.rho_max >= enc.r) {
    if (!(enc.funnel.decay >= 0.0)) v.push_back("decay");
  } else {
    const double l = -std::log((enc.rho_max - enc.r - ginf) / (g0 - ginf)) / enc.t_star;
    if (!(std::abs(enc.funnel.decay - l) <= 1e-12 * std::max(1.0, l))) v.push_back("decay");
  }
  return v;
}

/// Selects t*, rho_max, r, gamma0, gamma_inf and the decay rate so that
/// staying inside the funnel enforces rho^phi(x, 0) >= r.
///
/// The decay rate is the solution of gamma(t*) = rho_max - r whenever the
/// initial funnel width alone does not already guarantee the lower bound.
inline TaskEncoding design_parameters(const TemporalFormula& phi, double rho0, double rho_opt,
                                      const SelectionPolicy& policy = {}) {
  policy.validate();
  if (!(rho_opt > 0.0))
    throw InfeasibleTaskError("task is infeasible: the maximum robustness " +
                              std::to_string(rho_opt) + " is not positive");
  if (!std::isfinite(rho0)) throw InfeasibleTaskError("initial robustness is not finite");
  if (!(rho0 < rho_opt))
    throw InfeasibleTaskError("initial robustness " + std::to_string(rho0) +
                              " is not below the maximum robustness " + std::to_string(rho_opt));

  TaskEncoding enc;
  enc.phi = phi;
  enc.rho0 = rho0;
  enc.rho_opt = rho_opt;

  const auto [ts_lo, ts_hi] = t_star_interval(phi);
  enc.t_star = phi.kind == TemporalFormula::Kind::Always
                   ? ts_lo
                   : ts_lo + policy.t_star_fraction * (ts_hi - ts_lo);

  const double lo = std::max(0.0, rho0);
  enc.rho_max = is_unbounded(rho_opt) ? lo + policy.unbounded_margin
                                      : lo + policy.rho_max_fraction * (rho_opt - lo);
  enc.r = policy.r_fraction * enc.rho_max;

  double gamma0 = 0.0;
  if (enc.t_star > 0.0) {
    gamma0 = (1.0 + policy.gamma0_headroom) * (enc.rho_max - rho0);
  } else {
    const double g_lo = enc.rho_max - rho0;
    const double g_hi = enc.rho_max - enc.r;
    if (!(g_lo < g_hi))
      throw InfeasibleTaskError(
          "t* = 0 requires the initial robustness to exceed r; the admissible gamma0 interval is "
          "empty");
    gamma0 = 0.5 * (g_lo + g_hi);
  }
  const double gamma_inf = policy.gamma_inf_fraction * std::min(gamma0, enc.rho_max - enc.r);

  double decay = policy.free_decay;
  if (-gamma0 + enc.rho_max < enc.r) {
    const double num = enc.rho_max - enc.r - gamma_inf;
    if (!(num > 0.0))
      throw InfeasibleTaskError(
          "gamma_inf equals rho_max - r; no finite decay reaches the required bound at t*");
    decay = -std::log(num / (gamma0 - gamma_inf)) / enc.t_star;
    enc.decay_solved = true;
  }
  enc.funnel = Funnel(gamma0, gamma_inf, decay);

  const double lower_at_t_star = enc.rho_max - enc.funnel.gamma(enc.t_star);
  if (lower_at_t_star < enc.r - 1e-9)
    throw NumericalError("funnel design: lower bound at t* falls below r");
  const auto bad = design_violations(enc);
  if (!bad.empty()) throw NumericalError("funnel design violates constraint on " + bad.front());
  return enc;
}

}  // namespace stlfunnel
