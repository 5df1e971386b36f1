#pragma once

// Assume-guarantee contracts over funnel envelopes and their sampled
// satisfaction checks.
//
// Contract i assumes that every neighbour j keeps rho^psi_j inside its own
// funnel and guarantees that rho^psi_i stays inside funnel i. All checks work
// on the sampling grid of the supplied traces.

#include <stlfunnel/funnel.hpp>
#include <stlfunnel/monitor.hpp>
#include <stlfunnel/network.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace stlfunnel {

/// Funnel envelope of one subsystem, optionally inflated by eps in value space:
/// (rho_max - gamma(t) - eps, rho_max + eps).
struct GuaranteeEnvelope {
  int subsystem = 0;
  std::shared_ptr<const TaskEncoding> encoding;
  double eps = 0.0;

  double lower(double t) const { return envelope(*encoding, t).lower - eps; }
  double upper(double /*t*/) const { return encoding->rho_max + eps; }
  bool contains(double t, double rho) const { return lower(t) < rho && rho < upper(t); }
  /// Signed distance to the nearer boundary; positive inside.
  double margin(double t, double rho) const { return std::min(rho - lower(t), upper(t) - rho); }
};

struct Contract {
  int subsystem = 0;
  std::vector<GuaranteeEnvelope> assumptions;  // in the stacking order of w_i
  GuaranteeEnvelope guarantee;
};

enum class Verdict { WeakSatisfied, UniformStrong, Violated };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::WeakSatisfied: return "weak";
    case Verdict::UniformStrong: return "uniform-strong";
    case Verdict::Violated: return "violated";
  }
  return "?";
}

enum class Party { None, Assumption, Guarantee };

inline const char* to_string(Party p) {
  switch (p) {
    case Party::None: return "none";
    case Party::Assumption: return "assumption";
    case Party::Guarantee: return "guarantee";
  }
  return "?";
}

struct SatisfactionReport {
  int subsystem = 0;
  Verdict verdict = Verdict::Violated;
  double delta = 0.0;
  std::optional<double> violation_time;
  Party which = Party::None;
  std::optional<double> assumption_failure;  // first sample where some assumption fails
  std::optional<double> guarantee_failure;   // first sample where the guarantee fails
  std::vector<double> margins;               // guarantee margin per sample
};

namespace detail {

inline void check_same_grid(const RobustnessTrace& own, const std::vector<RobustnessTrace>& nbs,
                            const Contract& c) {
  check_trace(own);
  if (nbs.size() != c.assumptions.size())
    throw TopologyError("contract " + std::to_string(c.subsystem) + ": expected " +
                        std::to_string(c.assumptions.size()) + " neighbour traces, got " +
                        std::to_string(nbs.size()));
  for (const auto& tr : nbs)
    if (tr.times != own.times) throw Error("contract check: traces do not share one time grid");
  if (!c.guarantee.encoding) throw Error("contract check: guarantee has no encoding");
  for (const auto& a : c.assumptions)
    if (!a.encoding) throw Error("contract check: assumption has no encoding");
}

struct FailureIndices {
  std::size_t assumption;  // samples() when assumptions hold throughout
  std::size_t guarantee;
  std::vector<double> margins;
};

inline FailureIndices failure_indices(const RobustnessTrace& own,
                                      const std::vector<RobustnessTrace>& nbs, const Contract& c) {
  const std::size_t k_end = own.times.size();
  FailureIndices f{k_end, k_end, std::vector<double>(k_end)};
  for (std::size_t k = 0; k < k_end; ++k) {
    const double t = own.times[k];
    f.margins[k] = c.guarantee.margin(t, own.values[k]);
    if (f.guarantee == k_end && !c.guarantee.contains(t, own.values[k])) f.guarantee = k;
    if (f.assumption == k_end)
      for (std::size_t j = 0; j < nbs.size(); ++j)
        if (!c.assumptions[j].contains(t, nbs[j].values[k])) {
          f.assumption = k;
          break;
        }
  }
  return f;
}

inline SatisfactionReport base_report(const RobustnessTrace& own, const Contract& c,
                                      FailureIndices&& f) {
  SatisfactionReport r;
  r.subsystem = c.subsystem;
  if (f.assumption < own.times.size()) r.assumption_failure = own.times[f.assumption];
  if (f.guarantee < own.times.size()) r.guarantee_failure = own.times[f.guarantee];
  r.margins = std::move(f.margins);
  return r;
}

}  // namespace detail

/// Weak satisfaction: on every prefix on which all assumptions hold, the
/// guarantee holds as well.
inline SatisfactionReport check_weak(const RobustnessTrace& own,
                                     const std::vector<RobustnessTrace>& neighbor_traces,
                                     const Contract& c) {
  detail::check_same_grid(own, neighbor_traces, c);
  auto f = detail::failure_indices(own, neighbor_traces, c);
  const std::size_t ka = f.assumption, kg = f.guarantee;
  SatisfactionReport r = detail::base_report(own, c, std::move(f));
  if (kg < ka) {
    r.verdict = Verdict::Violated;
    r.violation_time = own.times[kg];
    r.which = Party::Guarantee;
  } else {
    r.verdict = Verdict::WeakSatisfied;
  }
  return r;
}

/// Uniform strong satisfaction at grid resolution. For every sample t_k with
/// assumptions holding on [0, t_k] and t_k before the last sample, the
/// guarantee must hold on [0, t_k + delta]. delta is the largest such
/// extension on the grid; the verdict is uniform-strong iff delta is at least
/// one grid step. Without any assumption-valid prefix the condition is vacuous
/// and delta is the whole horizon.
inline SatisfactionReport check_uniform_strong(const RobustnessTrace& own,
                                               const std::vector<RobustnessTrace>& neighbor_traces,
                                               const Contract& c) {
  detail::check_same_grid(own, neighbor_traces, c);
  const std::size_t k_end = own.times.size();
  if (k_end < 2) throw Error("uniform strong check needs at least two samples");
  auto f = detail::failure_indices(own, neighbor_traces, c);
  const std::size_t ka = f.assumption, kg = f.guarantee;
  SatisfactionReport r = detail::base_report(own, c, std::move(f));
  const double step = own.times[1] - own.times[0];

  const std::size_t quantified = std::min(ka, k_end - 1);  // prefixes 0 .. quantified-1
  if (quantified == 0) {
    r.delta = own.times.back() - own.times.front();
    r.verdict = Verdict::UniformStrong;
    return r;
  }
  const std::size_t last = quantified - 1;
  if (kg <= last) {
    r.verdict = Verdict::Violated;
    r.delta = 0.0;
    r.violation_time = own.times[kg];
    r.which = Party::Guarantee;
    return r;
  }
  r.delta = own.times[std::min(kg, k_end) - 1] - own.times[last];
  if (r.delta >= step - kTimeTolerance) {
    r.verdict = Verdict::UniformStrong;
  } else {
    // the guarantee fails at the sample where the assumptions fail
    r.verdict = kg < ka ? Verdict::Violated : Verdict::WeakSatisfied;
    if (kg < k_end) {
      r.violation_time = own.times[kg];
      r.which = Party::Guarantee;
    }
  }
  return r;
}

/// Value-space inflation of an envelope by eps >= 0.
inline GuaranteeEnvelope epsilon_expand(GuaranteeEnvelope env, double eps) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw Error("epsilon_expand: eps must be finite and non-negative");
  env.eps += eps;
  return env;
}

inline Contract epsilon_expand_assumptions(Contract c, double eps) {
  for (auto& a : c.assumptions) a = epsilon_expand(a, eps);
  return c;
}

using EncodingMap = std::map<int, std::shared_ptr<const TaskEncoding>>;
using ContractMap = std::map<int, Contract>;

/// A_i is the product of the neighbours' guarantee envelopes, G_i the own one.
/// Assumptions reference the very encodings of the neighbour guarantees.
inline ContractMap assemble_contracts(const Network& net, const EncodingMap& encodings) {
  ContractMap out;
  auto lookup = [&](int id) {
    auto it = encodings.find(id);
    if (it == encodings.end() || !it->second)
      throw Error("no task encoding for subsystem " + std::to_string(id));
    return it->second;
  };
  for (const auto& s : net.subsystems()) {
    Contract c;
    c.subsystem = s.id;
    c.guarantee = {s.id, lookup(s.id), 0.0};
    for (int j : s.neighbors) {
      if (!net.contains(j)) throw TopologyError("dangling neighbour id " + std::to_string(j));
      c.assumptions.push_back({j, lookup(j), 0.0});
    }
    out.emplace(s.id, std::move(c));
  }
  return out;
}

struct CompositionReport {
  bool initial_inside = true;      // x_i(0) strictly inside G_i(0)
  bool uniform_strong = true;      // every local report is uniform-strong
  bool assumptions_covered = true; // neighbour guarantees contained in assumptions
  std::vector<std::string> failures;

  bool passed() const { return initial_inside && uniform_strong && assumptions_covered; }
};

struct CompositionOptions {
  /// Time grid for the pointwise dominance fallback of the inclusion check.
  double horizon = 1000.0;
  std::size_t points = 10001;
};

namespace detail {

/// Envelope `outer` contains envelope `inner` at every grid time.
inline bool dominates(const GuaranteeEnvelope& outer, const GuaranteeEnvelope& inner,
                      const CompositionOptions& opt) {
  if (outer.encoding == inner.encoding) return outer.eps >= inner.eps;
  const std::size_t n = std::max<std::size_t>(opt.points, 2);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = opt.horizon * static_cast<double>(k) / static_cast<double>(n - 1);
    if (outer.lower(t) > inner.lower(t) || outer.upper(t) < inner.upper(t)) return false;
  }
  return true;
}

}  // namespace detail

/// Checks the hypotheses of the composition theorem: strict initial
/// containment, uniform strong local satisfaction, and inclusion of the
/// neighbours' guarantees in each assumption.
inline CompositionReport check_composition(const ContractMap& contracts, const Network& net,
                                           const std::map<int, Vector>& initial_states,
                                           const std::map<int, SatisfactionReport>& reports,
                                           const CompositionOptions& opt = {}) {
  if (contracts.size() != net.size())
    throw TopologyError("composition: contract count differs from network size");
  CompositionReport out;
  for (const auto& s : net.subsystems()) {
    auto it = contracts.find(s.id);
    if (it == contracts.end())
      throw TopologyError("composition: no contract for subsystem " + std::to_string(s.id));
    const Contract& c = it->second;
    if (c.assumptions.size() != s.neighbors.size())
      throw TopologyError("composition: contract " + std::to_string(s.id) +
                          " does not match the neighbour list");
    const std::string tag = "subsystem " + std::to_string(s.id) + ": ";

    auto x0 = initial_states.find(s.id);
    if (x0 == initial_states.end()) {
      out.initial_inside = false;
      out.failures.push_back(tag + "no initial state");
    } else {
      const double rho0 = eval_rho(c.guarantee.encoding->psi(), x0->second);
      if (!c.guarantee.contains(0.0, rho0)) {
        out.initial_inside = false;
        out.failures.push_back(tag + "initial robustness outside the funnel");
      }
    }

    auto rep = reports.find(s.id);
    if (rep == reports.end() || rep->second.verdict != Verdict::UniformStrong) {
      out.uniform_strong = false;
      out.failures.push_back(tag + "not uniformly strongly satisfied");
    }

    for (std::size_t k = 0; k < s.neighbors.size(); ++k) {
      const int j = s.neighbors[k];
      const GuaranteeEnvelope& a = c.assumptions[k];
      if (a.subsystem != j)
        throw TopologyError("composition: contract " + std::to_string(s.id) +
                            " assumption order does not match the neighbour list");
      auto cj = contracts.find(j);
      if (cj == contracts.end()) throw TopologyError("composition: dangling neighbour " + std::to_string(j));
      if (!detail::dominates(a, cj->second.guarantee, opt)) {
        out.assumptions_covered = false;
        out.failures.push_back(tag + "assumption on " + std::to_string(j) +
                               " does not contain that neighbour's guarantee");
      }
    }
  }
  return out;
}

}  // namespace stlfunnel
