#pragma once

// Sampled robust semantics of temporal formulas. The continuous min/max over
// a time window is taken over the trace samples that fall inside it.

#include <stlfunnel/stl.hpp>

#include <algorithm>
#include <deque>
#include <limits>
#include <vector>

namespace stlfunnel {

struct RobustnessTrace {
  std::vector<double> times;
  std::vector<double> values;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
};

/// Result of a monitor evaluation. `complete` is false when the trace ends
/// before the formula's full window; the value is then the maximum over the
/// witnesses the trace does contain, a lower bound on the true robustness.
struct MonitorResult {
  double value = 0.0;
  bool complete = true;
};

namespace detail {

inline void check_trace(const RobustnessTrace& trace) {
  if (trace.times.size() != trace.values.size())
    throw Error("robustness trace: times and values differ in length");
  if (trace.empty()) throw CoverageError("robustness trace is empty");
  for (std::size_t k = 1; k < trace.times.size(); ++k)
    if (!(trace.times[k] > trace.times[k - 1]))
      throw Error("robustness trace: time grid must be strictly increasing");
}

inline bool covers(const RobustnessTrace& trace, double lo, double hi) {
  return trace.times.front() <= lo + kTimeTolerance && trace.times.back() >= hi - kTimeTolerance;
}

// Index range [first, last) of samples with lo <= t <= hi (with tolerance).
inline std::pair<std::size_t, std::size_t> window(const RobustnessTrace& trace, double lo,
                                                  double hi) {
  const auto b = std::lower_bound(trace.times.begin(), trace.times.end(), lo - kTimeTolerance);
  const auto e = std::upper_bound(trace.times.begin(), trace.times.end(), hi + kTimeTolerance);
  return {static_cast<std::size_t>(b - trace.times.begin()),
          static_cast<std::size_t>(e - trace.times.begin())};
}

inline double window_min(const RobustnessTrace& trace, double lo, double hi) {
  const auto [b, e] = window(trace, lo, hi);
  if (b >= e) throw CoverageError("no samples inside the monitored window");
  return *std::min_element(trace.values.begin() + static_cast<std::ptrdiff_t>(b),
                           trace.values.begin() + static_cast<std::ptrdiff_t>(e));
}

inline double window_max(const RobustnessTrace& trace, double lo, double hi) {
  const auto [b, e] = window(trace, lo, hi);
  if (b >= e) throw CoverageError("no samples inside the monitored window");
  return *std::max_element(trace.values.begin() + static_cast<std::ptrdiff_t>(b),
                           trace.values.begin() + static_cast<std::ptrdiff_t>(e));
}

// max over sample times t1 in [lo, hi] of min over samples in
// [t1 + inner.a, t1 + inner.b], restricted to witnesses whose inner window
// is covered by the trace. Sliding-window minimum, linear in trace length.
inline MonitorResult eventually_always(const RobustnessTrace& trace, double lo, double hi,
                                       const Interval& inner) {
  const auto [cb, ce] = window(trace, lo, hi);
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  bool complete = true;
  std::deque<std::size_t> dq;  // indices with increasing values
  std::size_t next = 0;
  std::size_t first = 0;
  for (std::size_t c = cb; c < ce; ++c) {
    const double t1 = trace.times[c];
    if (!covers(trace, t1 + inner.a, t1 + inner.b)) {
      complete = false;
      break;
    }
    const auto [wb, we] = window(trace, t1 + inner.a, t1 + inner.b);
    if (wb >= we) throw CoverageError("no samples inside the monitored window");
    if (next < wb) next = wb;
    while (next < we) {
      while (!dq.empty() && trace.values[dq.back()] >= trace.values[next]) dq.pop_back();
      dq.push_back(next++);
    }
    first = wb;
    while (!dq.empty() && dq.front() < first) dq.pop_front();
    best = std::max(best, trace.values[dq.front()]);
    any = true;
  }
  if (!any) throw CoverageError("trace does not cover the window of any witness time");
  if (ce == cb || trace.times.back() < hi + inner.b - kTimeTolerance) complete = false;
  return {best, complete};
}

}  // namespace detail

/// Robustness of phi at time t, allowing a trace that ends before the end of
/// an eventually-window. Always requires full coverage; Eventually and
/// EventuallyAlways require at least one covered witness and report
/// `complete == false` otherwise.
inline MonitorResult monitor_bound(const TemporalFormula& phi, const RobustnessTrace& trace,
                                   double t = 0.0) {
  detail::check_trace(trace);
  if (t < 0.0) throw Error("monitor: evaluation time must be non-negative");
  const double lo = t + phi.outer.a;
  const double hi = t + phi.outer.b;
  switch (phi.kind) {
    case TemporalFormula::Kind::Always:
      if (!detail::covers(trace, lo, hi))
        throw CoverageError("trace does not cover the always-window");
      return {detail::window_min(trace, lo, hi), true};
    case TemporalFormula::Kind::Eventually: {
      if (!detail::covers(trace, lo, lo))
        throw CoverageError("trace does not cover the eventually-window");
      const bool full = detail::covers(trace, lo, hi);
      return {detail::window_max(trace, lo, std::min(hi, trace.times.back())), full};
    }
    case TemporalFormula::Kind::EventuallyAlways:
      if (!detail::covers(trace, lo, lo + phi.inner.b))
        throw CoverageError("trace does not cover the window of any witness time");
      return detail::eventually_always(trace, lo, hi, phi.inner);
  }
  return {};
}

/// Robustness of phi at time t; the trace must cover the whole window.
inline double monitor(const TemporalFormula& phi, const RobustnessTrace& trace, double t = 0.0) {
  const MonitorResult r = monitor_bound(phi, trace, t);
  if (!r.complete) throw CoverageError("trace does not cover the required window");
  return r.value;
}

}  // namespace stlfunnel
