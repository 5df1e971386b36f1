#pragma once

// Fixed-step integration of the closed-loop network. The controller is
// evaluated at every stage state and time; within a stage, subsystems may be
// evaluated concurrently, each writing only its own slice of the derivative.

#include <stlfunnel/controller.hpp>
#include <stlfunnel/monitor.hpp>

#include <algorithm>
#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace stlfunnel {

enum class Integrator { Rk4, Euler };

struct SimConfig {
  double dt = 0.1;
  double horizon = 1000.0;
  Integrator integrator = Integrator::Rk4;
  int substeps = 1;  // integration steps per recorded grid step
  bool parallel = false;
  unsigned threads = 0;          // 0: hardware concurrency
  bool probe_actuation = false;  // check g g^T > 0 at every recorded sample

  std::size_t steps() const {
    if (!(dt > 0.0)) throw Error("simulation: dt must be positive");
    if (!(horizon >= dt)) throw Error("simulation: horizon must be at least dt");
    if (substeps < 1) throw Error("simulation: substeps must be at least 1");
    return static_cast<std::size_t>(std::floor(horizon / dt + 1e-9));
  }
};

struct ClampEvent {
  int subsystem = 0;
  double t = 0.0;
  double e_hat = 0.0;  // normalized error before clamping
};

struct Trajectory {
  std::vector<double> times;
  std::vector<int> ids;
  std::vector<int> state_dims;
  std::vector<int> input_dims;
  std::vector<std::vector<double>> states;  // per subsystem, row-major [sample][coordinate]
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> rho;
  std::vector<std::shared_ptr<const TaskEncoding>> encodings;
  std::vector<ClampEvent> clamp_events;

  std::size_t samples() const { return times.size(); }

  std::size_t index_of(int id) const {
    auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw Error("trajectory has no subsystem " + std::to_string(id));
    return static_cast<std::size_t>(it - ids.begin());
  }

  RobustnessTrace rho_trace(std::size_t k) const { return {times, rho[k]}; }

  Vector state(std::size_t k, std::size_t sample) const {
    const int n = state_dims[k];
    return Eigen::Map<const Vector>(states[k].data() + sample * static_cast<std::size_t>(n), n);
  }
};

struct Violation {
  int subsystem = 0;
  double t = 0.0;
  double rho = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// First funnel exit of each subsystem on the recorded grid.
inline std::vector<Violation> envelope_violations(const Trajectory& traj) {
  std::vector<Violation> out;
  for (std::size_t k = 0; k < traj.ids.size(); ++k) {
    if (!traj.encodings[k]) continue;
    for (std::size_t s = 0; s < traj.samples(); ++s) {
      const double v = traj.rho[k][s];
      if (!contains(*traj.encodings[k], traj.times[s], v)) {
        const Envelope e = envelope(*traj.encodings[k], traj.times[s]);
        out.push_back({traj.ids[k], traj.times[s], v, e.lower, e.upper});
        break;
      }
    }
  }
  return out;
}

namespace detail {

/// Persistent worker threads executing index-range chunks.
class WorkerPool {
 public:
  explicit WorkerPool(unsigned threads) {
    const unsigned n = std::max(1u, threads);
    for (unsigned w = 1; w < n; ++w) workers_.emplace_back([this, w] { loop(w); });
    chunks_ = n;
  }

  ~WorkerPool() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
      ++generation_;
    }
    start_cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  void run(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    if (workers_.empty() || n < 2) {
      body(0, n);
      return;
    }
    {
      std::lock_guard lock(mutex_);
      body_ = &body;
      n_ = n;
      pending_ = workers_.size();
      errors_.assign(chunks_, nullptr);
      ++generation_;
    }
    start_cv_.notify_all();
    execute(0);
    std::unique_lock lock(mutex_);
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    body_ = nullptr;
    for (auto& e : errors_)
      if (e) std::rethrow_exception(e);
  }

 private:
  void execute(std::size_t chunk) {
    const std::size_t lo = n_ * chunk / chunks_;
    const std::size_t hi = n_ * (chunk + 1) / chunks_;
    try {
      if (lo < hi) (*body_)(lo, hi);
    } catch (...) {
      errors_[chunk] = std::current_exception();
    }
  }

  void loop(unsigned chunk) {
    std::size_t seen = 0;
    for (;;) {
      {
        std::unique_lock lock(mutex_);
        start_cv_.wait(lock, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
      }
      execute(chunk);
      {
        std::lock_guard lock(mutex_);
        if (--pending_ == 0) done_cv_.notify_one();
      }
    }
  }

  std::vector<std::thread> workers_;
  std::size_t chunks_ = 1;
  std::mutex mutex_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t, std::size_t)>* body_ = nullptr;
  std::size_t n_ = 0;
  std::size_t pending_ = 0;
  std::size_t generation_ = 0;
  bool stop_ = false;
  std::vector<std::exception_ptr> errors_;
};

inline void check_laws(const Network& net, const std::vector<ControlLaw>& laws) {
  if (laws.size() != net.size())
    throw TopologyError("expected one control law per subsystem");
  for (std::size_t k = 0; k < net.size(); ++k) {
    const auto& s = net.subsystems()[k];
    if (laws[k].subsystem != s.id)
      throw TopologyError("control law order does not match subsystem order at position " +
                          std::to_string(k));
    if (laws[k].neighbors.size() != s.neighbors.size())
      throw TopologyError("control law of subsystem " + std::to_string(s.id) +
                          " has the wrong number of neighbour funnels");
    for (std::size_t j = 0; j < s.neighbors.size(); ++j)
      if (laws[k].neighbors[j].dim != net.at(s.neighbors[j]).n)
        throw TopologyError("control law of subsystem " + std::to_string(s.id) +
                            ": neighbour funnel dimension mismatch");
  }
}

// Rate of subsystem k; records a clamp event into `events` when the
// normalized error left the clamped performance region.
inline void subsystem_rate(const Network& net, const std::vector<ControlLaw>& laws,
                           const Vector& x_all, double t, std::size_t k, Vector& out,
                           std::vector<ClampEvent>* events, Vector* u_out = nullptr) {
  const auto& s = net.subsystems()[k];
  const Vector x = net.state_of(x_all, k);
  const Vector w = net.internal_input(x_all, k);
  const ControlTerms c = control_terms(laws[k], x, t, s);
  if (c.error.clamped && events) {
    const auto& enc = *laws[k].encoding;
    events->push_back({s.id, t, (c.error.e) / enc.funnel.gamma(t)});
  }
  out.segment(net.offset(k), s.n) = s.f(x) + c.g * c.u + s.h(w);
  if (u_out) *u_out = c.u;
}

}  // namespace detail

/// Stacked closed-loop derivative of the network state.
inline Vector derivative(const Network& net, const std::vector<ControlLaw>& laws,
                         const Vector& x_all, double t) {
  detail::check_laws(net, laws);
  if (x_all.size() != net.dim()) throw DimensionError("derivative: stacked state has wrong dimension");
  Vector out(net.dim());
  for (std::size_t k = 0; k < net.size(); ++k)
    detail::subsystem_rate(net, laws, x_all, t, k, out, nullptr);
  return out;
}

/// Fixed-step closed-loop simulation on the grid t_k = k dt.
inline Trajectory simulate(const Network& net, const std::vector<ControlLaw>& laws,
                           const SimConfig& cfg, const Vector& x0) {
  detail::check_laws(net, laws);
  if (x0.size() != net.dim()) throw DimensionError("simulate: initial state has wrong dimension");
  const std::size_t steps = cfg.steps();
  const std::size_t N = net.size();

  std::string bad;
  for (std::size_t k = 0; k < N; ++k) {
    const double rho = eval_rho(laws[k].encoding->psi(), net.state_of(x0, k));
    if (!contains(*laws[k].encoding, 0.0, rho)) {
      const Envelope e = envelope(*laws[k].encoding, 0.0);
      bad += " subsystem " + std::to_string(net.subsystems()[k].id) + " (rho=" +
             std::to_string(rho) + ", envelope (" + std::to_string(e.lower) + ", " +
             std::to_string(e.upper) + "));";
    }
  }
  if (!bad.empty())
    throw InitialConditionError("initial state outside the funnel for" + bad);

  Trajectory traj;
  traj.times.resize(steps + 1);
  for (std::size_t s = 0; s <= steps; ++s) traj.times[s] = static_cast<double>(s) * cfg.dt;
  for (std::size_t k = 0; k < N; ++k) {
    const auto& sub = net.subsystems()[k];
    traj.ids.push_back(sub.id);
    traj.state_dims.push_back(sub.n);
    traj.input_dims.push_back(sub.m);
    traj.states.emplace_back((steps + 1) * static_cast<std::size_t>(sub.n));
    traj.inputs.emplace_back((steps + 1) * static_cast<std::size_t>(sub.m));
    traj.rho.emplace_back(steps + 1);
    traj.encodings.push_back(laws[k].encoding);
  }

  const unsigned threads =
      cfg.parallel ? (cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency()))
                   : 1u;
  detail::WorkerPool pool(threads);
  std::vector<std::vector<ClampEvent>> events(N);

  auto rates = [&](const Vector& x, double t, Vector& out) {
    pool.run(N, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t k = lo; k < hi; ++k) detail::subsystem_rate(net, laws, x, t, k, out, &events[k]);
    });
  };

  auto record = [&](const Vector& x, std::size_t s) {
    const double t = traj.times[s];
    Vector scratch(net.dim());
    pool.run(N, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t k = lo; k < hi; ++k) {
        const auto& sub = net.subsystems()[k];
        const Vector xi = net.state_of(x, k);
        for (int c = 0; c < sub.n; ++c) {
          if (!std::isfinite(xi[c]))
            throw NumericalError("non-finite state in subsystem " + std::to_string(sub.id) +
                                 " at t=" + std::to_string(t));
          traj.states[k][s * static_cast<std::size_t>(sub.n) + static_cast<std::size_t>(c)] = xi[c];
        }
        Vector u;
        detail::subsystem_rate(net, laws, x, t, k, scratch, nullptr, &u);
        for (int c = 0; c < sub.m; ++c)
          traj.inputs[k][s * static_cast<std::size_t>(sub.m) + static_cast<std::size_t>(c)] = u[c];
        traj.rho[k][s] = eval_rho(laws[k].encoding->psi(), xi);
        if (cfg.probe_actuation && !(actuation_margin(sub, xi) > 1e-10))
          throw NumericalError("g g^T is not positive definite for subsystem " +
                               std::to_string(sub.id) + " at t=" + std::to_string(t));
      }
    });
  };

  Vector x = x0;
  Vector k1(net.dim()), k2(net.dim()), k3(net.dim()), k4(net.dim());
  const double h = cfg.dt / cfg.substeps;
  record(x, 0);
  for (std::size_t s = 0; s < steps; ++s) {
    for (int j = 0; j < cfg.substeps; ++j) {
      const double t = traj.times[s] + j * h;
      if (cfg.integrator == Integrator::Euler) {
        rates(x, t, k1);
        x += h * k1;
      } else {
        rates(x, t, k1);
        rates(x + (0.5 * h) * k1, t + 0.5 * h, k2);
        rates(x + (0.5 * h) * k2, t + 0.5 * h, k3);
        rates(x + h * k3, t + h, k4);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
    }
    record(x, s + 1);
  }
  for (auto& ev : events) traj.clamp_events.insert(traj.clamp_events.end(), ev.begin(), ev.end());
  std::stable_sort(traj.clamp_events.begin(), traj.clamp_events.end(),
                   [](const ClampEvent& a, const ClampEvent& b) { return a.t < b.t; });
  return traj;
}

}  // namespace stlfunnel
