#pragma once

// Subsystems x_i' = f_i(x_i) + g_i(x_i) u_i + h_i(w_i), where the internal
// input w_i stacks the states of the in-neighbours in list order, and the
// built-in case-study networks.

#include <stlfunnel/common.hpp>

#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace stlfunnel {

struct Subsystem {
  int id = 0;
  int n = 0;  // state dimension
  int m = 0;  // input dimension
  int p = 0;  // internal input dimension
  std::function<Vector(const Vector&)> f;
  std::function<Matrix(const Vector&)> g;
  std::function<Vector(const Vector&)> h;
  std::vector<int> neighbors;
  Vector x0;  // default initial state, may be empty
};

class Network {
 public:
  Network() = default;

  explicit Network(std::vector<Subsystem> subsystems) : subsystems_(std::move(subsystems)) {
    int offset = 0;
    for (std::size_t k = 0; k < subsystems_.size(); ++k) {
      const auto& s = subsystems_[k];
      if (s.n <= 0 || s.m <= 0) throw TopologyError("subsystem " + std::to_string(s.id) + ": empty state or input");
      if (!s.f || !s.g || !s.h) throw TopologyError("subsystem " + std::to_string(s.id) + ": missing dynamics");
      if (!index_.emplace(s.id, k).second)
        throw TopologyError("duplicate subsystem id " + std::to_string(s.id));
      offsets_.push_back(offset);
      offset += s.n;
    }
    dim_ = offset;
    for (const auto& s : subsystems_) {
      int p = 0;
      for (int j : s.neighbors) {
        if (j == s.id) throw TopologyError("subsystem " + std::to_string(s.id) + " lists itself as neighbour");
        auto it = index_.find(j);
        if (it == index_.end())
          throw TopologyError("subsystem " + std::to_string(s.id) + ": dangling neighbour id " + std::to_string(j));
        p += subsystems_[it->second].n;
      }
      if (p != s.p)
        throw TopologyError("subsystem " + std::to_string(s.id) + ": internal input dimension " +
                            std::to_string(s.p) + " differs from stacked neighbour dimension " +
                            std::to_string(p));
    }
  }

  const std::vector<Subsystem>& subsystems() const { return subsystems_; }
  std::size_t size() const { return subsystems_.size(); }
  int dim() const { return dim_; }
  int offset(std::size_t k) const { return offsets_[k]; }

  bool contains(int id) const { return index_.count(id) != 0; }
  std::size_t index_of(int id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw TopologyError("unknown subsystem id " + std::to_string(id));
    return it->second;
  }
  const Subsystem& at(int id) const { return subsystems_[index_of(id)]; }

  Vector state_of(const Vector& x_all, std::size_t k) const {
    return x_all.segment(offsets_[k], subsystems_[k].n);
  }

  /// w_i: stacked neighbour states taken from the network state.
  Vector internal_input(const Vector& x_all, std::size_t k) const {
    const auto& s = subsystems_[k];
    Vector w(s.p);
    int at = 0;
    for (int j : s.neighbors) {
      const std::size_t q = index_of(j);
      w.segment(at, subsystems_[q].n) = x_all.segment(offsets_[q], subsystems_[q].n);
      at += subsystems_[q].n;
    }
    return w;
  }

  Vector initial_state() const {
    Vector x(dim_);
    for (std::size_t k = 0; k < subsystems_.size(); ++k) {
      if (subsystems_[k].x0.size() != subsystems_[k].n)
        throw InitialConditionError("subsystem " + std::to_string(subsystems_[k].id) +
                                    " has no default initial state");
      x.segment(offsets_[k], subsystems_[k].n) = subsystems_[k].x0;
    }
    return x;
  }

 private:
  std::vector<Subsystem> subsystems_;
  std::map<int, std::size_t> index_;
  std::vector<int> offsets_;
  int dim_ = 0;
};

struct RoomParameters {
  double alpha = 0.05;
  double alpha_e = 0.008;
  double alpha_h = 0.0036;
  double t_e = -1.0;
  double t_h = 50.0;
  double t0_odd = 19.0;
  double t0_even = 25.0;
};

/// Circular building of n rooms, ids 1..n, neighbours (i-1, i+1) mod n.
///
///   T_i' = (-2 alpha - alpha_e) T_i + alpha (T_{i-1} + T_{i+1})
///          + alpha_h (T_h - T_i) nu_i + alpha_e T_e
///
/// This is the room equation with the valve-dependent diagonal term
/// -alpha_h nu_i T_i moved into the input matrix g(T) = alpha_h (T_h - T).
inline Network builtin_room_model(int n, const RoomParameters& prm = {}) {
  if (n < 3) throw Error("room model needs at least 3 rooms");
  std::vector<Subsystem> rooms;
  rooms.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    Subsystem s;
    s.id = i;
    s.n = 1;
    s.m = 1;
    s.p = 2;
    s.f = [prm](const Vector& x) {
      Vector d(1);
      d[0] = (-2.0 * prm.alpha - prm.alpha_e) * x[0] + prm.alpha_e * prm.t_e;
      return d;
    };
    s.g = [prm](const Vector& x) {
      Matrix g(1, 1);
      g(0, 0) = prm.alpha_h * (prm.t_h - x[0]);
      return g;
    };
    s.h = [prm](const Vector& w) {
      Vector d(1);
      d[0] = prm.alpha * (w[0] + w[1]);
      return d;
    };
    s.neighbors = {i == 1 ? n : i - 1, i == n ? 1 : i + 1};
    s.x0 = Vector::Constant(1, i % 2 == 1 ? prm.t0_odd : prm.t0_even);
    rooms.push_back(std::move(s));
  }
  return Network(std::move(rooms));
}

struct RobotParameters {
  double wheel_radius = 0.02;
  double body_radius = 0.2;
  double coupling = 0.1;
};

/// Geometry matrix of a three-wheeled omnidirectional base.
inline Matrix robot_geometry(double body_radius) {
  const double c = std::cos(std::numbers::pi / 6.0);
  const double s = std::sin(std::numbers::pi / 6.0);
  Matrix b(3, 3);
  b << 0.0, c, -c,
      -1.0, s, -s,
      body_radius, body_radius, body_radius;
  return b;
}

inline Matrix planar_rotation(double theta) {
  Matrix r = Matrix::Identity(3, 3);
  r(0, 0) = std::cos(theta);
  r(0, 1) = -std::sin(theta);
  r(1, 0) = std::sin(theta);
  r(1, 1) = std::cos(theta);
  return r;
}

/// Five omnidirectional robots with consensus coupling, neighbours
/// N_i = {i+1} and N_5 = {1}:
///
///   x_i' = R(x_i3) (B^T)^{-1} R_w u_i - k sum_j (x_i - x_j)
inline Network builtin_robot_model(const RobotParameters& prm = {}) {
  const Matrix wheel_map =
      robot_geometry(prm.body_radius).transpose().inverse() * prm.wheel_radius;
  const double pi = std::numbers::pi;
  const std::vector<Vector> x0 = {
      (Vector(3) << 0.1, 0.6, pi / 4).finished(),  (Vector(3) << 0.4, 1.1, -pi / 4).finished(),
      (Vector(3) << 1.05, 0.8, -pi / 4).finished(), (Vector(3) << 1.0, 0.2, pi / 4).finished(),
      (Vector(3) << 0.3, 0.1, 0.0).finished()};
  std::vector<Subsystem> robots;
  for (int i = 1; i <= 5; ++i) {
    Subsystem s;
    s.id = i;
    s.n = 3;
    s.m = 3;
    s.p = 3;
    s.neighbors = {i == 5 ? 1 : i + 1};
    const double k = prm.coupling;
    const double degree = static_cast<double>(s.neighbors.size());
    s.f = [k, degree](const Vector& x) -> Vector { return -k * degree * x; };
    s.g = [wheel_map](const Vector& x) -> Matrix { return planar_rotation(x[2]) * wheel_map; };
    s.h = [k](const Vector& w) -> Vector { return k * w; };
    s.x0 = x0[static_cast<std::size_t>(i - 1)];
    robots.push_back(std::move(s));
  }
  return Network(std::move(robots));
}

}  // namespace stlfunnel
