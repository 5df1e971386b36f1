#pragma once

// Funnel error transformation and the closed-form decentralized feedback
//
//   u = -g(x)^T grad rho^psi(x)^T J eps - g(x)^T h(d(t))
//
// with e = rho^psi(x) - rho_max, e_hat = e / gamma(t),
// eps = ln(-(e_hat + 1) / e_hat) and J = -1 / (gamma e_hat (1 + e_hat)).

#include <stlfunnel/funnel.hpp>
#include <stlfunnel/network.hpp>

#include <memory>
#include <utility>
#include <vector>

namespace stlfunnel {

/// Maps the performance region (-1, 0) onto the real line; strictly increasing.
inline double transform(double e_hat) { return std::log(-(e_hat + 1.0) / e_hat); }

/// Inverse of `transform`.
inline double transform_inverse(double eps) { return -1.0 / (1.0 + std::exp(eps)); }

struct ErrorState {
  double e = 0.0;
  double e_hat = 0.0;
  double epsilon = 0.0;
  double jacobian = 0.0;
  bool clamped = false;
};

struct NeighborFunnel {
  Funnel funnel;
  int dim = 1;
};

struct ControlLaw {
  int subsystem = 0;
  std::shared_ptr<const TaskEncoding> encoding;
  std::vector<NeighborFunnel> neighbors;  // in the stacking order of w_i
  double clamp_margin = 1e-9;

  ControlLaw() = default;
  ControlLaw(int id, std::shared_ptr<const TaskEncoding> enc, std::vector<NeighborFunnel> nb,
             double margin = 1e-9)
      : subsystem(id), encoding(std::move(enc)), neighbors(std::move(nb)), clamp_margin(margin) {
    if (!encoding) throw Error("control law: missing task encoding");
    if (!(margin > 0.0 && margin < 0.5)) throw Error("control law: clamp margin must lie in (0, 0.5)");
  }
};

inline ErrorState error_state_from_rho(const TaskEncoding& enc, double rho, double t,
                                       double clamp_margin = 1e-9) {
  ErrorState s;
  const double gamma = enc.funnel.gamma(t);
  s.e = rho - enc.rho_max;
  s.e_hat = s.e / gamma;
  const double lo = -1.0 + clamp_margin;
  const double hi = -clamp_margin;
  if (!(s.e_hat >= lo && s.e_hat <= hi)) {
    s.clamped = true;
    s.e_hat = std::isnan(s.e_hat) ? -0.5 : std::clamp(s.e_hat, lo, hi);
  }
  s.epsilon = transform(s.e_hat);
  s.jacobian = -1.0 / (gamma * s.e_hat * (1.0 + s.e_hat));
  return s;
}

inline ErrorState error_state(const TaskEncoding& enc, const Vector& x, double t,
                              double clamp_margin = 1e-9) {
  return error_state_from_rho(enc, eval_rho(enc.psi(), x), t, clamp_margin);
}

/// d(t): each neighbour's funnel value repeated over that neighbour's state
/// dimension, stacked in neighbour order.
inline Vector feedforward_d(const ControlLaw& law, double t) {
  int total = 0;
  for (const auto& nb : law.neighbors) total += nb.dim;
  Vector d(total);
  int at = 0;
  for (const auto& nb : law.neighbors) {
    d.segment(at, nb.dim).setConstant(nb.funnel.gamma(t));
    at += nb.dim;
  }
  return d;
}

/// Feedback input together with the quantities it was computed from.
struct ControlTerms {
  Vector u;
  Matrix g;
  ErrorState error;
};

inline ControlTerms control_terms(const ControlLaw& law, const Vector& x, double t,
                                  const Subsystem& model) {
  if (x.size() != model.n)
    throw DimensionError("control: state dimension " + std::to_string(x.size()) +
                         " differs from model dimension " + std::to_string(model.n));
  const TaskEncoding& enc = *law.encoding;
  const RhoWithGradient rg = eval_rho_grad(enc.psi(), x);
  ControlTerms out;
  out.error = error_state_from_rho(enc, rg.value, t, law.clamp_margin);
  out.g = model.g(x);
  if (out.g.rows() != model.n || out.g.cols() != model.m)
    throw DimensionError("control: input matrix has wrong shape");
  const Vector d = feedforward_d(law, t);
  if (d.size() != model.p)
    throw DimensionError("control: neighbour funnel block does not match the internal input dimension");
  out.u = -out.g.transpose() *
          (rg.gradient * (out.error.jacobian * out.error.epsilon) + model.h(d));
  return out;
}

inline Vector control(const ControlLaw& law, const Vector& x, double t, const Subsystem& model,
                      ErrorState* state_out = nullptr) {
  ControlTerms c = control_terms(law, x, t, model);
  if (state_out) *state_out = c.error;
  return std::move(c.u);
}

/// Smallest eigenvalue of g(x) g(x)^T; positive definiteness is required for
/// the feedback to act on every direction of the state.
inline double actuation_margin(const Subsystem& model, const Vector& x) {
  const Matrix g = model.g(x);
  const Matrix ggt = g * g.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(ggt, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace stlfunnel
