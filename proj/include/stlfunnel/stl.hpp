#pragma once

// Formula types for the concave STL fragment
//
//   psi ::= true | mu | !mu | psi & psi
//   phi ::= G[a,b] psi | F[a,b] psi | F[a,b] G[c,d] psi
//
// together with the smooth robust semantics of psi, its gradient, a
// structural concavity check and the global maximum of rho^psi.

#include <stlfunnel/common.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace stlfunnel {

struct Interval {
  double a = 0.0;
  double b = 0.0;

  Interval() = default;
  Interval(double lo, double hi) : a(lo), b(hi) {
    if (!(std::isfinite(lo) && std::isfinite(hi)))
      throw Error("interval bounds must be finite");
    if (lo < 0.0) throw Error("interval lower bound must be non-negative");
    if (lo > hi) throw Error("malformed interval: lower bound exceeds upper bound");
  }

  friend bool operator==(const Interval&, const Interval&) = default;
};

struct Affine {
  Vector coeffs;
  double offset = 0.0;
};

struct SquaredBall {
  Vector center;
  double radius = 0.0;
};

/// Continuously differentiable concave predicate function acting on a
/// selection of a subsystem's state coordinates.
///
/// Affine:      P(x) = a . x_sel + b
/// SquaredBall: P(x) = r^2 - |x_sel - c|^2
class Predicate {
 public:
  static Predicate affine(Vector coeffs, double offset, std::vector<int> selector) {
    if (coeffs.size() != static_cast<Eigen::Index>(selector.size()))
      throw DimensionError("affine predicate: coefficient count does not match selector");
    return Predicate(Affine{std::move(coeffs), offset}, std::move(selector));
  }

  static Predicate ball(Vector center, double radius, std::vector<int> selector) {
    if (center.size() != static_cast<Eigen::Index>(selector.size()))
      throw DimensionError("ball predicate: center dimension does not match selector");
    if (!(radius > 0.0)) throw Error("ball predicate: radius must be positive");
    return Predicate(SquaredBall{std::move(center), radius}, std::move(selector));
  }

  bool is_affine() const { return std::holds_alternative<Affine>(kind_); }
  bool is_ball() const { return std::holds_alternative<SquaredBall>(kind_); }
  const Affine& as_affine() const { return std::get<Affine>(kind_); }
  const SquaredBall& as_ball() const { return std::get<SquaredBall>(kind_); }
  const std::vector<int>& selector() const { return selector_; }

  /// Smallest state dimension the selector is valid for.
  int required_dim() const {
    return selector_.empty() ? 0 : *std::max_element(selector_.begin(), selector_.end()) + 1;
  }

  double value(const Vector& x) const {
    check_dim(x);
    if (is_affine()) {
      const auto& p = as_affine();
      double v = p.offset;
      for (std::size_t k = 0; k < selector_.size(); ++k)
        v += p.coeffs[static_cast<Eigen::Index>(k)] * x[selector_[k]];
      return v;
    }
    const auto& p = as_ball();
    double sq = 0.0;
    for (std::size_t k = 0; k < selector_.size(); ++k) {
      const double d = x[selector_[k]] - p.center[static_cast<Eigen::Index>(k)];
      sq += d * d;
    }
    return p.radius * p.radius - sq;
  }

  /// Gradient with respect to the full state, scaled by `scale` and added
  /// into `out`.
  void accumulate_gradient(const Vector& x, double scale, Vector& out) const {
    check_dim(x);
    if (is_affine()) {
      const auto& p = as_affine();
      for (std::size_t k = 0; k < selector_.size(); ++k)
        out[selector_[k]] += scale * p.coeffs[static_cast<Eigen::Index>(k)];
      return;
    }
    const auto& p = as_ball();
    for (std::size_t k = 0; k < selector_.size(); ++k)
      out[selector_[k]] +=
          scale * -2.0 * (x[selector_[k]] - p.center[static_cast<Eigen::Index>(k)]);
  }

  friend bool operator==(const Predicate& l, const Predicate& r) {
    if (l.selector_ != r.selector_ || l.kind_.index() != r.kind_.index()) return false;
    if (l.is_affine())
      return l.as_affine().coeffs == r.as_affine().coeffs &&
             l.as_affine().offset == r.as_affine().offset;
    return l.as_ball().center == r.as_ball().center && l.as_ball().radius == r.as_ball().radius;
  }

 private:
  Predicate(std::variant<Affine, SquaredBall> kind, std::vector<int> selector)
      : kind_(std::move(kind)), selector_(std::move(selector)) {
    std::vector<int> sorted = selector_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw Error("predicate selector indices must be distinct");
    if (!sorted.empty() && sorted.front() < 0)
      throw Error("predicate selector indices must be non-negative");
  }

  void check_dim(const Vector& x) const {
    if (x.size() < required_dim())
      throw DimensionError("state of dimension " + std::to_string(x.size()) +
                           " does not cover predicate selector (needs " +
                           std::to_string(required_dim()) + ")");
  }

  std::variant<Affine, SquaredBall> kind_;
  std::vector<int> selector_;
};

/// A possibly negated named predicate.
struct Literal {
  std::string name;
  Predicate predicate;
  bool negated = false;

  double value(const Vector& x) const {
    const double v = predicate.value(x);
    return negated ? -v : v;
  }

  friend bool operator==(const Literal&, const Literal&) = default;
};

/// Smooth minimum -ln(sum exp(-v_k)), evaluated with a min shift.
inline double smooth_min(std::span<const double> values) {
  if (values.empty()) return kUnbounded;
  const double lo = *std::min_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += std::exp(-(v - lo));
  return lo - std::log(sum);
}

/// Softmin weights exp(-v_k) / sum_j exp(-v_j).
inline std::vector<double> softmin_weights(std::span<const double> values) {
  std::vector<double> w(values.size());
  if (values.empty()) return w;
  const double lo = *std::min_element(values.begin(), values.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    w[k] = std::exp(-(values[k] - lo));
    sum += w[k];
  }
  for (double& v : w) v /= sum;
  return w;
}

/// Non-temporal formula psi. Conjunctions are kept flat: the formula is a
/// list of literals, `true` is the empty list, and `&` concatenates.
class NonTemporalFormula {
 public:
  enum class Kind { True, Pred, NegPred, And };

  NonTemporalFormula() = default;

  static NonTemporalFormula truth() { return {}; }

  static NonTemporalFormula atom(std::string name, Predicate p) {
    NonTemporalFormula f;
    f.literals_.push_back(Literal{std::move(name), std::move(p), false});
    return f;
  }

  static NonTemporalFormula negation(std::string name, Predicate p) {
    NonTemporalFormula f;
    f.literals_.push_back(Literal{std::move(name), std::move(p), true});
    return f;
  }

  friend NonTemporalFormula operator&(NonTemporalFormula l, const NonTemporalFormula& r) {
    l.literals_.insert(l.literals_.end(), r.literals_.begin(), r.literals_.end());
    return l;
  }

  Kind kind() const {
    if (literals_.empty()) return Kind::True;
    if (literals_.size() > 1) return Kind::And;
    return literals_.front().negated ? Kind::NegPred : Kind::Pred;
  }

  const std::vector<Literal>& literals() const { return literals_; }

  int required_dim() const {
    int d = 0;
    for (const auto& l : literals_) d = std::max(d, l.predicate.required_dim());
    return d;
  }

  friend bool operator==(const NonTemporalFormula&, const NonTemporalFormula&) = default;

 private:
  std::vector<Literal> literals_;
};

struct TemporalFormula {
  enum class Kind { Always, Eventually, EventuallyAlways };

  Kind kind = Kind::Always;
  Interval outer;
  Interval inner;  // used by EventuallyAlways only
  NonTemporalFormula psi;

  static TemporalFormula always(Interval i, NonTemporalFormula psi) {
    return {Kind::Always, i, Interval{}, std::move(psi)};
  }
  static TemporalFormula eventually(Interval i, NonTemporalFormula psi) {
    return {Kind::Eventually, i, Interval{}, std::move(psi)};
  }
  static TemporalFormula eventually_always(Interval outer, Interval inner, NonTemporalFormula psi) {
    return {Kind::EventuallyAlways, outer, inner, std::move(psi)};
  }

  friend bool operator==(const TemporalFormula& l, const TemporalFormula& r) {
    if (l.kind != r.kind || l.outer != r.outer || l.psi != r.psi) return false;
    return l.kind != Kind::EventuallyAlways || l.inner == r.inner;
  }
};

/// rho^psi(x). `true` evaluates to `true_value`; conjunctions use one flat
/// log-sum-exp over all literals.
inline double eval_rho(const NonTemporalFormula& psi, const Vector& x,
                       double true_value = kUnbounded) {
  const auto& lits = psi.literals();
  if (lits.empty()) return true_value;
  if (lits.size() == 1) return lits.front().value(x);
  std::vector<double> v(lits.size());
  for (std::size_t k = 0; k < lits.size(); ++k) v[k] = lits[k].value(x);
  return smooth_min(v);
}

struct RhoWithGradient {
  double value = 0.0;
  Vector gradient;
};

/// rho^psi(x) and its gradient in one pass. For a conjunction the gradient
/// is the softmin-weighted sum of the literal gradients.
inline RhoWithGradient eval_rho_grad(const NonTemporalFormula& psi, const Vector& x) {
  const auto& lits = psi.literals();
  if (lits.empty()) throw Error("gradient of the formula 'true' is undefined");
  RhoWithGradient out{0.0, Vector::Zero(x.size())};
  if (lits.size() == 1) {
    const auto& l = lits.front();
    out.value = l.value(x);
    l.predicate.accumulate_gradient(x, l.negated ? -1.0 : 1.0, out.gradient);
    return out;
  }
  constexpr std::size_t kInline = 16;
  std::array<double, kInline> inline_buf;
  std::vector<double> heap_buf;
  double* v = inline_buf.data();
  if (lits.size() > kInline) {
    heap_buf.resize(lits.size());
    v = heap_buf.data();
  }
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < lits.size(); ++k) {
    v[k] = lits[k].value(x);
    lo = std::min(lo, v[k]);
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < lits.size(); ++k) {
    v[k] = std::exp(-(v[k] - lo));
    sum += v[k];
  }
  out.value = lo - std::log(sum);
  for (std::size_t k = 0; k < lits.size(); ++k) {
    const double w = v[k] / sum;
    lits[k].predicate.accumulate_gradient(x, lits[k].negated ? -w : w, out.gradient);
  }
  return out;
}

inline Vector grad_rho(const NonTemporalFormula& psi, const Vector& x) {
  return eval_rho_grad(psi, x).gradient;
}

struct ConcavityReport {
  bool concave = true;
  bool well_posed = false;
  std::vector<std::string> violations;
};

/// Structural concavity check. Conjunctions of concave atoms are concave;
/// negation is only allowed on affine predicates. Well-posedness (bounded
/// superlevel sets) holds structurally when a ball atom is present, or when
/// every selected coordinate is bounded above and below by affine atoms.
inline ConcavityReport validate_concavity(const NonTemporalFormula& psi) {
  ConcavityReport rep;
  bool has_ball = false;
  std::vector<int> selected;
  std::vector<std::pair<bool, bool>> bounds;  // (has positive coeff, has negative coeff)
  auto slot = [&](int c) -> std::pair<bool, bool>& {
    auto it = std::find(selected.begin(), selected.end(), c);
    if (it == selected.end()) {
      selected.push_back(c);
      bounds.emplace_back(false, false);
      return bounds.back();
    }
    return bounds[static_cast<std::size_t>(it - selected.begin())];
  };
  for (const auto& lit : psi.literals()) {
    const auto& p = lit.predicate;
    if (p.is_ball()) {
      if (lit.negated) {
        rep.concave = false;
        rep.violations.push_back("negation of non-affine predicate '" + lit.name + "' is convex");
      } else {
        has_ball = true;
      }
      for (int c : p.selector()) slot(c);
      continue;
    }
    const auto& a = p.as_affine();
    for (std::size_t k = 0; k < p.selector().size(); ++k) {
      const double coef = (lit.negated ? -1.0 : 1.0) * a.coeffs[static_cast<Eigen::Index>(k)];
      auto& s = slot(p.selector()[k]);
      if (coef > 0.0) s.first = true;
      if (coef < 0.0) s.second = true;
    }
  }
  if (has_ball) {
    rep.well_posed = true;
  } else {
    rep.well_posed = !selected.empty() &&
                     std::all_of(bounds.begin(), bounds.end(),
                                 [](const auto& b) { return b.first && b.second; });
  }
  return rep;
}

struct RhoOptOptions {
  double box_lo = -10.0;
  double box_hi = 10.0;
  int starts = 16;
  double grad_tol = 1e-9;
  int max_iterations = 200000;
  std::uint64_t seed = 0;
};

namespace detail {

inline Vector literal_direction(const Literal& lit, int dim) {
  Vector d = Vector::Zero(dim);
  lit.predicate.accumulate_gradient(Vector::Zero(dim), lit.negated ? -1.0 : 1.0, d);
  return d;
}

// Two affine atoms whose gradients point in opposite directions bound the
// robustness from above along that line and hence everywhere.
inline bool has_opposing_affine_pair(const NonTemporalFormula& psi, int dim) {
  const auto& lits = psi.literals();
  for (std::size_t i = 0; i < lits.size(); ++i) {
    const Vector di = literal_direction(lits[i], dim);
    for (std::size_t j = i + 1; j < lits.size(); ++j) {
      const Vector dj = literal_direction(lits[j], dim);
      const double n = di.norm() * dj.norm();
      if (n > 0.0 && std::abs(di.dot(dj) + n) <= 1e-12 * n) return true;
    }
  }
  return false;
}

// Backtracking gradient ascent. Returns the final value, or kUnbounded if the
// iterate escapes to values beyond `escape`.
inline double ascend(const NonTemporalFormula& psi, Vector x, const RhoOptOptions& opt,
                     double escape) {
  double value = eval_rho(psi, x);
  double step = 1.0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Vector g = grad_rho(psi, x);
    const double gn2 = g.squaredNorm();
    if (std::sqrt(gn2) < opt.grad_tol) break;
    bool accepted = false;
    for (int ls = 0; ls < 200; ++ls) {
      const Vector trial = x + step * g;
      const double tv = eval_rho(psi, trial);
      if (tv >= value + 1e-4 * step * gn2) {
        x = trial;
        value = tv;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no further ascent representable in double precision
    if (value > escape) return kUnbounded;
    step *= 2.0;
  }
  return value;
}

}  // namespace detail

/// Global maximum of rho^psi. Formulas containing a ball atom or an opposing
/// affine pair are bounded and maximised by multistart gradient ascent;
/// other affine-only formulas are ascended with escape detection, returning
/// kUnbounded when the robustness grows without limit.
inline double rho_opt(const NonTemporalFormula& psi, const RhoOptOptions& opt = {}) {
  const auto rep = validate_concavity(psi);
  if (!rep.concave) throw ConcavityError("rho_opt requires a concave formula");
  if (psi.kind() == NonTemporalFormula::Kind::True) return kUnbounded;
  const int dim = psi.required_dim();
  const bool has_ball = std::any_of(psi.literals().begin(), psi.literals().end(),
                                    [](const Literal& l) { return l.predicate.is_ball(); });
  const bool bounded = has_ball || detail::has_opposing_affine_pair(psi, dim);
  if (!bounded && psi.literals().size() == 1) return kUnbounded;

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> dist(opt.box_lo, opt.box_hi);
  double best = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < std::max(1, opt.starts); ++s) {
    Vector x0(dim);
    for (int k = 0; k < dim; ++k) x0[k] = dist(rng);
    const double v = detail::ascend(psi, x0, opt, bounded ? kUnbounded : 1e9);
    if (is_unbounded(v)) return kUnbounded;
    best = std::max(best, v);
  }
  return best;
}

}  // namespace stlfunnel
