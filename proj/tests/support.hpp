#pragma once

// Random formula and trace generators shared by the unit and acceptance tests.

#include <stlfunnel.hpp>

#include <random>
#include <string>

namespace stlfunnel::testing {

inline Vector random_vector(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vector v(n);
  for (int k = 0; k < n; ++k) v[k] = d(rng);
  return v;
}

/// Random concave conjunction of 1..max_literals literals over a state of
/// dimension `dim`: balls and (possibly negated) affine atoms.
inline NonTemporalFormula random_psi(std::mt19937_64& rng, int dim, int max_literals = 5) {
  std::uniform_int_distribution<int> count(1, max_literals);
  std::uniform_int_distribution<int> coin(0, 2);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> radius(0.5, 3.0);
  NonTemporalFormula psi;
  const int m = count(rng);
  for (int k = 0; k < m; ++k) {
    std::vector<int> sel;
    for (int i = 0; i < dim; ++i)
      if (coin(rng) != 0 || (sel.empty() && i == dim - 1)) sel.push_back(i);
    const auto n = static_cast<int>(sel.size());
    const std::string name = "p" + std::to_string(k);
    switch (coin(rng)) {
      case 0:
        psi = psi & NonTemporalFormula::atom(name, Predicate::ball(random_vector(rng, n, -1, 1), radius(rng), sel));
        break;
      case 1:
        psi = psi & NonTemporalFormula::atom(name, Predicate::affine(random_vector(rng, n, -2, 2), u(rng), sel));
        break;
      default:
        psi = psi & NonTemporalFormula::negation(name, Predicate::affine(random_vector(rng, n, -2, 2), u(rng), sel));
    }
  }
  return psi;
}

inline Predicate scalar_affine(double a, double b) {
  return Predicate::affine(Vector::Constant(1, a), b, {0});
}

/// (25 - T) & (T - 21)
inline NonTemporalFormula room_band(double lo = 21.0, double hi = 25.0) {
  return NonTemporalFormula::atom("le", scalar_affine(-1.0, hi)) &
         NonTemporalFormula::atom("ge", scalar_affine(1.0, -lo));
}

inline RobustnessTrace uniform_trace(std::vector<double> values, double dt) {
  RobustnessTrace tr;
  tr.values = std::move(values);
  for (std::size_t k = 0; k < tr.values.size(); ++k) tr.times.push_back(static_cast<double>(k) * dt);
  return tr;
}

}  // namespace stlfunnel::testing
