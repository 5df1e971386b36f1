#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace stlfunnel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Robustness reported for the formula `true`, and the value `rho_opt`
/// returns for formulas whose robustness is unbounded above.
inline constexpr double kUnbounded = 1e12;

inline bool is_unbounded(double v) { return v >= kUnbounded; }

/// Absolute slack used when matching sample times against window endpoints.
inline constexpr double kTimeTolerance = 1e-9;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " at position " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConcavityError : public Error {
 public:
  using Error::Error;
};

class InfeasibleTaskError : public Error {
 public:
  using Error::Error;
};

class CoverageError : public Error {
 public:
  using Error::Error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

class InitialConditionError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace stlfunnel
