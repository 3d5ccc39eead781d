#pragma once

#include <stdexcept>
#include <string>

namespace iay {

// Malformed user input: bad measure files, inconsistent options.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The minimization at some (level, y) produced no finite value.
class NoMinimizer : public std::runtime_error {
 public:
  NoMinimizer(int level, double y, const std::string& what)
      : std::runtime_error(what), level(level), y(y) {}
  int level;
  double y;
};

// A boundary handed to the exact oracle is not piecewise constant.
class NonStepBoundary : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The telescoping price sum and K_n disagree; points at a boundary bug.
class IdentityMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Payoff grid does not cover the support of the last marginal.
class GridCoverage : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Too many simulated paths hit the step cap.
class SimulationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace iay
