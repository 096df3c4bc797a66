#include "knightian/tree.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace knightian {

TreeLattice::TreeLattice(const VolBounds& bounds, double dt, const Mode& mode) : mode_(mode), dt_(dt) {
  bounds.validate();
  mode.validate(bounds);
  if (!(dt > 0.0)) throw std::invalid_argument("tree step must be positive");
  const double root_dt = std::sqrt(dt);
  if (mode.kind() == Mode::Kind::Fixed) {
    step_lo_ = step_hi_ = mode.sigma() * root_dt;
  } else {
    step_lo_ = bounds.sigma_lo * root_dt;
    step_hi_ = bounds.sigma_hi * root_dt;
  }
}

double TreeLattice::recurse(const Payoff& payoff, int remaining, double x) const {
  if (remaining == 0) return payoff(x);
  const double hi = 0.5 * (recurse(payoff, remaining - 1, x + step_hi_) +
                           recurse(payoff, remaining - 1, x - step_hi_));
  if (step_lo_ == step_hi_) return hi;
  const double lo = 0.5 * (recurse(payoff, remaining - 1, x + step_lo_) +
                           recurse(payoff, remaining - 1, x - step_lo_));
  return mode_.kind() == Mode::Kind::Lower ? std::min(lo, hi) : std::max(lo, hi);
}

double TreeLattice::expect(const Payoff& payoff, int steps, double x0) const {
  if (steps < 0 || steps > kMaxTreeSteps) {
    throw std::invalid_argument("tree steps must be in [0, " + std::to_string(kMaxTreeSteps) + "]");
  }
  return recurse(payoff, steps, x0);
}

double tree_expectation(const TreeLattice::Payoff& payoff, const VolBounds& bounds, int steps,
                        const Mode& mode) {
  if (steps < 1 || steps > kMaxTreeSteps) {
    throw std::invalid_argument("tree steps must be in [1, " + std::to_string(kMaxTreeSteps) + "], got " +
                                std::to_string(steps));
  }
  bounds.validate();
  const TreeLattice lattice(bounds, bounds.horizon / steps, mode);
  return lattice.expect(payoff, steps);
}

double tree_expectation(const PayoffExpr& expr, const VolBounds& bounds, int steps, const Mode& mode) {
  return tree_expectation([&expr](double x) { return expr.evaluate(x); }, bounds, steps, mode);
}

}  // namespace knightian
