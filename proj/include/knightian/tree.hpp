#pragma once

#include <functional>

#include "knightian/gexp.hpp"
#include "knightian/payoff.hpp"

namespace knightian {

inline constexpr int kMaxTreeSteps = 14;

/**
 * Brute-force discrete-time sublinear expectation.
 *
 * Each step picks sigma in {sigma_lo, sigma_hi} (or the fixed sigma) and moves
 * x by +-sigma sqrt(dt) with probability 1/2. The value is the exact backward
 * recursion over the non-recombining tree, optimizing the one-step average
 * per node: max for Upper, min for Lower. Cost is 4^steps payoff calls, which
 * is why steps is capped at kMaxTreeSteps.
 */
class TreeLattice {
 public:
  using Payoff = std::function<double(double)>;

  TreeLattice(const VolBounds& bounds, double dt, const Mode& mode);

  // Expectation of payoff(x0 + X_steps) where X is the lattice walk.
  double expect(const Payoff& payoff, int steps, double x0 = 0.0) const;

  double dt() const { return dt_; }

 private:
  double recurse(const Payoff& payoff, int remaining, double x) const;

  double step_lo_;
  double step_hi_;
  Mode mode_;
  double dt_;
};

// Tree expectation over [0, T] with `steps` equal steps; throws
// std::invalid_argument if steps is outside [1, kMaxTreeSteps].
double tree_expectation(const PayoffExpr& expr, const VolBounds& bounds, int steps, const Mode& mode);
double tree_expectation(const TreeLattice::Payoff& payoff, const VolBounds& bounds, int steps,
                        const Mode& mode);

}  // namespace knightian
