#pragma once

#include <span>
#include <string>
#include <vector>

#include "knightian/gexp.hpp"
#include "knightian/payoff.hpp"

namespace knightian {

// Bernoulli utility: log x, x^(1-gamma)/(1-gamma), or -exp(-a x)/a.
class Utility {
 public:
  enum class Kind { Log, Power, Exp };

  static Utility log();
  // gamma > 0, gamma != 1.
  static Utility power(double gamma);
  // a > 0. Fails the Inada condition at zero.
  static Utility exponential(double a);

  Kind kind() const { return kind_; }
  double parameter() const { return parameter_; }
  bool satisfies_inada() const { return kind_ != Kind::Exp; }

  double value(double c) const;
  double marginal(double c) const;

  // Exact inverse of u' restricted to positive consumption; throws DomainError
  // if y <= 0 or, for Exp, if the preimage is not positive (y >= 1).
  double inverse_marginal(double y) const;

  // Inverse of u' on its whole range; Exp may return non-positive values.
  double inverse_marginal_unrestricted(double y) const;

  std::string describe() const;

 private:
  Utility(Kind kind, double parameter) : kind_(kind), parameter_(parameter) {}
  Kind kind_;
  double parameter_;
};

inline double inverse_marginal(const Utility& u, double y) { return u.inverse_marginal(y); }

struct Agent {
  std::string name;
  Utility utility;
  PayoffExpr endowment;
};

/**
 * Agents plus the ambiguity model and the state grid. Endowments are sampled
 * on the grid at construction. Individual endowments must be non-negative
 * (a warning is recorded where one vanishes); the aggregate must be positive.
 */
class Economy {
 public:
  Economy(std::vector<Agent> agents, VolBounds bounds, GridSpec grid);

  const std::vector<Agent>& agents() const { return agents_; }
  std::size_t size() const { return agents_.size(); }
  const VolBounds& bounds() const { return bounds_; }
  const GridSpec& grid() const { return grid_; }

  std::span<const double> endowment(std::size_t i) const { return endowments_[i]; }
  std::span<const double> aggregate() const { return aggregate_; }

  // No aggregate uncertainty: e is constant on the grid up to rounding.
  bool constant_aggregate() const { return constant_aggregate_; }

  const std::vector<std::string>& warnings() const { return warnings_; }

  // Same agents on the same grid, one endowment replaced by grid samples.
  Economy with_endowment(std::size_t i, std::vector<double> samples) const;

  std::size_t index_of(const std::string& name) const;

 private:
  void finish();

  std::vector<Agent> agents_;
  VolBounds bounds_;
  GridSpec grid_;
  std::vector<std::vector<double>> endowments_;
  std::vector<double> aggregate_;
  bool constant_aggregate_ = false;
  std::vector<std::string> warnings_;
};

// Constant-volatility pricing prior.
struct PriorSpec {
  double sigma = 1.0;
  void validate(const VolBounds& bounds) const;
};

struct NodeAllocation {
  std::vector<double> consumption;
  double lambda = 0.0;
};

// Maximizes sum_i alpha_i u_i(c_i) subject to sum_i c_i = aggregate. Throws
// ConvergenceError if the multiplier search fails.
NodeAllocation efficient_allocation_at(std::span<const double> alpha, double aggregate,
                                       std::span<const Utility> utilities);

struct AllocationField {
  std::vector<std::vector<double>> consumption;  // [agent][node]
  std::vector<double> psi;                       // common marginal utility per node
};

// Node-wise efficient allocation; does not depend on any prior.
AllocationField allocation_field(std::span<const double> alpha, const Economy& economy);

// E^P[psi_alpha (c_alpha^i - e^i)] per agent.
std::vector<double> budget_excess(std::span<const double> alpha, const Economy& economy,
                                  const PriorSpec& prior);
std::vector<double> budget_excess(std::span<const double> alpha, const Economy& economy,
                                  const FixedPriorPricer& pricer);

struct NegishiOptions {
  double tolerance = 1e-10;  // max |F_i| at acceptance
  int max_iterations = 5000;
  double damping = 0.5;
  double boundary = 1e-9;    // weights below this count as boundary attraction
};

struct EquilibriumResult {
  std::vector<double> alpha;
  std::vector<std::vector<double>> allocations;  // [agent][node]
  std::vector<double> lambda;
  std::vector<double> psi;
  PriorSpec prior;
  std::vector<double> excess;
  int iterations = 0;
  std::vector<std::string> warnings;
};

// Negishi weights with zero budget excess under the given prior. Throws
// AggregateUncertaintyError if e is not constant, ConvergenceError on failure.
EquilibriumResult solve_equilibrium(const Economy& economy, const PriorSpec& prior,
                                    const NegishiOptions& options = {});

// Largest max-min spread of any agent's consumption across nodes.
double full_insurance_check(const EquilibriumResult& result);

inline constexpr double kFullInsuranceTolerance = 1e-8;

}  // namespace knightian
