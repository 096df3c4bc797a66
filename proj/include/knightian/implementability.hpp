#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "knightian/equilibrium.hpp"
#include "knightian/gexp.hpp"

namespace knightian {

// xi^i = psi (c^i - e^i) on the grid, one row per agent.
struct NetTradeSet {
  std::vector<std::vector<double>> trades;

  // max_j |sum_i xi^i(x_j)|
  double clearing_error() const;
};

NetTradeSet net_trades(const EquilibriumResult& result, const Economy& economy);

struct AgentVerdict {
  std::string name;
  AmbiguityGap gap;
};

struct ImplementabilityVerdict {
  std::vector<AgentVerdict> agents;
  bool implementable = false;
  double tol = 0.0;

  double max_gap() const;
};

// Implementable by continuous trading iff every net trade is mean ambiguity-free.
ImplementabilityVerdict check_implementability(const EquilibriumResult& result, const Economy& economy,
                                               double tol = kDefaultMeanAfTolerance);

// Raw-claim mode: the same test applied to a single payoff.
AmbiguityGap check_claim(const PayoffExpr& claim, const VolBounds& bounds, const GridSpec& grid,
                         double tol = kDefaultMeanAfTolerance);

enum class PerturbationFamily { Bump, Ramp };

struct ProbeOptions {
  std::size_t samples = 200;
  PerturbationFamily family = PerturbationFamily::Bump;
  double amplitude = 0.1;
  std::uint64_t seed = 42;
  double tol = kDefaultMeanAfTolerance;
  double epsilon = 1e-3;  // endowments are clamped to [epsilon, s - epsilon]
  double pricing_sigma = 0.0;  // 0 selects sigma_hi
  // Replaces s/2 as the unperturbed share of agent 0.
  std::optional<PayoffExpr> base_split;
  NegishiOptions negishi;
};

struct ProbeSample {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double center = 0.0;
  double width = 0.0;
  double sign = 1.0;
  double gap_max = 0.0;
  bool implementable = false;
  bool solved = false;
  std::string error;
};

struct ProbeReport {
  std::vector<ProbeSample> samples;
  std::size_t failing = 0;   // solved and not implementable
  std::size_t solved = 0;
  std::size_t errors = 0;
  double fraction = 0.0;     // failing / solved
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
};

// 95% Wilson score interval for k successes out of n.
std::pair<double, double> wilson_interval(std::size_t k, std::size_t n, double z = 1.959963984540054);

// Seed of sample k derived from the master seed.
std::uint64_t sample_seed(std::uint64_t master, std::size_t index);

/**
 * Re-splits the endowment of the first two agents as
 * e^0 = clamp(base + amplitude * g_k, eps, s - eps), e^1 = s - e^0
 * with s = e^0 + e^1 and g_k a seeded bump or ramp, then recomputes the
 * equilibrium and its implementability verdict for each sample.
 */
ProbeReport genericity_probe(const Economy& economy, const ProbeOptions& options);

}  // namespace knightian
