#include "knightian/implementability.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace knightian {

double NetTradeSet::clearing_error() const {
  if (trades.empty()) return 0.0;
  double worst = 0.0;
  for (std::size_t j = 0; j < trades.front().size(); ++j) {
    double sum = 0.0;
    for (const auto& row : trades) sum += row[j];
    worst = std::max(worst, std::abs(sum));
  }
  return worst;
}

NetTradeSet net_trades(const EquilibriumResult& result, const Economy& economy) {
  const std::size_t nodes = static_cast<std::size_t>(economy.grid().nx);
  if (result.allocations.size() != economy.size() || result.psi.size() != nodes) {
    throw std::invalid_argument("equilibrium result does not match economy shape");
  }
  NetTradeSet set;
  set.trades.assign(economy.size(), std::vector<double>(nodes));
  for (std::size_t i = 0; i < economy.size(); ++i) {
    if (result.allocations[i].size() != nodes) throw std::invalid_argument("allocation length mismatch");
    const auto e = economy.endowment(i);
    for (std::size_t j = 0; j < nodes; ++j) {
      set.trades[i][j] = result.psi[j] * (result.allocations[i][j] - e[j]);
    }
  }
  return set;
}

double ImplementabilityVerdict::max_gap() const {
  double m = 0.0;
  for (const auto& a : agents) m = std::max(m, a.gap.gap);
  return m;
}

ImplementabilityVerdict check_implementability(const EquilibriumResult& result, const Economy& economy,
                                               double tol) {
  const NetTradeSet xi = net_trades(result, economy);
  ImplementabilityVerdict verdict;
  verdict.tol = tol;
  verdict.implementable = true;
  for (std::size_t i = 0; i < economy.size(); ++i) {
    AgentVerdict agent;
    agent.name = economy.agents()[i].name;
    agent.gap = mean_ambiguity_gap(xi.trades[i], economy.bounds(), economy.grid(), tol);
    verdict.implementable = verdict.implementable && agent.gap.mean_af;
    verdict.agents.push_back(std::move(agent));
  }
  return verdict;
}

AmbiguityGap check_claim(const PayoffExpr& claim, const VolBounds& bounds, const GridSpec& grid,
                         double tol) {
  return mean_ambiguity_gap(claim, bounds, grid, tol);
}

std::pair<double, double> wilson_interval(std::size_t k, std::size_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

std::uint64_t sample_seed(std::uint64_t master, std::size_t index) {
  // splitmix64 finalizer over (master, index)
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

// Uniform in [0, 1) from the top 53 bits; independent of the library's
// distribution implementations.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double perturbation(PerturbationFamily family, double x, double center, double width) {
  const double s = (x - center) / width;
  if (family == PerturbationFamily::Bump) return std::exp(-s * s);
  return std::clamp(s, 0.0, 1.0);
}

}  // namespace

ProbeReport genericity_probe(const Economy& economy, const ProbeOptions& options) {
  if (options.samples == 0) throw std::invalid_argument("probe needs at least one sample");
  if (economy.size() < 2) throw std::invalid_argument("probe needs at least two agents");
  if (!economy.constant_aggregate()) {
    throw std::invalid_argument("probe requires a constant aggregate endowment");
  }
  if (!(options.amplitude >= 0.0)) throw std::invalid_argument("amplitude must be non-negative");

  const VolBounds& bounds = economy.bounds();
  const GridSpec& grid = economy.grid();
  const double scale = bounds.sigma_hi * std::sqrt(bounds.horizon);
  const PriorSpec prior{options.pricing_sigma > 0.0 ? options.pricing_sigma : bounds.sigma_hi};

  std::vector<double> pair_total(static_cast<std::size_t>(grid.nx));
  for (int j = 0; j < grid.nx; ++j) pair_total[j] = economy.endowment(0)[j] + economy.endowment(1)[j];
  std::vector<double> base(pair_total.size());
  if (options.base_split) {
    base = sample_on_grid(*options.base_split, grid);
  } else {
    for (std::size_t j = 0; j < base.size(); ++j) base[j] = 0.5 * pair_total[j];
  }

  ProbeReport report;
  report.samples.reserve(options.samples);
  for (std::size_t k = 0; k < options.samples; ++k) {
    ProbeSample sample;
    sample.index = k;
    sample.seed = sample_seed(options.seed, k);
    std::mt19937_64 rng(sample.seed);
    sample.center = (2.0 * unit(rng) - 1.0) * scale;
    sample.width = (0.25 + 0.75 * unit(rng)) * scale;
    sample.sign = unit(rng) < 0.5 ? -1.0 : 1.0;

    std::vector<double> first(pair_total.size());
    std::vector<double> second(pair_total.size());
    for (int j = 0; j < grid.nx; ++j) {
      const double g = perturbation(options.family, grid.x(j), sample.center, sample.width);
      const double s = pair_total[j];
      first[j] = std::clamp(base[j] + options.amplitude * sample.sign * g, options.epsilon,
                            s - options.epsilon);
      second[j] = s - first[j];
    }

    try {
      const Economy perturbed = economy.with_endowment(0, std::move(first)).with_endowment(1, std::move(second));
      const EquilibriumResult eq = solve_equilibrium(perturbed, prior, options.negishi);
      const ImplementabilityVerdict verdict = check_implementability(eq, perturbed, options.tol);
      sample.gap_max = verdict.max_gap();
      sample.implementable = verdict.implementable;
      sample.solved = true;
      ++report.solved;
      if (!sample.implementable) ++report.failing;
    } catch (const std::exception& ex) {
      sample.error = ex.what();
      ++report.errors;
    }
    report.samples.push_back(std::move(sample));
  }
  report.fraction = report.solved ? static_cast<double>(report.failing) / static_cast<double>(report.solved) : 0.0;
  std::tie(report.wilson_lo, report.wilson_hi) = wilson_interval(report.failing, report.solved);
  return report;
}

}  // namespace knightian
