#include "knightian/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "knightian/errors.hpp"

namespace knightian {

Utility Utility::log() { return Utility(Kind::Log, 0.0); }

Utility Utility::power(double gamma) {
  if (!(gamma > 0.0) || gamma == 1.0 || !std::isfinite(gamma)) {
    throw std::invalid_argument("power utility needs gamma > 0, gamma != 1");
  }
  return Utility(Kind::Power, gamma);
}

Utility Utility::exponential(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("exponential utility needs a > 0");
  return Utility(Kind::Exp, a);
}

double Utility::value(double c) const {
  switch (kind_) {
    case Kind::Log: return std::log(c);
    case Kind::Power: return std::pow(c, 1.0 - parameter_) / (1.0 - parameter_);
    case Kind::Exp: return -std::exp(-parameter_ * c) / parameter_;
  }
  return 0.0;
}

double Utility::marginal(double c) const {
  switch (kind_) {
    case Kind::Log: return 1.0 / c;
    case Kind::Power: return std::pow(c, -parameter_);
    case Kind::Exp: return std::exp(-parameter_ * c);
  }
  return 0.0;
}

double Utility::inverse_marginal_unrestricted(double y) const {
  switch (kind_) {
    case Kind::Log: return 1.0 / y;
    case Kind::Power: return std::pow(y, -1.0 / parameter_);
    case Kind::Exp: return -std::log(y) / parameter_;
  }
  return 0.0;
}

double Utility::inverse_marginal(double y) const {
  if (!(y > 0.0) || !std::isfinite(y)) throw DomainError("marginal utility must be positive and finite");
  if (kind_ == Kind::Exp && y >= 1.0) {
    throw DomainError("exponential utility: u'(c) = " + std::to_string(y) + " has no positive preimage");
  }
  return inverse_marginal_unrestricted(y);
}

std::string Utility::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Log: os << "log"; break;
    case Kind::Power: os << "power(gamma=" << parameter_ << ")"; break;
    case Kind::Exp: os << "exp(a=" << parameter_ << ")"; break;
  }
  return os.str();
}

Economy::Economy(std::vector<Agent> agents, VolBounds bounds, GridSpec grid)
    : agents_(std::move(agents)), bounds_(bounds), grid_(grid) {
  bounds_.validate();
  grid_.validate();
  if (agents_.empty()) throw std::invalid_argument("economy needs at least one agent");
  endowments_.reserve(agents_.size());
  for (const auto& a : agents_) endowments_.push_back(sample_on_grid(a.endowment, grid_));
  finish();
}

void Economy::finish() {
  warnings_.clear();
  aggregate_.assign(static_cast<std::size_t>(grid_.nx), 0.0);
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    bool touches_zero = false;
    for (int j = 0; j < grid_.nx; ++j) {
      const double v = endowments_[i][j];
      if (!(v >= 0.0)) {
        throw std::invalid_argument("endowment of agent '" + agents_[i].name +
                                    "' is negative at x = " + std::to_string(grid_.x(j)));
      }
      touches_zero = touches_zero || v == 0.0;
      aggregate_[j] += v;
    }
    if (touches_zero) {
      warnings_.push_back("endowment of agent '" + agents_[i].name + "' vanishes on part of the grid");
    }
    if (!agents_[i].utility.satisfies_inada()) {
      warnings_.push_back("agent '" + agents_[i].name +
                          "' has exponential utility (no Inada condition); allocations are checked for positivity");
    }
  }
  const auto [lo, hi] = std::minmax_element(aggregate_.begin(), aggregate_.end());
  if (!(*lo > 0.0)) throw std::invalid_argument("aggregate endowment must be positive on the grid");
  constant_aggregate_ = (*hi - *lo) <= 1e-12 * std::max(1.0, std::abs(*hi));
  if (!constant_aggregate_) {
    warnings_.push_back("aggregate endowment varies on the grid; only efficient allocations are meaningful");
  }
}

Economy Economy::with_endowment(std::size_t i, std::vector<double> samples) const {
  if (i >= agents_.size()) throw std::out_of_range("agent index out of range");
  if (samples.size() != static_cast<std::size_t>(grid_.nx)) {
    throw std::invalid_argument("endowment samples do not match grid");
  }
  Economy copy(*this);
  copy.endowments_[i] = std::move(samples);
  copy.finish();
  return copy;
}

std::size_t Economy::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    if (agents_[i].name == name) return i;
  }
  throw std::invalid_argument("no agent named '" + name + "'");
}

void PriorSpec::validate(const VolBounds& bounds) const {
  if (!bounds.contains(sigma)) {
    throw std::invalid_argument("prior volatility " + std::to_string(sigma) + " outside bounds");
  }
}

namespace {

void check_weights(std::span<const double> alpha, std::size_t agents) {
  if (alpha.size() != agents) throw std::invalid_argument("weight vector size does not match agent count");
  for (double a : alpha) {
    if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("Negishi weights must be positive");
  }
}

double total_demand(std::span<const double> alpha, std::span<const Utility> utilities, double lambda) {
  double sum = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    sum += utilities[i].inverse_marginal_unrestricted(lambda / alpha[i]);
  }
  return sum;
}

}  // namespace

NodeAllocation efficient_allocation_at(std::span<const double> alpha, double aggregate,
                                       std::span<const Utility> utilities) {
  check_weights(alpha, utilities.size());
  if (!(aggregate > 0.0)) throw std::invalid_argument("aggregate endowment must be positive");

  // Demand is strictly decreasing in lambda; bracket, then bisect in log space.
  double lo = 1.0;
  double hi = 1.0;
  int guard = 0;
  while (total_demand(alpha, utilities, lo) < aggregate) {
    lo *= 0.5;
    if (++guard > 4000) throw ConvergenceError("could not bracket the multiplier from below");
  }
  guard = 0;
  while (total_demand(alpha, utilities, hi) > aggregate) {
    hi *= 2.0;
    if (++guard > 4000) throw ConvergenceError("could not bracket the multiplier from above");
  }

  double best = lo;
  double best_err = std::abs(total_demand(alpha, utilities, lo) - aggregate);
  for (int it = 0; it < 400; ++it) {
    const double mid = std::sqrt(lo) * std::sqrt(hi);
    if (!(mid > lo && mid < hi)) break;
    const double d = total_demand(alpha, utilities, mid);
    const double err = std::abs(d - aggregate);
    if (err < best_err) {
      best = mid;
      best_err = err;
    }
    if (d == aggregate) break;
    (d > aggregate ? lo : hi) = mid;
  }
  if (best_err > 1e-12 * std::max(1.0, aggregate)) {
    throw ConvergenceError("multiplier bisection did not meet feasibility tolerance");
  }

  NodeAllocation out;
  out.lambda = best;
  out.consumption.resize(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    out.consumption[i] = utilities[i].inverse_marginal_unrestricted(best / alpha[i]);
  }
  return out;
}

AllocationField allocation_field(std::span<const double> alpha, const Economy& economy) {
  check_weights(alpha, economy.size());
  std::vector<Utility> utilities;
  utilities.reserve(economy.size());
  for (const auto& a : economy.agents()) utilities.push_back(a.utility);

  const auto e = economy.aggregate();
  AllocationField field;
  field.consumption.assign(economy.size(), std::vector<double>(e.size()));
  field.psi.resize(e.size());
  NodeAllocation node;
  for (std::size_t j = 0; j < e.size(); ++j) {
    if (j == 0 || e[j] != e[j - 1]) node = efficient_allocation_at(alpha, e[j], utilities);
    for (std::size_t i = 0; i < economy.size(); ++i) field.consumption[i][j] = node.consumption[i];
    field.psi[j] = node.lambda;
  }
  return field;
}

std::vector<double> budget_excess(std::span<const double> alpha, const Economy& economy,
                                  const FixedPriorPricer& pricer) {
  const AllocationField field = allocation_field(alpha, economy);
  std::vector<double> excess(economy.size());
  std::vector<double> trade(field.psi.size());
  for (std::size_t i = 0; i < economy.size(); ++i) {
    const auto endow = economy.endowment(i);
    for (std::size_t j = 0; j < trade.size(); ++j) {
      trade[j] = field.psi[j] * (field.consumption[i][j] - endow[j]);
    }
    excess[i] = pricer.price(trade);
  }
  return excess;
}

std::vector<double> budget_excess(std::span<const double> alpha, const Economy& economy,
                                  const PriorSpec& prior) {
  prior.validate(economy.bounds());
  const FixedPriorPricer pricer(economy.bounds(), economy.grid(), prior.sigma);
  return budget_excess(alpha, economy, pricer);
}

namespace {

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

void normalize(std::vector<double>& alpha) {
  const double s = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  for (double& a : alpha) a /= s;
}

std::vector<double> solve_two_agents(const Economy& economy, const FixedPriorPricer& pricer,
                                     const NegishiOptions& opt, int& iterations) {
  // F_1 is increasing in alpha_1 and changes sign on (0, 1).
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> alpha{0.5, 0.5};
  std::vector<double> best = alpha;
  double best_err = INFINITY;
  for (iterations = 1; iterations <= 200; ++iterations) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    alpha = {mid, 1.0 - mid};
    const double f = budget_excess(alpha, economy, pricer)[0];
    if (std::abs(f) < best_err) {
      best_err = std::abs(f);
      best = alpha;
    }
    if (std::abs(f) <= opt.tolerance) break;
    (f > 0.0 ? hi : lo) = mid;
  }
  if (best[0] < opt.boundary || best[1] < opt.boundary) {
    throw ConvergenceError("Negishi weights converge to the simplex boundary");
  }
  if (best_err > opt.tolerance) {
    throw ConvergenceError("Negishi bisection stalled with |F| = " + std::to_string(best_err));
  }
  return best;
}

std::vector<double> solve_many_agents(const Economy& economy, const FixedPriorPricer& pricer,
                                      const NegishiOptions& opt, int& iterations) {
  const std::size_t n = economy.size();
  std::vector<double> alpha(n, 1.0 / static_cast<double>(n));
  std::vector<double> excess = budget_excess(alpha, economy, pricer);
  double norm = max_abs(excess);
  for (iterations = 0; iterations < opt.max_iterations && norm > opt.tolerance; ++iterations) {
    double kappa = opt.damping;
    bool accepted = false;
    for (int halving = 0; halving < 40 && !accepted; ++halving, kappa *= 0.5) {
      std::vector<double> trial(n);
      bool positive = true;
      for (std::size_t i = 0; i < n; ++i) {
        trial[i] = alpha[i] * (1.0 - kappa * excess[i]);
        positive = positive && trial[i] > 0.0;
      }
      if (!positive) continue;
      normalize(trial);
      std::vector<double> trial_excess = budget_excess(trial, economy, pricer);
      const double trial_norm = max_abs(trial_excess);
      if (trial_norm <= norm || halving == 39) {
        alpha = std::move(trial);
        excess = std::move(trial_excess);
        norm = trial_norm;
        accepted = true;
      }
    }
    if (!accepted) throw ConvergenceError("Negishi step could not keep weights positive");
    for (double a : alpha) {
      if (a < opt.boundary) throw ConvergenceError("Negishi weights converge to the simplex boundary");
    }
  }
  if (norm > opt.tolerance) {
    throw ConvergenceError("Negishi iteration cap reached with |F| = " + std::to_string(norm));
  }
  return alpha;
}

}  // namespace

EquilibriumResult solve_equilibrium(const Economy& economy, const PriorSpec& prior,
                                    const NegishiOptions& options) {
  prior.validate(economy.bounds());
  if (!economy.constant_aggregate()) {
    throw AggregateUncertaintyError(
        "equilibrium requires a constant aggregate endowment (no aggregate uncertainty)");
  }
  const FixedPriorPricer pricer(economy.bounds(), economy.grid(), prior.sigma);

  EquilibriumResult result;
  result.prior = prior;
  if (economy.size() == 1) {
    result.alpha = {1.0};
  } else if (economy.size() == 2) {
    result.alpha = solve_two_agents(economy, pricer, options, result.iterations);
  } else {
    result.alpha = solve_many_agents(economy, pricer, options, result.iterations);
  }

  AllocationField field = allocation_field(result.alpha, economy);
  result.allocations = std::move(field.consumption);
  result.psi = field.psi;
  result.lambda = std::move(field.psi);
  result.excess = budget_excess(result.alpha, economy, pricer);
  result.warnings = economy.warnings();
  for (std::size_t i = 0; i < economy.size(); ++i) {
    const auto& c = result.allocations[i];
    if (*std::min_element(c.begin(), c.end()) <= 0.0) {
      result.warnings.push_back("agent '" + economy.agents()[i].name + "' has non-positive consumption");
    }
  }
  return result;
}

double full_insurance_check(const EquilibriumResult& result) {
  double spread = 0.0;
  for (const auto& c : result.allocations) {
    const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
    spread = std::max(spread, *hi - *lo);
  }
  return spread;
}

}  // namespace knightian
