#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "knightian/gexp.hpp"
#include "knightian/payoff.hpp"

namespace knightian {

/**
 * Hedge ratio eta = v_x and curvature phi_hat = v_xx / 2 of an upper value
 * field, by central differences on every stored layer. Boundary columns
 * copy their neighbours.
 */
class HedgeField {
 public:
  explicit HedgeField(ValueField upper);

  const ValueField& value() const { return *value_; }
  const GridSpec& grid() const { return value_->grid(); }
  const VolBounds& bounds() const { return value_->bounds(); }

  std::span<const double> eta_layer(int layer) const;
  std::span<const double> phi_hat_layer(int layer) const;

  // Nearest stored layer <= t, linear in x. Throw std::out_of_range off-grid.
  double eta_at(double t, double x) const;
  double phi_hat_at(double t, double x) const;

  bool contains(double x) const { return x >= grid().x_min && x <= grid().x_max; }

 private:
  std::shared_ptr<const ValueField> value_;
  std::vector<double> eta_;
  std::vector<double> phi_hat_;
};

HedgeField hedge_field(const PayoffExpr& expr, const VolBounds& bounds, const GridSpec& grid);
HedgeField hedge_field(std::span<const double> terminal, const VolBounds& bounds, const GridSpec& grid);

// Volatility control for simulated priors.
class ControlSpec {
 public:
  static ControlSpec constant(double sigma);
  // sigma_hi where phi_hat(t, B_t) >= 0, sigma_lo elsewhere.
  static ControlSpec extremal(std::shared_ptr<const HedgeField> field);

  bool is_extremal() const { return field_ != nullptr; }
  double constant_sigma() const { return sigma_; }

  // Throws std::out_of_range if an extremal control is queried off-grid.
  double sigma_at(double t, double x, const VolBounds& bounds) const;

 private:
  double sigma_ = 0.0;
  std::shared_ptr<const HedgeField> field_;
};

enum class IncrementKind { Binary, Gaussian };

struct Path {
  std::vector<double> b;      // n_steps + 1 states, b[0] = 0
  std::vector<double> sigma;  // n_steps realized volatilities
  bool exited = false;        // left the control grid (extremal control only)
};

/**
 * Seeded batch of paths under one control. Paths are generated on demand:
 * path i depends only on (seed, i), so a batch of 10^5 x 512 never has to be
 * held in memory and any subset can be reproduced.
 */
class PathBatch {
 public:
  PathBatch(ControlSpec control, VolBounds bounds, std::size_t n_paths, int n_steps, std::uint64_t seed,
            IncrementKind kind);

  Path path(std::size_t i) const;

  std::size_t size() const { return n_paths_; }
  int steps() const { return n_steps_; }
  double dt() const { return bounds_.horizon / n_steps_; }
  std::uint64_t seed() const { return seed_; }
  IncrementKind increments() const { return kind_; }
  const VolBounds& bounds() const { return bounds_; }
  const ControlSpec& control() const { return control_; }

 private:
  ControlSpec control_;
  VolBounds bounds_;
  std::size_t n_paths_;
  int n_steps_;
  std::uint64_t seed_;
  IncrementKind kind_;
};

PathBatch simulate_paths(const ControlSpec& control, const VolBounds& bounds, std::size_t n_paths,
                         int n_steps, std::uint64_t seed, IncrementKind kind = IncrementKind::Binary);

struct SampleStats {
  double mean = 0.0;
  double stdev = 0.0;
  double stderr_mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/**
 * Outcome of hedging a terminal claim X along a path batch.
 *
 * hedge_gap = E X + int eta dB - X is the terminal surplus of the pure
 * trading strategy. residual = hedge_gap - K_T is what is left of the
 * decomposition E_t X = E X + int eta dB - K_t after discretization, and
 * should vanish path by path as the step shrinks.
 */
struct ReplicationReport {
  double upper_expectation = 0.0;
  SampleStats hedge_gap;
  SampleStats residual;
  SampleStats compensator;  // K_T
  SampleStats gains;        // int eta dB
  std::size_t paths_used = 0;
  std::size_t paths_excluded = 0;
  std::size_t k_decreasing_steps = 0;
  int steps = 0;
  std::uint64_t seed = 0;
};

using TerminalClaim = std::function<double(double)>;

ReplicationReport replicate(const TerminalClaim& claim, const HedgeField& hedge, const PathBatch& paths,
                            double upper_expectation);
ReplicationReport replicate(const PayoffExpr& expr, const HedgeField& hedge, const PathBatch& paths,
                            double upper_expectation);

// Per-path compensator K_{t_k}, k = 0..n_steps, along one path.
std::vector<double> compensator_path(const HedgeField& hedge, const Path& path, double dt);

// sum_k strategy(t_k, B_k) (B_{k+1} - B_k).
double gains_along(const HedgeField& hedge, const Path& path, double dt);

using Loading = std::function<double(double t, double x)>;

/**
 * Trading strategy theta / V for the integrator dM = V dB. The quotient is
 * tabulated on the hedge grid for inspection; strategy_at evaluates theta
 * by interpolation and divides by V at the query point, so that
 * strategy_at * loading_at reproduces theta at every path state.
 */
class StrategyTransform {
 public:
  StrategyTransform(std::shared_ptr<const HedgeField> theta, Loading loading, double floor);

  double strategy_at(double t, double x) const;
  double loading_at(double t, double x) const;
  double floor() const { return floor_; }

  // theta / V at stored layer `layer`, node j.
  double quotient(int layer, int j) const;

 private:
  std::shared_ptr<const HedgeField> theta_;
  Loading loading_;
  double floor_;
  std::vector<double> quotient_;
};

// Throws std::invalid_argument if |V| < floor on any grid node.
StrategyTransform exp_martingale_transform(std::shared_ptr<const HedgeField> theta, Loading loading,
                                           double floor);

// sum_k (theta/V)(t_k, B_k) * V(t_k, B_k) (B_{k+1} - B_k).
double gains_along(const StrategyTransform& transform, const Path& path, double dt);

}  // namespace knightian
