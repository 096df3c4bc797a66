#pragma once

#include <span>
#include <string>
#include <vector>

#include "knightian/payoff.hpp"

namespace knightian {

// Volatility interval [sigma_lo, sigma_hi] over the horizon [0, T].
struct VolBounds {
  double sigma_lo = 1.0;
  double sigma_hi = 1.0;
  double horizon = 1.0;

  // Throws std::invalid_argument unless 0 < sigma_lo <= sigma_hi and horizon > 0.
  void validate() const;

  bool contains(double sigma) const { return sigma >= sigma_lo && sigma <= sigma_hi; }
  bool degenerate() const { return sigma_lo == sigma_hi; }

  // G(a) = 1/2 sup_{sigma in bounds} sigma^2 a.
  double G(double a) const {
    return a >= 0.0 ? 0.5 * sigma_hi * sigma_hi * a : 0.5 * sigma_lo * sigma_lo * a;
  }
};

/**
 * Space-time grid for the backward solver.
 *
 * nt is the number of stored time layers after the terminal one. The explicit
 * scheme needs sigma_hi^2 * dt / dx^2 <= 1; each stored step is split into
 * `substeps` equal sub-steps to meet it. substeps == 0 picks the smallest
 * count that does, a positive value is taken as given and checked.
 */
struct GridSpec {
  double x_min = -6.0;
  double x_max = 6.0;
  int nx = 801;
  int nt = 2000;
  int substeps = 0;

  // 801 x 2000 on [-6 sigma_hi sqrt(T), 6 sigma_hi sqrt(T)].
  static GridSpec reference(const VolBounds& bounds);

  // Throws std::invalid_argument on shape errors.
  void validate() const;

  double dx() const { return (x_max - x_min) / (nx - 1); }
  double x(int j) const { return x_min + j * dx(); }
  double layer_dt(const VolBounds& b) const { return b.horizon / nt; }

  // Sub-steps per stored step; throws CflError if an explicit count is unstable.
  int effective_substeps(const VolBounds& b) const;
  double cfl_number(const VolBounds& b) const;
};

class Mode {
 public:
  enum class Kind { Upper, Lower, Fixed };

  static Mode upper() { return Mode(Kind::Upper, 0.0); }
  static Mode lower() { return Mode(Kind::Lower, 0.0); }
  static Mode fixed(double sigma) { return Mode(Kind::Fixed, sigma); }

  Kind kind() const { return kind_; }
  double sigma() const { return sigma_; }

  // Throws std::invalid_argument if a Fixed sigma lies outside bounds.
  void validate(const VolBounds& bounds) const;
  std::string name() const;

 private:
  Mode(Kind kind, double sigma) : kind_(kind), sigma_(sigma) {}
  Kind kind_;
  double sigma_;
};

// v(t_i, x_j) on the stored layers; layer nt is the terminal payoff.
class ValueField {
 public:
  ValueField(std::vector<double> values, GridSpec grid, VolBounds bounds, Mode mode);

  const GridSpec& grid() const { return grid_; }
  const VolBounds& bounds() const { return bounds_; }
  const Mode& mode() const { return mode_; }

  int layers() const { return grid_.nt + 1; }
  double at(int layer, int j) const { return values_[static_cast<std::size_t>(layer) * grid_.nx + j]; }
  std::span<const double> layer(int i) const {
    return {values_.data() + static_cast<std::size_t>(i) * grid_.nx, static_cast<std::size_t>(grid_.nx)};
  }

  // Largest stored layer with t_i <= t.
  int layer_index(double t) const;
  double time(int layer) const { return layer * grid_.layer_dt(bounds_); }

  // Linear interpolation in x on a stored layer. Throws std::out_of_range off-grid.
  double interpolate(int layer, double x) const;

  // v(t, x) at the nearest layer <= t.
  double conditional_at(double t, double x) const;

  // v(0, 0).
  double origin() const { return interpolate(0, 0.0); }

 private:
  std::vector<double> values_;
  GridSpec grid_;
  VolBounds bounds_;
  Mode mode_;
};

// phi sampled on the grid nodes; throws DomainError if phi is undefined there.
std::vector<double> sample_on_grid(const PayoffExpr& expr, const GridSpec& grid);

// Linear interpolation of node values at x; throws std::out_of_range off-grid.
double interpolate_nodes(std::span<const double> nodes, const GridSpec& grid, double x);

// Backward explicit monotone scheme for v_t + H(v_xx) = 0, v(T) = phi, with
// H = G (Upper), -G(-.) (Lower) or sigma^2/2 (Fixed). Boundary nodes carry
// v_xx = 0 and therefore keep their terminal value.
ValueField solve_value_field(const PayoffExpr& expr, const VolBounds& bounds, const GridSpec& grid,
                             const Mode& mode);
ValueField solve_value_field(std::span<const double> terminal, const VolBounds& bounds,
                             const GridSpec& grid, const Mode& mode);

// v(0, 0) without storing intermediate layers.
double expectation(const PayoffExpr& expr, const VolBounds& bounds, const GridSpec& grid,
                   const Mode& mode);
double expectation(std::span<const double> terminal, const VolBounds& bounds, const GridSpec& grid,
                   const Mode& mode);

/**
 * The Fixed(sigma) expectation is linear in the terminal values, so it is a
 * dot product with a weight vector. The weights come from running the
 * transpose of the backward scheme forward from the origin, which makes
 * price() agree with expectation(terminal, ..., Mode::fixed(sigma)) up to
 * rounding while costing O(nx) per call.
 */
class FixedPriorPricer {
 public:
  FixedPriorPricer(const VolBounds& bounds, const GridSpec& grid, double sigma);

  double price(std::span<const double> terminal) const;
  std::span<const double> weights() const { return weights_; }
  double sigma() const { return sigma_; }

 private:
  std::vector<double> weights_;
  double sigma_;
};

inline constexpr double kDefaultMeanAfTolerance = 1e-3;

struct AmbiguityGap {
  double upper = 0.0;
  double lower = 0.0;
  double gap = 0.0;
  bool mean_af = false;
};

// Upper minus lower expectation; mean_af iff gap <= tol.
AmbiguityGap mean_ambiguity_gap(const PayoffExpr& expr, const VolBounds& bounds, const GridSpec& grid,
                                double tol = kDefaultMeanAfTolerance);
AmbiguityGap mean_ambiguity_gap(std::span<const double> terminal, const VolBounds& bounds,
                                const GridSpec& grid, double tol = kDefaultMeanAfTolerance);

struct ThresholdGap {
  double threshold = 0.0;
  AmbiguityGap gap;
};

struct StrongAmbiguityReport {
  std::vector<ThresholdGap> entries;
  double ramp_width = 0.0;
  double tol = 0.0;
  // False means every ramp transform was mean ambiguity-free ("not rejected").
  bool rejected = false;

  std::string verdict() const { return rejected ? "strong-AF rejected" : "strong-AF not rejected"; }
};

// Necessary-condition probe: gaps of clamp((phi - a) / h, 0, 1) for each threshold a.
StrongAmbiguityReport strong_ambiguity_probe(const PayoffExpr& expr, const VolBounds& bounds,
                                             const GridSpec& grid, std::span<const double> thresholds,
                                             double ramp_width, double tol = kDefaultMeanAfTolerance);

}  // namespace knightian
