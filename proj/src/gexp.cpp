#include "knightian/gexp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "knightian/errors.hpp"

namespace knightian {

void VolBounds::validate() const {
  if (!(sigma_lo > 0.0) || !(sigma_hi >= sigma_lo) || !std::isfinite(sigma_hi)) {
    throw std::invalid_argument("volatility bounds must satisfy 0 < sigma_lo <= sigma_hi");
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("horizon must be positive");
  }
}

GridSpec GridSpec::reference(const VolBounds& bounds) {
  GridSpec g;
  const double half_width = 6.0 * bounds.sigma_hi * std::sqrt(bounds.horizon);
  g.x_min = -half_width;
  g.x_max = half_width;
  g.nx = 801;
  g.nt = 2000;
  return g;
}

void GridSpec::validate() const {
  if (!(x_min < 0.0 && 0.0 < x_max)) throw std::invalid_argument("grid must satisfy x_min < 0 < x_max");
  if (nx < 3) throw std::invalid_argument("grid needs nx >= 3");
  if (nt < 1) throw std::invalid_argument("grid needs nt >= 1");
  if (substeps < 0) throw std::invalid_argument("substeps must be >= 0");
}

double GridSpec::cfl_number(const VolBounds& b) const {
  const double h = dx();
  const int m = std::max(substeps, 1);
  return b.sigma_hi * b.sigma_hi * (layer_dt(b) / m) / (h * h);
}

int GridSpec::effective_substeps(const VolBounds& b) const {
  const double h = dx();
  const double ratio = b.sigma_hi * b.sigma_hi * layer_dt(b) / (h * h);
  if (substeps > 0) {
    if (ratio / substeps > 1.0 + 1e-12) {
      throw CflError("CFL violated: sigma_hi^2 dt / dx^2 = " + std::to_string(ratio / substeps) +
                     " > 1 with " + std::to_string(substeps) + " sub-steps");
    }
    return substeps;
  }
  return std::max(1, static_cast<int>(std::ceil(ratio - 1e-12)));
}

void Mode::validate(const VolBounds& bounds) const {
  if (kind_ == Kind::Fixed && !bounds.contains(sigma_)) {
    throw std::invalid_argument("fixed volatility " + std::to_string(sigma_) + " outside bounds [" +
                                std::to_string(bounds.sigma_lo) + ", " +
                                std::to_string(bounds.sigma_hi) + "]");
  }
}

std::string Mode::name() const {
  switch (kind_) {
    case Kind::Upper: return "upper";
    case Kind::Lower: return "lower";
    case Kind::Fixed: return "fixed";
  }
  return "";
}

ValueField::ValueField(std::vector<double> values, GridSpec grid, VolBounds bounds, Mode mode)
    : values_(std::move(values)), grid_(grid), bounds_(bounds), mode_(mode) {
  if (values_.size() != static_cast<std::size_t>(grid_.nt + 1) * grid_.nx) {
    throw std::invalid_argument("value field size does not match grid");
  }
}

int ValueField::layer_index(double t) const {
  if (!(t >= 0.0) || t > bounds_.horizon * (1.0 + 1e-12)) {
    throw std::out_of_range("time " + std::to_string(t) + " outside [0, T]");
  }
  const int i = static_cast<int>(std::floor(t / grid_.layer_dt(bounds_) + 1e-9));
  return std::clamp(i, 0, grid_.nt);
}

double interpolate_nodes(std::span<const double> nodes, const GridSpec& grid, double x) {
  const double h = grid.dx();
  const double s = (x - grid.x_min) / h;
  const double last = grid.nx - 1;
  if (!(s >= -1e-9 && s <= last + 1e-9)) {
    throw std::out_of_range("x = " + std::to_string(x) + " outside grid");
  }
  const double clamped = std::clamp(s, 0.0, last);
  // Queries at grid.x(j) land within rounding of s = j; return the node itself.
  const double nearest = std::round(clamped);
  if (std::abs(clamped - nearest) <= 1e-9) return nodes[static_cast<int>(nearest)];
  int j = static_cast<int>(clamped);
  if (j >= grid.nx - 1) j = grid.nx - 2;
  const double w = clamped - j;
  return nodes[j] + w * (nodes[j + 1] - nodes[j]);
}

double ValueField::interpolate(int layer_i, double x) const {
  return interpolate_nodes(layer(layer_i), grid_, x);
}

double ValueField::conditional_at(double t, double x) const { return interpolate(layer_index(t), x); }

std::vector<double> sample_on_grid(const PayoffExpr& expr, const GridSpec& grid) {
  std::vector<double> out(grid.nx);
  for (int j = 0; j < grid.nx; ++j) out[j] = expr.evaluate(grid.x(j));
  return out;
}

namespace {

// Diffusion coefficients applied to positive and negative second differences.
struct Coefficients {
  double on_convex;
  double on_concave;
};

Coefficients coefficients_for(const Mode& mode, const VolBounds& b) {
  const double lo = 0.5 * b.sigma_lo * b.sigma_lo;
  const double hi = 0.5 * b.sigma_hi * b.sigma_hi;
  switch (mode.kind()) {
    case Mode::Kind::Upper: return {hi, lo};
    case Mode::Kind::Lower: return {lo, hi};
    case Mode::Kind::Fixed: {
      const double s = 0.5 * mode.sigma() * mode.sigma();
      return {s, s};
    }
  }
  return {hi, lo};
}

class BackwardStepper {
 public:
  BackwardStepper(const VolBounds& bounds, const GridSpec& grid, const Mode& mode) {
    bounds.validate();
    grid.validate();
    mode.validate(bounds);
    substeps_ = grid.effective_substeps(bounds);
    const double h = grid.dx();
    const double r = grid.layer_dt(bounds) / substeps_ / (h * h);
    const Coefficients c = coefficients_for(mode, bounds);
    convex_ = r * c.on_convex;
    concave_ = r * c.on_concave;
  }

  // One stored layer back in time, in place.
  void step(std::vector<double>& v, std::vector<double>& scratch) const {
    const std::size_t n = v.size();
    for (int s = 0; s < substeps_; ++s) {
      scratch[0] = v[0];
      scratch[n - 1] = v[n - 1];
      for (std::size_t j = 1; j + 1 < n; ++j) {
        const double d2 = v[j - 1] - 2.0 * v[j] + v[j + 1];
        scratch[j] = v[j] + (d2 > 0.0 ? convex_ : concave_) * d2;
      }
      v.swap(scratch);
    }
  }

 private:
  int substeps_ = 1;
  double convex_ = 0.0;
  double concave_ = 0.0;
};

std::vector<double> checked_terminal(std::span<const double> terminal, const GridSpec& grid) {
  if (terminal.size() != static_cast<std::size_t>(grid.nx)) {
    throw std::invalid_argument("terminal vector has " + std::to_string(terminal.size()) +
                                " values, grid has " + std::to_string(grid.nx));
  }
  return {terminal.begin(), terminal.end()};
}

}  // namespace

ValueField solve_value_field(std::span<const double> terminal, const VolBounds& bounds,
                             const GridSpec& grid, const Mode& mode) {
  const BackwardStepper stepper(bounds, grid, mode);
  std::vector<double> v = checked_terminal(terminal, grid);
  std::vector<double> scratch(v.size());
  const std::size_t nx = v.size();
  std::vector<double> values(static_cast<std::size_t>(grid.nt + 1) * nx);
  std::copy(v.begin(), v.end(), values.begin() + static_cast<std::ptrdiff_t>(grid.nt * nx));
  for (int i = grid.nt - 1; i >= 0; --i) {
    stepper.step(v, scratch);
    std::copy(v.begin(), v.end(), values.begin() + static_cast<std::ptrdiff_t>(i * nx));
  }
  return ValueField(std::move(values), grid, bounds, mode);
}

ValueField solve_value_field(const PayoffExpr& expr, const VolBounds& bounds, const GridSpec& grid,
                             const Mode& mode) {
  grid.validate();
  return solve_value_field(sample_on_grid(expr, grid), bounds, grid, mode);
}

double expectation(std::span<const double> terminal, const VolBounds& bounds, const GridSpec& grid,
                   const Mode& mode) {
  const BackwardStepper stepper(bounds, grid, mode);
  std::vector<double> v = checked_terminal(terminal, grid);
  std::vector<double> scratch(v.size());
  for (int i = 0; i < grid.nt; ++i) stepper.step(v, scratch);
  return interpolate_nodes(v, grid, 0.0);
}

double expectation(const PayoffExpr& expr, const VolBounds& bounds, const GridSpec& grid,
                   const Mode& mode) {
  grid.validate();
  return expectation(sample_on_grid(expr, grid), bounds, grid, mode);
}

FixedPriorPricer::FixedPriorPricer(const VolBounds& bounds, const GridSpec& grid, double sigma)
    : sigma_(sigma) {
  bounds.validate();
  grid.validate();
  Mode::fixed(sigma).validate(bounds);
  const int substeps = grid.effective_substeps(bounds);
  const double h = grid.dx();
  const double c = 0.5 * sigma * sigma * grid.layer_dt(bounds) / substeps / (h * h);
  const std::size_t n = static_cast<std::size_t>(grid.nx);

  // Interpolation functional at x = 0, matching interpolate_nodes.
  std::vector<double> w(n, 0.0);
  {
    const double s = (0.0 - grid.x_min) / h;
    int j = static_cast<int>(s);
    if (j >= grid.nx - 1) j = grid.nx - 2;
    const double frac = s - j;
    w[j] += 1.0 - frac;
    if (frac != 0.0) w[j + 1] += frac;
  }

  // Transpose of the interior stencil; boundary rows of the scheme are identity.
  std::vector<double> next(n);
  const long total = static_cast<long>(grid.nt) * substeps;
  for (long k = 0; k < total; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const bool interior = i > 0 && i + 1 < n;
      double acc = interior ? (1.0 - 2.0 * c) * w[i] : w[i];
      if (i + 1 < n && i + 1 > 0 && i + 2 < n) acc += c * w[i + 1];
      if (i >= 2) acc += c * w[i - 1];
      next[i] = acc;
    }
    w.swap(next);
  }
  weights_ = std::move(w);
}

double FixedPriorPricer::price(std::span<const double> terminal) const {
  if (terminal.size() != weights_.size()) {
    throw std::invalid_argument("terminal vector does not match pricer grid");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < weights_.size(); ++j) sum += weights_[j] * terminal[j];
  return sum;
}

AmbiguityGap mean_ambiguity_gap(std::span<const double> terminal, const VolBounds& bounds,
                                const GridSpec& grid, double tol) {
  AmbiguityGap out;
  out.upper = expectation(terminal, bounds, grid, Mode::upper());
  out.lower = expectation(terminal, bounds, grid, Mode::lower());
  out.gap = out.upper - out.lower;
  out.mean_af = out.gap <= tol;
  return out;
}

AmbiguityGap mean_ambiguity_gap(const PayoffExpr& expr, const VolBounds& bounds, const GridSpec& grid,
                                double tol) {
  grid.validate();
  return mean_ambiguity_gap(sample_on_grid(expr, grid), bounds, grid, tol);
}

StrongAmbiguityReport strong_ambiguity_probe(const PayoffExpr& expr, const VolBounds& bounds,
                                             const GridSpec& grid, std::span<const double> thresholds,
                                             double ramp_width, double tol) {
  if (thresholds.empty()) throw std::invalid_argument("probe needs at least one threshold");
  if (!(ramp_width > 0.0)) throw std::invalid_argument("ramp width must be positive");
  StrongAmbiguityReport report;
  report.ramp_width = ramp_width;
  report.tol = tol;
  for (double a : thresholds) {
    ThresholdGap entry;
    entry.threshold = a;
    entry.gap = mean_ambiguity_gap(ramp(expr, a, ramp_width), bounds, grid, tol);
    report.rejected = report.rejected || !entry.gap.mean_af;
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace knightian
