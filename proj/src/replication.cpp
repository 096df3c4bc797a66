#include "knightian/replication.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "knightian/implementability.hpp"

namespace knightian {

HedgeField::HedgeField(ValueField upper) : value_(std::make_shared<const ValueField>(std::move(upper))) {
  const GridSpec& g = value_->grid();
  const std::size_t nx = static_cast<std::size_t>(g.nx);
  const double h = g.dx();
  eta_.resize(static_cast<std::size_t>(value_->layers()) * nx);
  phi_hat_.resize(eta_.size());
  for (int i = 0; i < value_->layers(); ++i) {
    const auto v = value_->layer(i);
    double* eta = eta_.data() + static_cast<std::size_t>(i) * nx;
    double* curv = phi_hat_.data() + static_cast<std::size_t>(i) * nx;
    // Second differences at the rounding level of the layer are treated as
    // zero, so linear value fields carry no compensator.
    double scale = 0.0;
    for (double x : v) scale = std::max(scale, std::abs(x));
    const double noise = 16.0 * std::numeric_limits<double>::epsilon() * scale;
    for (std::size_t j = 1; j + 1 < nx; ++j) {
      eta[j] = (v[j + 1] - v[j - 1]) / (2.0 * h);
      const double d2 = v[j + 1] - 2.0 * v[j] + v[j - 1];
      curv[j] = std::abs(d2) <= noise ? 0.0 : 0.5 * d2 / (h * h);
    }
    eta[0] = eta[1];
    eta[nx - 1] = eta[nx - 2];
    curv[0] = curv[1];
    curv[nx - 1] = curv[nx - 2];
  }
}

std::span<const double> HedgeField::eta_layer(int layer) const {
  const std::size_t nx = static_cast<std::size_t>(grid().nx);
  return {eta_.data() + static_cast<std::size_t>(layer) * nx, nx};
}

std::span<const double> HedgeField::phi_hat_layer(int layer) const {
  const std::size_t nx = static_cast<std::size_t>(grid().nx);
  return {phi_hat_.data() + static_cast<std::size_t>(layer) * nx, nx};
}

double HedgeField::eta_at(double t, double x) const {
  return interpolate_nodes(eta_layer(value_->layer_index(t)), grid(), x);
}

double HedgeField::phi_hat_at(double t, double x) const {
  return interpolate_nodes(phi_hat_layer(value_->layer_index(t)), grid(), x);
}

HedgeField hedge_field(std::span<const double> terminal, const VolBounds& bounds, const GridSpec& grid) {
  return HedgeField(solve_value_field(terminal, bounds, grid, Mode::upper()));
}

HedgeField hedge_field(const PayoffExpr& expr, const VolBounds& bounds, const GridSpec& grid) {
  return HedgeField(solve_value_field(expr, bounds, grid, Mode::upper()));
}

ControlSpec ControlSpec::constant(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("control volatility must be positive");
  ControlSpec c;
  c.sigma_ = sigma;
  return c;
}

ControlSpec ControlSpec::extremal(std::shared_ptr<const HedgeField> field) {
  if (!field) throw std::invalid_argument("extremal control needs a hedge field");
  ControlSpec c;
  c.field_ = std::move(field);
  return c;
}

double ControlSpec::sigma_at(double t, double x, const VolBounds& bounds) const {
  if (!field_) return sigma_;
  return field_->phi_hat_at(t, x) >= 0.0 ? bounds.sigma_hi : bounds.sigma_lo;
}

PathBatch::PathBatch(ControlSpec control, VolBounds bounds, std::size_t n_paths, int n_steps,
                     std::uint64_t seed, IncrementKind kind)
    : control_(std::move(control)), bounds_(bounds), n_paths_(n_paths), n_steps_(n_steps), seed_(seed),
      kind_(kind) {
  bounds_.validate();
  if (n_paths_ < 1 || n_steps_ < 1) throw std::invalid_argument("need at least one path and one step");
  if (!control_.is_extremal() && !bounds_.contains(control_.constant_sigma())) {
    throw std::invalid_argument("control volatility outside bounds");
  }
}

Path PathBatch::path(std::size_t i) const {
  if (i >= n_paths_) throw std::out_of_range("path index out of range");
  std::mt19937_64 rng(sample_seed(seed_, i));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double h = dt();
  const double root_dt = std::sqrt(h);

  Path p;
  p.b.assign(static_cast<std::size_t>(n_steps_) + 1, 0.0);
  p.sigma.assign(static_cast<std::size_t>(n_steps_), 0.0);
  for (int k = 0; k < n_steps_; ++k) {
    const double x = p.b[k];
    double sigma = control_.constant_sigma();
    if (control_.is_extremal()) {
      // Off the control grid the control is undefined; the path is flagged
      // and later excluded from replication statistics.
      try {
        sigma = p.exited ? bounds_.sigma_hi : control_.sigma_at(k * h, x, bounds_);
      } catch (const std::out_of_range&) {
        p.exited = true;
        sigma = bounds_.sigma_hi;
      }
    }
    const double z = kind_ == IncrementKind::Binary ? ((rng() >> 63) ? 1.0 : -1.0) : normal(rng);
    p.sigma[k] = sigma;
    p.b[k + 1] = x + sigma * root_dt * z;
  }
  return p;
}

PathBatch simulate_paths(const ControlSpec& control, const VolBounds& bounds, std::size_t n_paths,
                         int n_steps, std::uint64_t seed, IncrementKind kind) {
  return PathBatch(control, bounds, n_paths, n_steps, seed, kind);
}

namespace {

class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
    min_ = n_ == 1 ? x : std::min(min_, x);
    max_ = n_ == 1 ? x : std::max(max_, x);
  }

  SampleStats finish() const {
    SampleStats s;
    if (n_ == 0) return s;
    s.mean = mean_;
    s.stdev = n_ > 1 ? std::sqrt(m2_ / static_cast<double>(n_ - 1)) : 0.0;
    s.stderr_mean = s.stdev / std::sqrt(static_cast<double>(n_));
    s.min = min_;
    s.max = max_;
    return s;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double min_ = 0.0;
  double max_ = 0.0;
};

bool inside(const HedgeField& hedge, const Path& path) {
  if (path.exited) return false;
  for (double x : path.b) {
    if (!hedge.contains(x)) return false;
  }
  return true;
}

// K increment over one step: [G(v_xx) - sigma^2 v_xx / 2] dt with v_xx = 2 phi_hat.
double compensator_increment(const VolBounds& b, double phi_hat, double sigma, double dt) {
  const double top = phi_hat >= 0.0 ? b.sigma_hi : b.sigma_lo;
  return (top * top - sigma * sigma) * phi_hat * dt;
}

void check_compatible(const HedgeField& hedge, const PathBatch& paths) {
  const VolBounds& a = hedge.bounds();
  const VolBounds& b = paths.bounds();
  if (a.sigma_lo != b.sigma_lo || a.sigma_hi != b.sigma_hi || a.horizon != b.horizon) {
    throw std::invalid_argument("hedge field and paths use different volatility bounds");
  }
}

}  // namespace

std::vector<double> compensator_path(const HedgeField& hedge, const Path& path, double dt) {
  std::vector<double> k(path.b.size(), 0.0);
  for (std::size_t s = 0; s + 1 < path.b.size(); ++s) {
    const double t = static_cast<double>(s) * dt;
    k[s + 1] = k[s] + compensator_increment(hedge.bounds(), hedge.phi_hat_at(t, path.b[s]), path.sigma[s], dt);
  }
  return k;
}

double gains_along(const HedgeField& hedge, const Path& path, double dt) {
  double gains = 0.0;
  for (std::size_t s = 0; s + 1 < path.b.size(); ++s) {
    const double t = static_cast<double>(s) * dt;
    gains += hedge.eta_at(t, path.b[s]) * (path.b[s + 1] - path.b[s]);
  }
  return gains;
}

ReplicationReport replicate(const TerminalClaim& claim, const HedgeField& hedge, const PathBatch& paths,
                            double upper_expectation) {
  check_compatible(hedge, paths);
  const VolBounds& bounds = hedge.bounds();
  const double dt = paths.dt();

  ReplicationReport report;
  report.upper_expectation = upper_expectation;
  report.steps = paths.steps();
  report.seed = paths.seed();
  RunningStats gap_stats, residual_stats, k_stats, gains_stats;

  for (std::size_t i = 0; i < paths.size(); ++i) {
    const Path p = paths.path(i);
    if (!inside(hedge, p)) {
      ++report.paths_excluded;
      continue;
    }
    double gains = 0.0;
    double k_total = 0.0;
    for (int s = 0; s < paths.steps(); ++s) {
      const double t = s * dt;
      const double x = p.b[s];
      const int layer = hedge.value().layer_index(t);
      const double eta = interpolate_nodes(hedge.eta_layer(layer), hedge.grid(), x);
      const double curv = interpolate_nodes(hedge.phi_hat_layer(layer), hedge.grid(), x);
      gains += eta * (p.b[s + 1] - x);
      const double dk = compensator_increment(bounds, curv, p.sigma[s], dt);
      if (dk < 0.0) ++report.k_decreasing_steps;
      k_total += dk;
    }
    const double terminal = claim(p.b.back());
    const double hedge_gap = upper_expectation + gains - terminal;
    gap_stats.add(hedge_gap);
    residual_stats.add(hedge_gap - k_total);
    k_stats.add(k_total);
    gains_stats.add(gains);
    ++report.paths_used;
  }
  report.hedge_gap = gap_stats.finish();
  report.residual = residual_stats.finish();
  report.compensator = k_stats.finish();
  report.gains = gains_stats.finish();
  return report;
}

ReplicationReport replicate(const PayoffExpr& expr, const HedgeField& hedge, const PathBatch& paths,
                            double upper_expectation) {
  return replicate([&expr](double x) { return expr.evaluate(x); }, hedge, paths, upper_expectation);
}

StrategyTransform::StrategyTransform(std::shared_ptr<const HedgeField> theta, Loading loading, double floor)
    : theta_(std::move(theta)), loading_(std::move(loading)), floor_(floor) {
  if (!theta_) throw std::invalid_argument("strategy transform needs a hedge field");
  if (!(floor_ > 0.0)) throw std::invalid_argument("loading floor must be positive");
  const ValueField& field = theta_->value();
  const GridSpec& g = field.grid();
  quotient_.resize(static_cast<std::size_t>(field.layers()) * g.nx);
  for (int i = 0; i < field.layers(); ++i) {
    const double t = field.time(i);
    const auto eta = theta_->eta_layer(i);
    for (int j = 0; j < g.nx; ++j) {
      const double v = loading_(t, g.x(j));
      if (!(std::abs(v) >= floor_)) {
        throw std::invalid_argument("loading |V| = " + std::to_string(v) + " below floor at t = " +
                                    std::to_string(t) + ", x = " + std::to_string(g.x(j)));
      }
      quotient_[static_cast<std::size_t>(i) * g.nx + j] = eta[j] / v;
    }
  }
}

double StrategyTransform::loading_at(double t, double x) const {
  const double v = loading_(t, x);
  if (!(std::abs(v) >= floor_)) throw std::invalid_argument("loading below floor along path");
  return v;
}

double StrategyTransform::strategy_at(double t, double x) const {
  return theta_->eta_at(t, x) / loading_at(t, x);
}

double StrategyTransform::quotient(int layer, int j) const {
  return quotient_[static_cast<std::size_t>(layer) * theta_->grid().nx + j];
}

StrategyTransform exp_martingale_transform(std::shared_ptr<const HedgeField> theta, Loading loading,
                                           double floor) {
  return StrategyTransform(std::move(theta), std::move(loading), floor);
}

double gains_along(const StrategyTransform& transform, const Path& path, double dt) {
  double gains = 0.0;
  for (std::size_t s = 0; s + 1 < path.b.size(); ++s) {
    const double t = static_cast<double>(s) * dt;
    const double v = transform.loading_at(t, path.b[s]);
    const double dm = v * (path.b[s + 1] - path.b[s]);
    gains += transform.strategy_at(t, path.b[s]) * dm;
  }
  return gains;
}

}  // namespace knightian
