// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "knightian/cli.hpp"
#include "knightian/equilibrium.hpp"
#include "knightian/gexp.hpp"
#include "knightian/implementability.hpp"
#include "knightian/payoff.hpp"
#include "knightian/replication.hpp"
#include "knightian/tree.hpp"
#include "support/random_payoffs.hpp"

using namespace knightian;
namespace fs = std::filesystem;

namespace {

const char* const kCappedExp = "min(exp(x),1)";
const VolBounds kBand{0.5, 1.0, 1.0};

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) ok = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (cond ? "" : " [x]");
  }
};

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Economy capped_exp_economy() {
  std::vector<Agent> agents{{"a1", Utility::log(), parse(kCappedExp)}, {"a2", Utility::log(), parse("1 - " + std::string(kCappedExp))}};
  return Economy(std::move(agents), kBand, GridSpec::reference(kBand));
}

Check closed_form() {
  Check c;
  const double want1 = support::capped_exp_closed_form(1.0);
  const double want05 = support::capped_exp_closed_form(0.5);
  const PayoffExpr phi = parse(kCappedExp);

  const VolBounds unit{1.0, 1.0, 1.0};
  auto t0 = std::chrono::steady_clock::now();
  const double got1 = expectation(phi, unit, GridSpec::reference(unit), Mode::fixed(1.0));
  const double dt1 = seconds_since(t0);
  c.require(std::abs(got1 - want1) <= 5e-3, fmt("sigma=1: %.6f vs %.6f", got1, want1));
  c.require(dt1 < 10.0, fmt("%.2fs", dt1));

  // Fixed(0.5) must lie inside the bounds, so this run uses [0.5, 1].
  t0 = std::chrono::steady_clock::now();
  const double got05 = expectation(phi, kBand, GridSpec::reference(kBand), Mode::fixed(0.5));
  const double dt05 = seconds_since(t0);
  c.require(std::abs(got05 - want05) <= 5e-3, fmt("sigma=0.5: %.6f vs %.6f", got05, want05));
  c.require(dt05 < 10.0, fmt("%.2fs", dt05));
  return c;
}

Check non_implementability() {
  Check c;
  const Economy ec = capped_exp_economy();
  const EquilibriumResult eq = solve_equilibrium(ec, PriorSpec{1.0});
  const ImplementabilityVerdict v = check_implementability(eq, ec);
  c.require(!v.implementable, std::string("IMPLEMENTABLE: ") + (v.implementable ? "yes" : "no"));
  const double gap = v.agents.at(0).gap.gap;
  c.require(gap >= 0.088 - 1e-2, fmt("agent-1 gap %.6f", gap));
  return c;
}

Check indeterminacy() {
  Check c;
  const Economy ec = capped_exp_economy();
  const EquilibriumResult hi = solve_equilibrium(ec, PriorSpec{1.0});
  const EquilibriumResult lo = solve_equilibrium(ec, PriorSpec{0.5});
  const double diff = std::abs(lo.allocations[0].front() - hi.allocations[0].front());
  c.require(std::abs(diff - 0.088) <= 0.01, fmt("|c1(0.5) - c1(1)| = %.6f", diff));
  const double fi_hi = full_insurance_check(hi);
  const double fi_lo = full_insurance_check(lo);
  c.require(fi_hi <= 1e-8, fmt("full insurance %.2e at sigma=1", fi_hi));
  c.require(fi_lo <= 1e-8, fmt("%.2e at sigma=0.5", fi_lo));
  return c;
}

Check tree_axioms() {
  Check c;
  constexpr int n = 8;
  constexpr double tol = 1e-12;
  auto E = [](const TreeLattice::Payoff& f) { return tree_expectation(f, kBand, n, Mode::upper()); };
  support::RandomPayoffs gen(20240601);
  double worst_const = 0.0;
  double worst_mono = 0.0;
  double worst_sub = 0.0;
  double worst_hom = 0.0;
  for (int i = 0; i < 20; ++i) {
    const PayoffExpr X = gen.total(4);
    const PayoffExpr Y = gen.total(4);
    const double ex = E(X);
    const double ey = E(Y);
    const double k = gen.literal();
    worst_const = std::max(worst_const, std::abs(E([k](double) { return k; }) - k));
    const double emax = E(max(X, Y));
    worst_mono = std::max({worst_mono, ex - emax, ey - emax});
    worst_sub = std::max(worst_sub, E(X + Y) - ex - ey);
    for (double lambda : {0.5, 3.0}) {
      worst_hom = std::max(worst_hom, std::abs(E(PayoffExpr::literal(lambda) * X) - lambda * ex) /
                                          std::max(1.0, std::abs(lambda * ex)));
    }
  }
  c.require(worst_const <= tol, fmt("constants %.1e", worst_const));
  c.require(worst_mono <= tol, fmt("monotonicity %.1e", std::max(worst_mono, 0.0)));
  c.require(worst_sub <= tol, fmt("subadditivity %.1e", std::max(worst_sub, 0.0)));
  c.require(worst_hom <= tol, fmt("homogeneity %.1e", worst_hom));

  bool exact = true;
  const TreeLattice lattice(kBand, kBand.horizon / n, Mode::upper());
  for (int i = 0; i < 20 && exact; ++i) {
    const PayoffExpr phi = gen.total(4);
    auto payoff = [&phi](double x) { return phi(x); };
    const double direct = lattice.expect(payoff, n);
    for (int k = 1; k < n; ++k) {
      auto conditional = [&](double x) { return lattice.expect(payoff, n - k, x); };
      exact = exact && lattice.expect(conditional, k) == direct;
    }
  }
  c.require(exact, "iterated expectation exact");
  return c;
}

Check cross_validation() {
  Check c;
  const GridSpec grid = GridSpec::reference(kBand);
  const PayoffExpr phi = parse(kCappedExp);
  const double pde = expectation(phi, kBand, grid, Mode::upper());
  const double tree = tree_expectation(phi, kBand, 12, Mode::upper());
  c.require(std::abs(pde - tree) <= 2e-2, fmt("min(exp(x),1): PDE %.6f tree %.6f", pde, tree));

  const double sq = expectation(parse("x^2"), kBand, grid, Mode::upper());
  const double target = kBand.sigma_hi * kBand.sigma_hi * kBand.horizon;
  c.require(std::abs(sq - target) <= 1e-2 * target, fmt("x^2 upper %.6f vs %.6f", sq, target));

  const VolBounds flat{0.8, 0.8, 1.0};
  const AmbiguityGap g = mean_ambiguity_gap(phi, flat, GridSpec::reference(flat));
  c.require(g.gap < 1e-10, fmt("degenerate gap %.1e", g.gap));
  return c;
}

Check martingale_representation() {
  Check c;
  constexpr std::size_t paths = 100000;
  constexpr int steps = 512;
  constexpr std::uint64_t seed = 42;
  const GridSpec grid = GridSpec::reference(kBand);
  std::size_t decreasing = 0;

  // (a) linear claim
  {
    const PayoffExpr lin = parse("x");
    const HedgeField h = hedge_field(lin, kBand, grid);
    double worst_gap = 0.0;
    double worst_k = 0.0;
    for (double s : {0.5, 1.0}) {
      const PathBatch batch = simulate_paths(ControlSpec::constant(s), kBand, paths, steps, seed);
      const ReplicationReport r = replicate(lin, h, batch, h.value().origin());
      worst_gap = std::max({worst_gap, std::abs(r.hedge_gap.min), std::abs(r.hedge_gap.max)});
      worst_k = std::max({worst_k, std::abs(r.compensator.min), std::abs(r.compensator.max)});
      decreasing += r.k_decreasing_steps;
    }
    c.require(worst_gap <= 1e-12 && worst_k == 0.0, fmt("(a) x: max|gap| %.1e max|K| %.1e", worst_gap, worst_k));
  }

  // (b) compensator identity on min(exp(x),1)
  const PayoffExpr phi = parse(kCappedExp);
  const auto field = std::make_shared<const HedgeField>(hedge_field(phi, kBand, grid));
  const double upper = field->value().origin();
  for (double s : {0.5, 1.0}) {
    const double linear = expectation(phi, kBand, grid, Mode::fixed(s));
    const PathBatch batch = simulate_paths(ControlSpec::constant(s), kBand, paths, steps, seed);
    const ReplicationReport r = replicate(phi, *field, batch, upper);
    const double predicted = upper - linear;
    const double err = std::abs(r.compensator.mean - predicted);
    const double bound = 3.0 * r.compensator.stderr_mean + 5e-3;
    char buf[160];
    std::snprintf(buf, sizeof buf, "(b) sigma=%.1f: mean K_T %.6f predicted %.6f (|d| %.1e <= %.1e)", s,
                  r.compensator.mean, predicted, err, bound);
    c.require(err <= bound, buf);
    decreasing += r.k_decreasing_steps;
  }

  // (d) extremal control
  {
    const PathBatch batch = simulate_paths(ControlSpec::extremal(field), kBand, paths, steps, seed);
    const ReplicationReport r = replicate(phi, *field, batch, upper);
    decreasing += r.k_decreasing_steps;
    c.require(r.compensator.mean <= 5e-3, fmt("(d) extremal mean K_T %.2e", r.compensator.mean));
  }
  c.require(decreasing == 0, fmt("(c) decreasing K steps %.0f", static_cast<double>(decreasing)));
  return c;
}

Check strategy_transform() {
  Check c;
  const double floor = 1e-6;
  const double s2 = kBand.sigma_hi * kBand.sigma_hi;
  const auto theta = std::make_shared<const HedgeField>(hedge_field(parse(kCappedExp), kBand, GridSpec::reference(kBand)));
  const StrategyTransform tr =
      exp_martingale_transform(theta, [=](double t, double x) { return std::max(std::exp(x - 0.5 * s2 * t), floor); }, floor);
  double worst = 0.0;
  for (double s : {0.5, 1.0}) {
    const PathBatch batch = simulate_paths(ControlSpec::constant(s), kBand, 2000, 512, 7);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Path p = batch.path(i);
      worst = std::max(worst, std::abs(gains_along(tr, p, batch.dt()) - gains_along(*theta, p, batch.dt())));
    }
  }
  c.require(worst <= 1e-10, fmt("max path difference %.1e over 4000 paths", worst));
  return c;
}

Check genericity() {
  Check c;
  const Economy ec({{"a1", Utility::log(), parse("0.5")}, {"a2", Utility::log(), parse("0.5")}}, kBand,
                   GridSpec::reference(kBand));
  ProbeOptions opt;
  opt.samples = 200;
  opt.amplitude = 0.1;
  opt.family = PerturbationFamily::Bump;
  const ProbeReport r = genericity_probe(ec, opt);
  char buf[160];
  std::snprintf(buf, sizeof buf, "failing %zu/%zu = %.4f, Wilson 95%% [%.4f, %.4f], errors %zu", r.failing, r.solved,
                r.fraction, r.wilson_lo, r.wilson_hi, r.errors);
  c.require(r.fraction >= 0.95 && r.solved == opt.samples, buf);
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

Check determinism() {
  Check c;
  const fs::path dir = fs::temp_directory_path() / "knightian_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg = dir / "example.json";
  std::ofstream(cfg) << R"J({
  "bounds": {"sigma_lo": 0.5, "sigma_hi": 1.0, "horizon": 1.0},
  "agents": [
    {"name": "a1", "utility": {"kind": "log"}, "endowment": "min(exp(x),1)"},
    {"name": "a2", "utility": {"kind": "log"}, "endowment": "1 - min(exp(x),1)"}
  ],
  "pricing_prior": {"sigma": 1.0}
})J";

  const std::vector<std::vector<std::string>> commands{
      {"eval", kCappedExp, "--tree", "10"},
      {"equilibrium"},
      {"implement"},
      {"replicate", "--agent", "a1", "--prior-sigma", "0.5"},
      {"probe", "--samples", "200"},
  };
  std::string stdout_runs[2];
  for (int run = 0; run < 2; ++run) {
    for (const auto& cmd : commands) {
      std::vector<std::string> args{"--config", cfg.string(), "--out", (dir / "out").string()};
      args.insert(args.end(), cmd.begin(), cmd.end());
      std::ostringstream out, err;
      const int code = cli::run(args, out, err);
      if (code != 0) c.require(false, cmd.front() + " exit " + std::to_string(code));
      stdout_runs[run] += out.str();
    }
    fs::rename(dir / "out", dir / ("run" + std::to_string(run)));
  }
  int identical = 0;
  const char* files[] = {"eval.json", "equilibrium.csv", "implement.csv", "replicate.json", "probe.csv"};
  for (const char* f : files) {
    const std::string a = slurp(dir / "run0" / f);
    if (!a.empty() && a == slurp(dir / "run1" / f)) ++identical;
    else c.require(false, std::string(f) + " differs");
  }
  c.require(identical == 5, fmt("%.0f/5 output files identical", identical));
  c.require(stdout_runs[0] == stdout_runs[1], "stdout identical");
  fs::remove_all(dir);
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"closed-form reproduction", closed_form},
      {"non-implementability", non_implementability},
      {"equilibrium indeterminacy", indeterminacy},
      {"tree axiom suite", tree_axioms},
      {"solver cross-validation", cross_validation},
      {"martingale representation", martingale_representation},
      {"strategy transform", strategy_transform},
      {"genericity probe", genericity},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c = criteria[i].second();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    if (!c.ok) ++failed;
    std::printf("%s %zu %s (%.1fs): %s\n", c.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                seconds_since(t0), c.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
