#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "knightian/equilibrium.hpp"
#include "knightian/gexp.hpp"
#include "knightian/implementability.hpp"
#include "knightian/payoff.hpp"
#include "support/random_payoffs.hpp"

using namespace knightian;
using support::capped_exp_closed_form;

namespace {

const VolBounds kBand{0.5, 1.0, 1.0};

Agent log_agent(const std::string& name, const std::string& endowment) {
  return Agent{name, Utility::log(), parse(endowment)};
}

Economy capped_exp_economy(const VolBounds& b = kBand, GridSpec grid = GridSpec::reference(kBand)) {
  return Economy({log_agent("a1", "min(exp(x),1)"), log_agent("a2", "1 - min(exp(x),1)")}, b, grid);
}

GridSpec small_grid() {
  GridSpec g = GridSpec::reference(kBand);
  g.nx = 161;
  g.nt = 200;
  return g;
}

}  // namespace

TEST(NetTrades, CappedExpEconomy) {
  const Economy ex = capped_exp_economy();
  const EquilibriumResult eq = solve_equilibrium(ex, PriorSpec{1.0});
  const NetTradeSet xi = net_trades(eq, ex);
  const double c1 = capped_exp_closed_form(1.0);
  const GridSpec& g = ex.grid();
  for (int j = 0; j < g.nx; ++j) {
    const double e1 = std::min(std::exp(g.x(j)), 1.0);
    ASSERT_NEAR(xi.trades[0][j], c1 - e1, 1e-4);
    ASSERT_NEAR(xi.trades[1][j], -xi.trades[0][j], 1e-12);
  }
  EXPECT_LE(xi.clearing_error(), 1e-10);
}

TEST(NetTrades, IdenticalAgentsDoNotTrade) {
  const Economy ec({log_agent("a", "0.5"), log_agent("b", "0.5")}, kBand, small_grid());
  const NetTradeSet xi = net_trades(solve_equilibrium(ec, PriorSpec{0.7}), ec);
  for (const auto& row : xi.trades) {
    for (double v : row) EXPECT_NEAR(v, 0.0, 1e-12);
  }
}

TEST(NetTrades, SingleAgentDoesNotTrade) {
  const Economy ec({log_agent("solo", "2")}, kBand, small_grid());
  const NetTradeSet xi = net_trades(solve_equilibrium(ec, PriorSpec{1.0}), ec);
  for (double v : xi.trades[0]) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(NetTrades, ShapeMismatchRejected) {
  const Economy ex = capped_exp_economy(kBand, small_grid());
  EquilibriumResult eq = solve_equilibrium(ex, PriorSpec{1.0});
  eq.psi.pop_back();
  EXPECT_THROW(net_trades(eq, ex), std::invalid_argument);
  eq = solve_equilibrium(ex, PriorSpec{1.0});
  eq.allocations.pop_back();
  EXPECT_THROW(net_trades(eq, ex), std::invalid_argument);
}

TEST(Implementability, CappedExpIsNotImplementable) {
  const Economy ex = capped_exp_economy();
  const ImplementabilityVerdict v = check_implementability(solve_equilibrium(ex, PriorSpec{1.0}), ex);
  EXPECT_FALSE(v.implementable);
  ASSERT_EQ(v.agents.size(), 2u);
  EXPECT_EQ(v.agents[0].name, "a1");
  EXPECT_GE(v.agents[0].gap.gap, capped_exp_closed_form(0.5) - capped_exp_closed_form(1.0));
  EXPECT_GE(v.agents[0].gap.gap, 0.088);
  EXPECT_FALSE(v.agents[0].gap.mean_af);
  EXPECT_EQ(v.tol, kDefaultMeanAfTolerance);
  EXPECT_EQ(v.max_gap(), std::max(v.agents[0].gap.gap, v.agents[1].gap.gap));
}

TEST(Implementability, ConstantSplitIsImplementable) {
  const Economy ec({log_agent("a1", "0.5"), log_agent("a2", "0.5")}, kBand, small_grid());
  const ImplementabilityVerdict v = check_implementability(solve_equilibrium(ec, PriorSpec{1.0}), ec);
  EXPECT_TRUE(v.implementable);
  for (const auto& a : v.agents) EXPECT_NEAR(a.gap.gap, 0.0, 1e-12);
}

TEST(Implementability, LinearSplitIsImplementable) {
  // Net trades are affine in x, hence symmetric martingales.
  const Economy ec({log_agent("a1", "0.5 + 0.01*x"), log_agent("a2", "0.5 - 0.01*x")}, kBand,
                   GridSpec::reference(kBand));
  const ImplementabilityVerdict v = check_implementability(solve_equilibrium(ec, PriorSpec{0.5}), ec);
  EXPECT_TRUE(v.implementable);
  EXPECT_LE(v.max_gap(), 1e-10);
}

TEST(Implementability, DegenerateBoundsAlwaysImplementable) {
  const VolBounds b{0.7, 0.7, 1.0};
  const Economy ex = capped_exp_economy(b, GridSpec::reference(b));
  const ImplementabilityVerdict v = check_implementability(solve_equilibrium(ex, PriorSpec{0.7}), ex);
  EXPECT_TRUE(v.implementable);
  EXPECT_LE(v.max_gap(), 1e-10);
}

TEST(Implementability, RawClaimMode) {
  EXPECT_TRUE(check_claim(parse("x"), kBand, GridSpec::reference(kBand)).mean_af);
  EXPECT_FALSE(check_claim(parse("min(exp(x),1)"), kBand, GridSpec::reference(kBand)).mean_af);
}

TEST(Implementability, TwoAgentSymmetry) {
  for (const char* split : {"min(exp(x),1)", "0.5 + 0.3*tanh(x)", "0.5 + 0.4*exp(-x^2) - 0.2"}) {
    const Economy ec({log_agent("a1", split), log_agent("a2", std::string("1 - (") + split + ")")}, kBand,
                     small_grid());
    const EquilibriumResult eq = solve_equilibrium(ec, PriorSpec{0.8});
    const ImplementabilityVerdict v = check_implementability(eq, ec);
    EXPECT_NEAR(v.agents[0].gap.gap, v.agents[1].gap.gap, 1e-9) << split;
    EXPECT_NEAR(v.agents[0].gap.upper, -v.agents[1].gap.lower, 1e-9) << split;
  }
}

TEST(Implementability, VerdictMonotoneInTolerance) {
  const Economy ec({log_agent("a1", "0.5 + 0.05*tanh(x)"), log_agent("a2", "0.5 - 0.05*tanh(x)")}, kBand,
                   small_grid());
  const EquilibriumResult eq = solve_equilibrium(ec, PriorSpec{1.0});
  bool seen_true = false;
  for (double tol : {0.0, 1e-6, 1e-4, 1e-3, 5e-3, 1e-2, 0.1, 1.0}) {
    const bool ok = check_implementability(eq, ec, tol).implementable;
    if (seen_true) EXPECT_TRUE(ok) << tol;
    seen_true = seen_true || ok;
  }
  EXPECT_TRUE(seen_true);
}

TEST(Implementability, GapNeverBelowMinusTolerance) {
  support::RandomPayoffs gen(3);
  for (int i = 0; i < 8; ++i) {
    const PayoffExpr g = gen.total(3);
    const PayoffExpr split = parse("0.5") + PayoffExpr::literal(0.2) * PayoffExpr::unary(PayoffExpr::Kind::Tanh, g);
    const Economy ec({Agent{"a1", Utility::log(), split}, Agent{"a2", Utility::log(), parse("1") - split}}, kBand,
                     small_grid());
    const ImplementabilityVerdict v = check_implementability(solve_equilibrium(ec, PriorSpec{0.6}), ec);
    for (const auto& a : v.agents) {
      EXPECT_GE(a.gap.gap, -v.tol);
      EXPECT_EQ(a.gap.mean_af, a.gap.gap <= v.tol);
    }
  }
}

TEST(Wilson, MatchesReferenceValues) {
  const struct {
    std::size_t k, n;
    double lo, hi;
  } cases[] = {
      {190, 200, 0.9104218518612239, 0.972617354399236},
      {0, 10, 0.0, 0.27753279986288926},
      {200, 200, 0.9811546736227335, 1.0},
      {1, 1, 0.2065493143772374, 1.0},
      {7, 13, 0.29143795714506004, 0.7679393219046169},
  };
  for (const auto& c : cases) {
    const auto [lo, hi] = wilson_interval(c.k, c.n);
    EXPECT_NEAR(lo, c.lo, 1e-12) << c.k << "/" << c.n;
    EXPECT_NEAR(hi, c.hi, 1e-12) << c.k << "/" << c.n;
  }
}

TEST(SampleSeed, DistinctAndStable) {
  EXPECT_EQ(sample_seed(42, 0), sample_seed(42, 0));
  EXPECT_NE(sample_seed(42, 0), sample_seed(42, 1));
  EXPECT_NE(sample_seed(42, 0), sample_seed(43, 0));
}

TEST(Probe, ZeroAmplitudeNeverFails) {
  const Economy ec({log_agent("a1", "0.5"), log_agent("a2", "0.5")}, kBand, small_grid());
  ProbeOptions opt;
  opt.samples = 10;
  opt.amplitude = 0.0;
  const ProbeReport r = genericity_probe(ec, opt);
  EXPECT_EQ(r.fraction, 0.0);
  EXPECT_EQ(r.failing, 0u);
  EXPECT_EQ(r.solved, 10u);
  EXPECT_EQ(r.errors, 0u);
}

TEST(Probe, ForcedCappedExpSplitFails) {
  const Economy ec({log_agent("a1", "0.5"), log_agent("a2", "0.5")}, kBand, GridSpec::reference(kBand));
  ProbeOptions opt;
  opt.samples = 1;
  opt.amplitude = 0.0;
  opt.base_split = parse("min(exp(x),1)");
  opt.epsilon = 0.0;
  const ProbeReport r = genericity_probe(ec, opt);
  EXPECT_EQ(r.fraction, 1.0);
  EXPECT_GE(r.samples[0].gap_max, 0.088);
}

TEST(Probe, SmallSampleMostlyFails) {
  const Economy ec({log_agent("a1", "0.5"), log_agent("a2", "0.5")}, kBand, small_grid());
  ProbeOptions opt;
  opt.samples = 20;
  const ProbeReport r = genericity_probe(ec, opt);
  EXPECT_EQ(r.samples.size(), 20u);
  EXPECT_EQ(r.solved + r.errors, 20u);
  EXPECT_GE(r.fraction, 0.9);
  EXPECT_LE(r.wilson_lo, r.fraction);
  EXPECT_GE(r.wilson_hi, r.fraction);
  for (const auto& s : r.samples) {
    EXPECT_GE(s.width, 0.25);
    EXPECT_LE(s.width, 1.0);
    EXPECT_LE(std::abs(s.center), 1.0);
    EXPECT_TRUE(s.sign == 1.0 || s.sign == -1.0);
  }
}

TEST(Probe, RampFamilyRuns) {
  const Economy ec({log_agent("a1", "0.5"), log_agent("a2", "0.5")}, kBand, small_grid());
  ProbeOptions opt;
  opt.samples = 5;
  opt.family = PerturbationFamily::Ramp;
  const ProbeReport r = genericity_probe(ec, opt);
  EXPECT_EQ(r.solved, 5u);
  EXPECT_GE(r.fraction, 0.0);
  EXPECT_LE(r.fraction, 1.0);
}

TEST(Probe, DeterministicGivenSeed) {
  const Economy ec({log_agent("a1", "0.5"), log_agent("a2", "0.5")}, kBand, small_grid());
  ProbeOptions opt;
  opt.samples = 8;
  const ProbeReport a = genericity_probe(ec, opt);
  const ProbeReport b = genericity_probe(ec, opt);
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    EXPECT_EQ(a.samples[k].seed, b.samples[k].seed);
    EXPECT_EQ(a.samples[k].center, b.samples[k].center);
    EXPECT_EQ(a.samples[k].gap_max, b.samples[k].gap_max);
  }
  opt.seed = 7;
  const ProbeReport c = genericity_probe(ec, opt);
  EXPECT_NE(a.samples[0].center, c.samples[0].center);
}

TEST(Probe, InvalidRequests) {
  const Economy ec({log_agent("a1", "0.5"), log_agent("a2", "0.5")}, kBand, small_grid());
  ProbeOptions opt;
  opt.samples = 0;
  EXPECT_THROW(genericity_probe(ec, opt), std::invalid_argument);
  opt.samples = 1;
  const Economy solo({log_agent("a1", "1")}, kBand, small_grid());
  EXPECT_THROW(genericity_probe(solo, opt), std::invalid_argument);
  const Economy risky({log_agent("a1", "1 + tanh(x)/2"), log_agent("a2", "1")}, kBand, small_grid());
  EXPECT_THROW(genericity_probe(risky, opt), std::invalid_argument);
}
