#include "knightian/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "knightian/config.hpp"
#include "knightian/equilibrium.hpp"
#include "knightian/errors.hpp"
#include "knightian/gexp.hpp"
#include "knightian/implementability.hpp"
#include "knightian/replication.hpp"
#include "knightian/tree.hpp"

namespace knightian::cli {

namespace {

using nlohmann::ordered_json;

std::string num(double v, int digits = 10) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string fixed(double v, int decimals = 6) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  // Drop the sign of values that round to zero.
  if (buf[0] == '-' && std::strspn(buf + 1, "0.") == std::strlen(buf + 1)) return buf + 1;
  return buf;
}

struct Globals {
  std::string config_path;
  std::string out_dir;
  bool quiet = false;
};

// Error carrying the exit code it maps to.
struct Failure {
  int code;
  std::string message;
};

class Session {
 public:
  Session(const Globals& g, std::ostream& out, std::ostream& err) : globals_(g), out_(out), err_(err) {}

  Config config() const {
    if (globals_.config_path.empty()) return parse_config("{}");
    return load_config(globals_.config_path);
  }

  std::ostream& out() { return globals_.quiet ? null_ : out_; }
  std::ostream& err() { return err_; }

  void write_file(const std::string& name, const std::string& contents) {
    if (globals_.out_dir.empty()) return;
    std::filesystem::create_directories(globals_.out_dir);
    const auto path = std::filesystem::path(globals_.out_dir) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Failure{kUsage, "cannot write " + path.string()};
    f << contents;
    out() << "wrote " << path.string() << "\n";
  }

 private:
  Globals globals_;
  std::ostream& out_;
  std::ostream& err_;
  std::ostringstream null_;
};

void print_warnings(Session& s, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) s.err() << "warning: " << w << "\n";
}

EquilibriumResult solve_or_fail(const Economy& economy, const PriorSpec& prior, const Config& cfg) {
  if (!economy.constant_aggregate()) {
    throw Failure{kAggregate,
                  "aggregate endowment is not constant on the grid; equilibria are computed only "
                  "without aggregate uncertainty"};
  }
  NegishiOptions opt;
  opt.tolerance = cfg.tolerances.equilibrium;
  try {
    return solve_equilibrium(economy, prior, opt);
  } catch (const ConvergenceError& ex) {
    throw Failure{kSolver, std::string("equilibrium solve failed: ") + ex.what()};
  }
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string payoff;
  std::string mode = "upper";
  double sigma = NAN;
  int tree = 0;
  double tol = NAN;
};

int cmd_eval(Session& s, const EvalArgs& a) {
  const Config cfg = s.config();
  const PayoffExpr expr = parse(a.payoff);
  Mode mode = Mode::upper();
  if (a.mode == "lower") {
    mode = Mode::lower();
  } else if (a.mode == "fixed") {
    if (std::isnan(a.sigma)) throw Failure{kUsage, "--sigma is required with --mode fixed"};
    mode = Mode::fixed(a.sigma);
  } else if (a.mode != "upper") {
    throw Failure{kUsage, "--mode must be upper, lower or fixed"};
  }
  mode.validate(cfg.bounds);
  if (a.tree < 0 || a.tree > kMaxTreeSteps) {
    throw Failure{kUsage, "--tree must be in [0, " + std::to_string(kMaxTreeSteps) + "]"};
  }
  const double tol = std::isnan(a.tol) ? cfg.tolerances.mean_af : a.tol;

  const double value = expectation(expr, cfg.bounds, cfg.grid, mode);
  const AmbiguityGap gap = mean_ambiguity_gap(expr, cfg.bounds, cfg.grid, tol);

  auto& o = s.out();
  o << "payoff        " << expr.to_string() << "\n";
  o << "bounds        sigma in [" << num(cfg.bounds.sigma_lo) << ", " << num(cfg.bounds.sigma_hi)
    << "], T = " << num(cfg.bounds.horizon) << "\n";
  o << "grid          " << cfg.grid.nx << " x " << cfg.grid.nt << " on [" << num(cfg.grid.x_min) << ", "
    << num(cfg.grid.x_max) << "], " << cfg.grid.effective_substeps(cfg.bounds) << " sub-steps\n";
  o << "mode          " << mode.name();
  if (mode.kind() == Mode::Kind::Fixed) o << " (sigma = " << num(mode.sigma()) << ")";
  o << "\n";
  o << "expectation   " << fixed(value) << "\n";
  o << "upper         " << fixed(gap.upper) << "\n";
  o << "lower         " << fixed(gap.lower) << "\n";
  o << "gap           " << fixed(gap.gap) << "  mean ambiguity-free: " << (gap.mean_af ? "yes" : "no")
    << " (tol " << num(tol) << ")\n";

  ordered_json j;
  j["payoff"] = expr.to_string();
  j["mode"] = mode.name();
  if (mode.kind() == Mode::Kind::Fixed) j["sigma"] = mode.sigma();
  j["expectation"] = value;
  j["upper"] = gap.upper;
  j["lower"] = gap.lower;
  j["gap"] = gap.gap;
  j["mean_af"] = gap.mean_af;
  if (a.tree > 0) {
    const double tree = tree_expectation(expr, cfg.bounds, a.tree, mode);
    o << "tree (n=" << a.tree << ")    " << fixed(tree) << "  |pde - tree| = " << num(std::abs(tree - value), 4)
      << "\n";
    j["tree_steps"] = a.tree;
    j["tree"] = tree;
  }
  s.write_file("eval.json", j.dump(2) + "\n");
  return kOk;
}

// ---------------------------------------------------------------------------

struct EquilibriumArgs {
  double prior_sigma = NAN;
};

double origin_value(const std::vector<double>& nodes, const GridSpec& grid) {
  return interpolate_nodes(nodes, grid, 0.0);
}

int cmd_equilibrium(Session& s, const EquilibriumArgs& a) {
  Config cfg = s.config();
  if (!std::isnan(a.prior_sigma)) cfg.pricing_sigma = a.prior_sigma;
  cfg.prior().validate(cfg.bounds);
  const Economy economy = cfg.economy();
  print_warnings(s, economy.warnings());
  const EquilibriumResult eq = solve_or_fail(economy, cfg.prior(), cfg);

  auto& o = s.out();
  o << "pricing prior sigma = " << num(eq.prior.sigma) << ", Negishi iterations " << eq.iterations << "\n";
  o << "agent              alpha            c          psi\n";
  std::string csv = "agent,alpha,c,psi\n";
  for (std::size_t i = 0; i < economy.size(); ++i) {
    const double c = origin_value(eq.allocations[i], cfg.grid);
    const double psi = origin_value(eq.psi, cfg.grid);
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %12.8f %12.8f %12.8f\n", economy.agents()[i].name.c_str(),
                  eq.alpha[i], c, psi);
    o << line;
    csv += economy.agents()[i].name + "," + num(eq.alpha[i], 17) + "," + num(c, 17) + "," + num(psi, 17) + "\n";
  }
  const double spread = full_insurance_check(eq);
  o << "full insurance spread " << num(spread, 4) << " (" << (spread <= kFullInsuranceTolerance ? "pass" : "fail")
    << ")\n";

  if (!cfg.bounds.degenerate() && economy.size() >= 2) {
    const EquilibriumResult lo = solve_or_fail(economy, PriorSpec{cfg.bounds.sigma_lo}, cfg);
    const EquilibriumResult hi = solve_or_fail(economy, PriorSpec{cfg.bounds.sigma_hi}, cfg);
    double diff = 0.0;
    for (std::size_t i = 0; i < economy.size(); ++i) {
      diff = std::max(diff, std::abs(origin_value(lo.allocations[i], cfg.grid) -
                                     origin_value(hi.allocations[i], cfg.grid)));
    }
    if (diff > 10.0 * cfg.tolerances.equilibrium) {
      o << "INDETERMINACY: equilibrium allocation depends on the pricing prior\n";
      for (std::size_t i = 0; i < economy.size(); ++i) {
        o << "  " << economy.agents()[i].name << ": c = " << fixed(origin_value(lo.allocations[i], cfg.grid))
          << " (sigma " << num(cfg.bounds.sigma_lo) << ") vs " << fixed(origin_value(hi.allocations[i], cfg.grid))
          << " (sigma " << num(cfg.bounds.sigma_hi) << ")\n";
      }
    }
  }
  s.write_file("equilibrium.csv", csv);
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_implement(Session& s, const EquilibriumArgs& a) {
  Config cfg = s.config();
  if (!std::isnan(a.prior_sigma)) cfg.pricing_sigma = a.prior_sigma;
  cfg.prior().validate(cfg.bounds);
  const Economy economy = cfg.economy();
  print_warnings(s, economy.warnings());
  const EquilibriumResult eq = solve_or_fail(economy, cfg.prior(), cfg);
  const ImplementabilityVerdict verdict = check_implementability(eq, economy, cfg.tolerances.mean_af);

  auto& o = s.out();
  o << "agent         upper_mean   lower_mean          gap  mean_af\n";
  std::string csv = "agent,upper_mean,lower_mean,gap,mean_af\n";
  for (const auto& ag : verdict.agents) {
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %12.8f %12.8f %12.8f  %s\n", ag.name.c_str(), ag.gap.upper,
                  ag.gap.lower, ag.gap.gap, ag.gap.mean_af ? "yes" : "no");
    o << line;
    csv += ag.name + "," + num(ag.gap.upper, 17) + "," + num(ag.gap.lower, 17) + "," + num(ag.gap.gap, 17) + "," +
           (ag.gap.mean_af ? "true" : "false") + "\n";
  }
  o << "IMPLEMENTABLE: " << (verdict.implementable ? "yes" : "no") << "\n";
  s.write_file("implement.csv", csv);
  return kOk;
}

// ---------------------------------------------------------------------------

struct ReplicateArgs {
  std::string agent;
  std::string payoff;
  double prior_sigma = NAN;
};

ordered_json stats_json(const SampleStats& st) {
  ordered_json j;
  j["mean"] = st.mean;
  j["stdev"] = st.stdev;
  j["stderr"] = st.stderr_mean;
  j["min"] = st.min;
  j["max"] = st.max;
  return j;
}

int cmd_replicate(Session& s, const ReplicateArgs& a) {
  const Config cfg = s.config();
  if (a.agent.empty() == a.payoff.empty()) throw Failure{kUsage, "give exactly one of --agent or --payoff"};
  const double sigma = std::isnan(a.prior_sigma) ? cfg.prior().sigma : a.prior_sigma;
  if (!cfg.bounds.contains(sigma)) {
    throw Failure{kUsage, "prior sigma " + num(sigma) + " outside bounds [" + num(cfg.bounds.sigma_lo) + ", " +
                              num(cfg.bounds.sigma_hi) + "]"};
  }

  std::vector<double> terminal;
  std::string claim_label;
  std::optional<PayoffExpr> expr;
  if (!a.payoff.empty()) {
    expr = parse(a.payoff);
    terminal = sample_on_grid(*expr, cfg.grid);
    claim_label = expr->to_string();
  } else {
    const Economy economy = cfg.economy();
    print_warnings(s, economy.warnings());
    const EquilibriumResult eq = solve_or_fail(economy, cfg.prior(), cfg);
    const NetTradeSet xi = net_trades(eq, economy);
    terminal = xi.trades[economy.index_of(a.agent)];
    claim_label = "net trade of " + a.agent;
  }

  const HedgeField hedge = hedge_field(terminal, cfg.bounds, cfg.grid);
  const double upper = hedge.value().origin();
  const double linear = expectation(terminal, cfg.bounds, cfg.grid, Mode::fixed(sigma));
  const PathBatch paths =
      simulate_paths(ControlSpec::constant(sigma), cfg.bounds, cfg.mc.paths, cfg.mc.steps, cfg.mc.seed,
                     cfg.mc.increments);
  const ReplicationReport rep =
      expr ? replicate(*expr, hedge, paths, upper)
           : replicate([&](double x) { return interpolate_nodes(terminal, cfg.grid, x); }, hedge, paths, upper);
  if (rep.paths_used == 0) throw Failure{kSimulation, "every simulated path left the grid"};

  const double predicted = upper - linear;
  const double discrepancy = rep.compensator.mean - predicted;

  auto& o = s.out();
  o << "claim              " << claim_label << "\n";
  o << "prior sigma        " << num(sigma) << "  (" << rep.paths_used << " paths x " << rep.steps << " steps, seed "
    << rep.seed << ", " << rep.paths_excluded << " excluded)\n";
  o << "upper expectation  " << fixed(upper) << "\n";
  o << "prior expectation  " << fixed(linear) << "\n";
  o << "mean hedge gap     " << fixed(rep.hedge_gap.mean) << " +- " << num(rep.hedge_gap.stderr_mean, 3) << "\n";
  o << "mean K_T           " << fixed(rep.compensator.mean) << " +- " << num(rep.compensator.stderr_mean, 3) << "\n";
  o << "mean residual      " << fixed(rep.residual.mean) << " +- " << num(rep.residual.stderr_mean, 3) << "\n";
  o << "identity E^P K_T = E xi - E^P xi: " << fixed(rep.compensator.mean) << " vs " << fixed(predicted)
    << " (diff " << num(discrepancy, 3) << ")\n";

  ordered_json j;
  j["claim"] = claim_label;
  j["prior_sigma"] = sigma;
  j["paths"] = cfg.mc.paths;
  j["steps"] = rep.steps;
  j["seed"] = rep.seed;
  j["increments"] = cfg.mc.increments == IncrementKind::Binary ? "binary" : "gaussian";
  j["paths_used"] = rep.paths_used;
  j["paths_excluded"] = rep.paths_excluded;
  j["upper_expectation"] = upper;
  j["prior_expectation"] = linear;
  j["hedge_gap"] = stats_json(rep.hedge_gap);
  j["residual"] = stats_json(rep.residual);
  j["compensator"] = stats_json(rep.compensator);
  j["gains"] = stats_json(rep.gains);
  j["k_decreasing_steps"] = rep.k_decreasing_steps;
  j["identity"] = {{"mean_k", rep.compensator.mean}, {"predicted", predicted}, {"difference", discrepancy}};
  s.write_file("replicate.json", j.dump(2) + "\n");
  return kOk;
}

// ---------------------------------------------------------------------------

struct ProbeArgs {
  long samples = 200;
  double amplitude = 0.1;
  std::string family = "bump";
};

int cmd_probe(Session& s, const ProbeArgs& a) {
  const Config cfg = s.config();
  if (a.samples <= 0) throw Failure{kUsage, "--samples must be positive"};
  if (!(a.amplitude >= 0.0)) throw Failure{kUsage, "--amplitude must be non-negative"};
  ProbeOptions opt;
  opt.samples = static_cast<std::size_t>(a.samples);
  opt.amplitude = a.amplitude;
  opt.seed = cfg.mc.seed;
  opt.tol = cfg.tolerances.mean_af;
  opt.pricing_sigma = cfg.prior().sigma;
  opt.negishi.tolerance = cfg.tolerances.equilibrium;
  if (a.family == "bump") {
    opt.family = PerturbationFamily::Bump;
  } else if (a.family == "ramp") {
    opt.family = PerturbationFamily::Ramp;
  } else {
    throw Failure{kUsage, "--family must be bump or ramp"};
  }
  const Economy economy = cfg.economy();
  if (!economy.constant_aggregate()) throw Failure{kAggregate, "probe requires a constant aggregate endowment"};

  const ProbeReport rep = genericity_probe(economy, opt);
  std::string csv = "sample,seed,gap_max,implementable\n";
  for (const auto& smp : rep.samples) {
    if (!smp.solved) {
      s.err() << "sample " << smp.index << " failed: " << smp.error << "\n";
      continue;
    }
    csv += std::to_string(smp.index) + "," + std::to_string(smp.seed) + "," + num(smp.gap_max, 17) + "," +
           (smp.implementable ? "true" : "false") + "\n";
  }
  auto& o = s.out();
  o << "samples " << rep.samples.size() << " (" << rep.solved << " solved, " << rep.errors << " failed)\n";
  o << "failing fraction " << fixed(rep.fraction, 4) << "  Wilson 95% [" << fixed(rep.wilson_lo, 4) << ", "
    << fixed(rep.wilson_hi, 4) << "]\n";
  s.write_file("probe.csv", csv);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Equilibria and replication under volatility ambiguity", "knightian"};
  app.require_subcommand(1);
  Globals globals;
  app.add_option("--config", globals.config_path, "JSON economy configuration");
  app.add_option("--out", globals.out_dir, "directory for CSV/JSON reports");
  app.add_flag("--quiet", globals.quiet, "suppress tables on standard output");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "upper/lower/fixed expectation of a payoff");
  eval->add_option("payoff", eval_args.payoff, "payoff expression in x")->required();
  eval->add_option("--mode", eval_args.mode, "upper | lower | fixed");
  eval->add_option("--sigma", eval_args.sigma, "volatility for --mode fixed");
  eval->add_option("--tree", eval_args.tree, "cross-check with the tree oracle (steps <= 14)");
  eval->add_option("--tol", eval_args.tol, "mean ambiguity-free tolerance");

  EquilibriumArgs eq_args;
  auto* equilibrium = app.add_subcommand("equilibrium", "Negishi equilibrium under a pricing prior");
  equilibrium->add_option("--prior-sigma", eq_args.prior_sigma, "pricing prior volatility");

  EquilibriumArgs impl_args;
  auto* implement = app.add_subcommand("implement", "Radner implementability verdict");
  implement->add_option("--prior-sigma", impl_args.prior_sigma, "pricing prior volatility");

  ReplicateArgs rep_args;
  auto* replicate_cmd = app.add_subcommand("replicate", "hedge a net trade or payoff along simulated paths");
  replicate_cmd->add_option("--agent", rep_args.agent, "agent whose equilibrium net trade is hedged");
  replicate_cmd->add_option("--payoff", rep_args.payoff, "raw payoff to hedge instead of a net trade");
  replicate_cmd->add_option("--prior-sigma", rep_args.prior_sigma, "volatility of the simulated prior");

  ProbeArgs probe_args;
  auto* probe = app.add_subcommand("probe", "genericity of non-implementability");
  probe->add_option("--samples", probe_args.samples, "number of perturbed economies");
  probe->add_option("--amplitude", probe_args.amplitude, "perturbation amplitude");
  probe->add_option("--family", probe_args.family, "bump | ramp");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  Session session(globals, out, err);
  try {
    if (eval->parsed()) return cmd_eval(session, eval_args);
    if (equilibrium->parsed()) return cmd_equilibrium(session, eq_args);
    if (implement->parsed()) return cmd_implement(session, impl_args);
    if (replicate_cmd->parsed()) return cmd_replicate(session, rep_args);
    if (probe->parsed()) return cmd_probe(session, probe_args);
  } catch (const Failure& f) {
    err << "error: " << f.message << "\n";
    return f.code;
  } catch (const AggregateUncertaintyError& ex) {
    err << "error: " << ex.what() << "\n";
    return kAggregate;
  } catch (const ConvergenceError& ex) {
    err << "error: " << ex.what() << "\n";
    return kSolver;
  } catch (const ParseError& ex) {
    err << "error: payoff: " << ex.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsage;
  } catch (const DomainError& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kSolver;
  }
  return kUsage;
}

}  // namespace knightian::cli
