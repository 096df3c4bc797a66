#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "knightian/equilibrium.hpp"
#include "knightian/gexp.hpp"
#include "knightian/replication.hpp"

namespace knightian {

struct MonteCarloConfig {
  std::size_t paths = 100000;
  int steps = 512;
  std::uint64_t seed = 42;
  IncrementKind increments = IncrementKind::Binary;
};

struct ToleranceConfig {
  double mean_af = kDefaultMeanAfTolerance;
  double equilibrium = 1e-10;
};

struct AgentConfig {
  std::string name;
  Utility utility;
  std::string endowment;  // DSL text
};

/**
 * Batch configuration:
 *
 *   { "bounds": {"sigma_lo", "sigma_hi", "horizon"},
 *     "grid": {"x_min", "x_max", "nx", "nt", "substeps"},
 *     "agents": [{"name", "utility": {"kind": "log"|"power"|"exp", "gamma", "a"},
 *                 "endowment": "<payoff>"}],
 *     "pricing_prior": {"sigma"},
 *     "mc": {"paths", "steps", "seed", "increments": "binary"|"gaussian"},
 *     "tolerances": {"mean_af", "equilibrium"} }
 *
 * Omitted blocks take defaults: unit bounds, the 801 x 2000 reference grid
 * on +-6 sigma_hi sqrt(T), 100000 x 512 binary paths with seed 42, pricing
 * prior sigma_hi.
 */
struct Config {
  VolBounds bounds;
  GridSpec grid;
  std::vector<AgentConfig> agents;
  std::optional<double> pricing_sigma;
  MonteCarloConfig mc;
  ToleranceConfig tolerances;

  PriorSpec prior() const { return PriorSpec{pricing_sigma.value_or(bounds.sigma_hi)}; }

  // Parses endowments and validates agents; throws on invalid input.
  Economy economy() const;
};

// Throws std::invalid_argument (or ParseError) with a readable message.
Config parse_config(const std::string& json_text);
Config load_config(const std::string& path);

}  // namespace knightian
