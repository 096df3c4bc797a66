#include "knightian/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace knightian {

namespace {

using nlohmann::json;

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  return obj.at(key).get<T>();
}

Utility parse_utility(const json& u) {
  const std::string kind = u.at("kind").get<std::string>();
  if (kind == "log") return Utility::log();
  if (kind == "power") return Utility::power(u.at("gamma").get<double>());
  if (kind == "exp") return Utility::exponential(u.at("a").get<double>());
  throw std::invalid_argument("unknown utility kind '" + kind + "'");
}

}  // namespace

Config parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& ex) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + ex.what());
  }
  if (!root.is_object()) throw std::invalid_argument("config must be a JSON object");

  Config cfg;
  try {
    if (root.contains("bounds")) {
      const json& b = root.at("bounds");
      cfg.bounds.sigma_lo = get_or(b, "sigma_lo", cfg.bounds.sigma_lo);
      cfg.bounds.sigma_hi = get_or(b, "sigma_hi", cfg.bounds.sigma_hi);
      cfg.bounds.horizon = get_or(b, "horizon", cfg.bounds.horizon);
    }
    cfg.bounds.validate();

    cfg.grid = GridSpec::reference(cfg.bounds);
    if (root.contains("grid")) {
      const json& g = root.at("grid");
      cfg.grid.x_min = get_or(g, "x_min", cfg.grid.x_min);
      cfg.grid.x_max = get_or(g, "x_max", cfg.grid.x_max);
      cfg.grid.nx = get_or(g, "nx", cfg.grid.nx);
      cfg.grid.nt = get_or(g, "nt", cfg.grid.nt);
      cfg.grid.substeps = get_or(g, "substeps", cfg.grid.substeps);
    }
    cfg.grid.validate();
    cfg.grid.effective_substeps(cfg.bounds);

    if (root.contains("agents")) {
      for (const json& a : root.at("agents")) {
        AgentConfig agent{a.at("name").get<std::string>(), parse_utility(a.at("utility")),
                          a.at("endowment").get<std::string>()};
        cfg.agents.push_back(std::move(agent));
      }
    }

    if (root.contains("pricing_prior")) {
      cfg.pricing_sigma = root.at("pricing_prior").at("sigma").get<double>();
      cfg.prior().validate(cfg.bounds);
    }

    if (root.contains("mc")) {
      const json& m = root.at("mc");
      cfg.mc.paths = get_or(m, "paths", cfg.mc.paths);
      cfg.mc.steps = get_or(m, "steps", cfg.mc.steps);
      cfg.mc.seed = get_or(m, "seed", cfg.mc.seed);
      const std::string inc = get_or<std::string>(m, "increments", "binary");
      if (inc == "binary") {
        cfg.mc.increments = IncrementKind::Binary;
      } else if (inc == "gaussian") {
        cfg.mc.increments = IncrementKind::Gaussian;
      } else {
        throw std::invalid_argument("mc.increments must be \"binary\" or \"gaussian\"");
      }
      if (cfg.mc.paths < 1 || cfg.mc.steps < 1) throw std::invalid_argument("mc needs paths, steps >= 1");
    }

    if (root.contains("tolerances")) {
      const json& t = root.at("tolerances");
      cfg.tolerances.mean_af = get_or(t, "mean_af", cfg.tolerances.mean_af);
      cfg.tolerances.equilibrium = get_or(t, "equilibrium", cfg.tolerances.equilibrium);
      if (!(cfg.tolerances.mean_af >= 0.0) || !(cfg.tolerances.equilibrium > 0.0)) {
        throw std::invalid_argument("tolerances must be positive");
      }
    }
  } catch (const json::exception& ex) {
    throw std::invalid_argument(std::string("config: ") + ex.what());
  }
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

Economy Config::economy() const {
  if (agents.empty()) throw std::invalid_argument("config has no agents");
  std::vector<Agent> out;
  out.reserve(agents.size());
  for (const auto& a : agents) out.push_back(Agent{a.name, a.utility, parse(a.endowment)});
  return Economy(std::move(out), bounds, grid);
}

}  // namespace knightian
