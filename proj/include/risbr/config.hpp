// JSON run configuration: sections system, pathloss, ris, traffic, solver, experiment and
// output. Unknown keys are rejected; missing keys keep the built-in defaults.
#pragma once

#include "risbr/harness.hpp"
#include "risbr/optimizer.hpp"
#include "risbr/scenario.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>

namespace risbr {

/// Malformed or ill-typed configuration document.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct RunConfig {
  ExperimentSpec spec;
  std::string output_dir = "results";
  ExportFormat format = ExportFormat::Csv;
};

namespace detail {

inline void check_keys(const json& section, const std::string& name, const std::set<std::string>& allowed) {
  if (!section.is_object()) throw ConfigError("config: section '" + name + "' must be an object");
  for (const auto& [key, value] : section.items())
    if (!allowed.count(key)) throw ConfigError("config: unknown key '" + name + "." + key + "'");
}

template <typename T>
void read(const json& section, const char* key, T& out, const std::string& section_name) {
  if (!section.contains(key)) return;
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    if (!section.at(key).is_number_unsigned())
      throw ConfigError("config: '" + section_name + "." + key + "' must be a non-negative integer");
  }
  try {
    out = section.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: '" + section_name + "." + key + "' has the wrong type");
  }
}

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte);
    throw ConfigError("config: JSON syntax error at line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  detail::check_keys(doc, "<root>", {"system", "pathloss", "ris", "traffic", "solver", "experiment", "output"});

  RunConfig rc;
  auto& sys = rc.spec.scenario.system;
  if (doc.contains("system")) {
    const auto& s = doc["system"];
    detail::check_keys(s, "system", {"N", "M", "L", "P_max", "B", "f_c", "sigma2", "C_0", "d_0", "kappa_dB", "big_M"});
    detail::read(s, "N", sys.antennas, "system");
    detail::read(s, "M", sys.ris_elements, "system");
    detail::read(s, "L", sys.surviving_bs, "system");
    detail::read(s, "P_max", sys.max_power, "system");
    detail::read(s, "B", sys.bandwidth, "system");
    detail::read(s, "f_c", sys.carrier_frequency, "system");
    detail::read(s, "sigma2", sys.noise_power, "system");
    detail::read(s, "C_0", sys.bbu_capacity, "system");
    detail::read(s, "d_0", sys.site_distance, "system");
    detail::read(s, "big_M", sys.big_m, "system");
    if (s.contains("kappa_dB")) {
      double kappa_db = 9.0;
      detail::read(s, "kappa_dB", kappa_db, "system");
      sys.rician_factor = db_to_linear(kappa_db);
    }
  }
  if (doc.contains("pathloss")) {
    const auto& p = doc["pathloss"];
    detail::check_keys(p, "pathloss", {"n_los", "n_nlos"});
    detail::read(p, "n_los", rc.spec.scenario.pathloss.los_exponent, "pathloss");
    detail::read(p, "n_nlos", rc.spec.scenario.pathloss.nlos_exponent, "pathloss");
  }
  if (doc.contains("ris")) {
    const auto& r = doc["ris"];
    detail::check_keys(r, "ris", {"offset_fraction"});
    detail::read(r, "offset_fraction", rc.spec.scenario.ris_offset_fraction, "ris");
  }
  if (doc.contains("traffic")) {
    const auto& t = doc["traffic"];
    detail::check_keys(t, "traffic", {"eta", "alpha", "gamma", "sigma_chi"});
    auto& tr = rc.spec.scenario.traffic;
    detail::read(t, "eta", tr.intensity, "traffic");
    detail::read(t, "alpha", tr.alpha, "traffic");
    detail::read(t, "gamma", tr.gamma, "traffic");
    detail::read(t, "sigma_chi", tr.sigma_chi, "traffic");
  }
  if (doc.contains("solver")) {
    const auto& s = doc["solver"];
    detail::check_keys(s, "solver", {"E", "tau_out", "max_inner", "grad_tol", "backtrack", "strategy", "eps_reg"});
    auto& sv = rc.spec.solver;
    detail::read(s, "E", sv.max_outer_iterations, "solver");
    if (s.contains("tau_out")) {
      const auto& tau = s["tau_out"];
      if (tau.is_string() && (tau.get<std::string>() == "inf" || tau.get<std::string>() == "infinity"))
        sv.outer_tolerance = std::numeric_limits<double>::infinity();
      else
        detail::read(s, "tau_out", sv.outer_tolerance, "solver");
    }
    detail::read(s, "max_inner", sv.inner.max_iterations, "solver");
    detail::read(s, "grad_tol", sv.inner.gradient_tolerance, "solver");
    detail::read(s, "backtrack", sv.inner.backtrack_factor, "solver");
    if (s.contains("strategy")) {
      std::string name;
      detail::read(s, "strategy", name, "solver");
      sv.strategy = parse_strategy(name);
    }
    if (s.contains("eps_reg") && !s["eps_reg"].is_null()) {
      double eps = 0.0;
      detail::read(s, "eps_reg", eps, "solver");
      sv.regularization = eps;
    }
  }
  if (doc.contains("experiment")) {
    const auto& e = doc["experiment"];
    detail::check_keys(e, "experiment",
                       {"eta_grid", "antenna_grid", "patterns", "hotspot", "uniform_sigma_chi", "ris_pair", "trials",
                        "base_seed"});
    auto& sp = rc.spec;
    detail::read(e, "eta_grid", sp.eta_grid, "experiment");
    detail::read(e, "antenna_grid", sp.antenna_grid, "experiment");
    if (e.contains("patterns")) {
      std::vector<std::string> names;
      detail::read(e, "patterns", names, "experiment");
      sp.patterns.clear();
      for (const auto& n : names) sp.patterns.push_back(parse_pattern(n));
    }
    if (e.contains("hotspot")) {
      const auto& h = e["hotspot"];
      detail::check_keys(h, "experiment.hotspot", {"alpha", "gamma", "sigma_chi"});
      detail::read(h, "alpha", sp.hotspot_shape.alpha, "experiment.hotspot");
      detail::read(h, "gamma", sp.hotspot_shape.gamma, "experiment.hotspot");
      detail::read(h, "sigma_chi", sp.hotspot_shape.sigma_chi, "experiment.hotspot");
    }
    detail::read(e, "uniform_sigma_chi", sp.uniform_shape.sigma_chi, "experiment");
    detail::read(e, "ris_pair", sp.ris_pair, "experiment");
    detail::read(e, "trials", sp.trials, "experiment");
    detail::read(e, "base_seed", sp.base_seed, "experiment");
  }
  if (doc.contains("output")) {
    const auto& o = doc["output"];
    detail::check_keys(o, "output", {"dir", "format"});
    detail::read(o, "dir", rc.output_dir, "output");
    if (o.contains("format")) {
      std::string f;
      detail::read(o, "format", f, "output");
      rc.format = parse_format(f);
    }
  }
  rc.spec.validate();
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

}  // namespace risbr
