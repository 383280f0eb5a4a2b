// Seeded Monte Carlo drivers: convergence trace, network snapshot, traffic sweep and
// antenna sweep, plus CSV/JSON export and run manifests.
//
// Every trial seed is derive_seed(base_seed, bits(eta), N, trial). RIS-on and RIS-off runs of a
// cell, and the uniform and hotspot patterns, share that seed, so they see the same direct channels
// and traffic noise; only M (or the pattern shape) differs.
#pragma once

#include "risbr/model.hpp"
#include "risbr/numerics.hpp"
#include "risbr/optimizer.hpp"
#include "risbr/parallel.hpp"
#include "risbr/scenario.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#ifndef RISBR_VERSION
#define RISBR_VERSION "0.1.0"
#endif

namespace risbr {

using json = nlohmann::ordered_json;

enum class TrafficPattern { Uniform, Hotspot };

inline std::string to_string(TrafficPattern p) { return p == TrafficPattern::Uniform ? "uniform" : "hotspot"; }

inline TrafficPattern parse_pattern(const std::string& s) {
  if (s == "uniform") return TrafficPattern::Uniform;
  if (s == "hotspot") return TrafficPattern::Hotspot;
  throw InvalidInput("unknown traffic pattern '" + s + "' (expected uniform|hotspot)");
}

struct ExperimentSpec {
  ScenarioConfig scenario;  ///< base realization; the sweep overrides intensity, pattern, M and N
  SolverConfig solver;
  std::vector<double> eta_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<std::size_t> antenna_grid{2, 4, 6};
  std::vector<TrafficPattern> patterns{TrafficPattern::Uniform, TrafficPattern::Hotspot};
  TrafficSettings uniform_shape{0.0, 0.0, 2.0, 0.0};
  TrafficSettings hotspot_shape{0.0, 0.7, 2.0, 0.05};
  bool ris_pair = true;  ///< run each cell with M (RIS on) and M = 0 (RIS off)
  std::size_t trials = 20;
  std::uint64_t base_seed = 1;
  std::size_t threads = 1;

  void validate() const {
    scenario.validate();
    solver.validate();
    if (trials < 1) throw InvalidInput("experiment: trials must be >= 1");
    if (eta_grid.empty()) throw InvalidInput("experiment: eta grid is empty");
    for (double eta : eta_grid)
      if (!(eta >= 0.0 && eta <= 1.0)) throw InvalidInput("experiment: eta grid values must lie in [0, 1]");
    for (auto n : antenna_grid)
      if (n < 1) throw InvalidInput("experiment: antenna grid values must be >= 1");
    if (patterns.empty()) throw InvalidInput("experiment: no traffic patterns");
    uniform_shape.validate();
    hotspot_shape.validate();
  }

  TrafficSettings shape(TrafficPattern p, double eta) const {
    TrafficSettings t = p == TrafficPattern::Uniform ? uniform_shape : hotspot_shape;
    t.intensity = eta;
    return t;
  }
};

inline std::uint64_t trial_seed(std::uint64_t base, double eta, std::size_t antennas, std::size_t trial) {
  return derive_seed(base, std::bit_cast<std::uint64_t>(eta), antennas, trial);
}

// *=== tables ===*

struct ResultRow {
  double eta = 0.0;
  TrafficPattern pattern = TrafficPattern::Uniform;
  bool ris = false;
  std::size_t antennas = 0;
  std::size_t ris_elements = 0;
  double mean_total = 0.0;
  double mean_psi = 0.0;
  double std_psi = 0.0;
  std::vector<double> trial_total;
  std::vector<double> trial_psi;
  std::vector<std::uint64_t> seeds;

  bool operator==(const ResultRow&) const = default;
};

struct ResultTable {
  std::string axis;  ///< "eta" or "antennas"
  std::vector<ResultRow> rows;

  bool operator==(const ResultTable&) const = default;
};

struct TraceRow {
  std::size_t iteration = 0;
  double objective = 0.0;
  double phase_change = 0.0;
  double precoder_change = 0.0;

  bool operator==(const TraceRow&) const = default;
};

struct TraceTable {
  std::uint64_t seed = 0;
  std::vector<std::size_t> selection;
  double total = 0.0;
  double survivability = 0.0;
  std::vector<TraceRow> rows;

  bool operator==(const TraceTable&) const = default;
};

struct SnapshotRow {
  std::size_t bs = 0;
  double x = 0.0;
  double y = 0.0;
  double distance = 0.0;
  double local = 0.0;        ///< C_l / C_0
  bool selected = false;
  double resolvable = 0.0;     ///< r_l / C_0
  double redistributed = 0.0;  ///< f_l / C_0

  bool operator==(const SnapshotRow&) const = default;
};

struct SnapshotTable {
  std::uint64_t seed = 0;
  double demand = 0.0;  ///< eta
  double total = 0.0;   ///< R / C_0
  double survivability = 0.0;
  bool nearest_selected = false;  ///< the selection equals the |S| geographically nearest BSs
  std::vector<SnapshotRow> rows;

  bool operator==(const SnapshotTable&) const = default;
};

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1); zero for fewer than two values.
inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// *=== trial execution ===*

struct TrialRecord {
  const Scenario& scenario;
  const SolveResult& result;
  double eta;
  TrafficPattern pattern;
  bool ris;
  std::size_t antennas;
  std::uint64_t seed;
};

/// Optional hook called once per trial (serialized, but in completion order).
using TrialObserver = std::function<void(const TrialRecord&)>;

namespace detail {

struct Cell {
  double eta;
  TrafficPattern pattern;
  bool ris;
  std::size_t antennas;
};

inline ResultTable run_cells(const ExperimentSpec& spec, const std::vector<Cell>& cells, std::string axis,
                             const TrialObserver& observer) {
  spec.validate();
  const std::size_t trials = spec.trials;
  std::vector<double> totals(cells.size() * trials), psis(cells.size() * trials);
  std::vector<std::uint64_t> seeds(cells.size() * trials);
  std::mutex observer_mutex;

  parallel_for(cells.size() * trials, spec.threads, [&](std::size_t task) {
    const Cell& cell = cells[task / trials];
    const std::size_t t = task % trials;
    ScenarioConfig cfg = spec.scenario;
    cfg.system.antennas = cell.antennas;
    if (!cell.ris) cfg.system.ris_elements = 0;
    cfg.traffic = spec.shape(cell.pattern, cell.eta);
    const std::uint64_t seed = trial_seed(spec.base_seed, cell.eta, cell.antennas, t);
    const Scenario sc = build_scenario(cfg, seed);
    Rng rng(derive_seed(seed, 4));
    SolverConfig solver = spec.solver;
    solver.threads = 1;
    const SolveResult res = run_algorithm(sc, solver, rng);
    totals[task] = res.total;
    psis[task] = res.survivability;
    seeds[task] = seed;
    if (observer) {
      std::lock_guard lock(observer_mutex);
      observer({sc, res, cell.eta, cell.pattern, cell.ris, cell.antennas, seed});
    }
  });

  ResultTable table;
  table.axis = std::move(axis);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    ResultRow row;
    row.eta = cells[c].eta;
    row.pattern = cells[c].pattern;
    row.ris = cells[c].ris;
    row.antennas = cells[c].antennas;
    row.ris_elements = cells[c].ris ? spec.scenario.system.ris_elements : 0;
    for (std::size_t t = 0; t < trials; ++t) {
      row.trial_total.push_back(totals[c * trials + t]);
      row.trial_psi.push_back(psis[c * trials + t]);
      row.seeds.push_back(seeds[c * trials + t]);
    }
    row.mean_total = mean(row.trial_total);
    row.mean_psi = mean(row.trial_psi);
    row.std_psi = sample_std(row.trial_psi);
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline std::vector<bool> ris_flags(const ExperimentSpec& spec) {
  if (spec.ris_pair) return {true, false};
  return {spec.scenario.system.ris_elements > 0};
}

}  // namespace detail

/// Mean R and psi versus eta for each traffic pattern, RIS on and off.
inline ResultTable run_traffic_sweep(const ExperimentSpec& spec, const TrialObserver& observer = {}) {
  std::vector<detail::Cell> cells;
  for (double eta : spec.eta_grid)
    for (auto pattern : spec.patterns)
      for (bool ris : detail::ris_flags(spec)) cells.push_back({eta, pattern, ris, spec.scenario.system.antennas});
  return detail::run_cells(spec, cells, "eta", observer);
}

/// Mean R and psi versus eta for each antenna count, uniform traffic, RIS on and off.
inline ResultTable run_antenna_sweep(const ExperimentSpec& spec, const TrialObserver& observer = {}) {
  std::vector<detail::Cell> cells;
  for (auto n : spec.antenna_grid)
    for (double eta : spec.eta_grid)
      for (bool ris : detail::ris_flags(spec)) cells.push_back({eta, TrafficPattern::Uniform, ris, n});
  return detail::run_cells(spec, cells, "antennas", observer);
}

/// Per-iteration objective and iterate changes for one realization (the configured base traffic).
inline TraceTable run_convergence(const ExperimentSpec& spec, const TrialObserver& observer = {}) {
  spec.validate();
  const Scenario sc = build_scenario(spec.scenario, spec.base_seed);
  Rng rng(derive_seed(spec.base_seed, 4));
  SolverConfig solver = spec.solver;
  solver.threads = spec.threads;
  const SolveResult res = run_algorithm(sc, solver, rng);
  if (observer)
    observer({sc, res, spec.scenario.traffic.intensity,
              spec.scenario.traffic.alpha > 0.0 ? TrafficPattern::Hotspot : TrafficPattern::Uniform,
              spec.scenario.system.ris_elements > 0, spec.scenario.system.antennas, spec.base_seed});
  TraceTable table;
  table.seed = spec.base_seed;
  table.selection = res.selection.members();
  table.total = res.total;
  table.survivability = res.survivability;
  for (std::size_t i = 0; i < res.objective_trace.size(); ++i)
    table.rows.push_back({i, res.objective_trace[i], res.phase_change_trace[i], res.precoder_change_trace[i]});
  return table;
}

/// Per-BS local load and redistributed traffic for one realization.
inline SnapshotTable run_snapshot(const ExperimentSpec& spec, const TrialObserver& observer = {}) {
  spec.validate();
  const Scenario sc = build_scenario(spec.scenario, spec.base_seed);
  Rng rng(derive_seed(spec.base_seed, 4));
  SolverConfig solver = spec.solver;
  solver.threads = spec.threads;
  const SolveResult res = run_algorithm(sc, solver, rng);
  if (observer)
    observer({sc, res, spec.scenario.traffic.intensity,
              spec.scenario.traffic.alpha > 0.0 ? TrafficPattern::Hotspot : TrafficPattern::Uniform,
              spec.scenario.system.ris_elements > 0, spec.scenario.system.antennas, spec.base_seed});
  const double c0 = sc.params.bbu_capacity;
  SnapshotTable table;
  table.seed = spec.base_seed;
  table.demand = sc.traffic.demand / c0;
  table.total = res.total / c0;
  table.survivability = res.survivability;
  for (std::size_t l = 0; l < sc.surviving(); ++l) {
    SnapshotRow row;
    row.bs = l;
    row.x = sc.topology.surviving[l].x;
    row.y = sc.topology.surviving[l].y;
    row.distance = sc.topology.bs_distance[l];
    row.local = sc.traffic.load[l];
    row.selected = res.selection.contains(l);
    row.resolvable = res.rates[l] / c0;
    row.redistributed = res.credited[l] / c0;
    table.rows.push_back(row);
  }
  // survivors are indexed by increasing distance, so the nearest |S| are 0..|S|-1 up to distance ties
  const std::size_t k = res.selection.count();
  if (k > 0) {
    const double kth = sc.topology.bs_distance[k - 1];
    bool nearest = true;
    for (auto l : res.selection.members())
      if (sc.topology.bs_distance[l] > kth + 1e-9) nearest = false;
    table.nearest_selected = nearest;
  }
  return table;
}

// *=== serialization ===*

namespace detail {

inline std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F&& f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += f(v[i]);
  }
  return out;
}

}  // namespace detail

inline constexpr const char* kResultCsvHeader =
    "eta,pattern,ris,N,M,trials,mean_R,mean_psi,std_psi,trial_R,trial_psi,trial_seeds";
inline constexpr const char* kTraceCsvHeader = "iteration,objective,phase_change,precoder_change";
inline constexpr const char* kSnapshotCsvHeader = "bs,x,y,distance,local,selected,resolvable,redistributed";

inline std::string to_csv(const ResultTable& t) {
  std::ostringstream os;
  os << kResultCsvHeader << '\n';
  for (const auto& r : t.rows) {
    os << detail::fmt9(r.eta) << ',' << to_string(r.pattern) << ',' << (r.ris ? 1 : 0) << ',' << r.antennas << ','
       << r.ris_elements << ',' << r.trial_total.size() << ',' << detail::fmt9(r.mean_total) << ','
       << detail::fmt9(r.mean_psi) << ',' << detail::fmt9(r.std_psi) << ','
       << detail::join(r.trial_total, detail::fmt9) << ',' << detail::join(r.trial_psi, detail::fmt9) << ','
       << detail::join(r.seeds, [](std::uint64_t s) { return std::to_string(s); }) << '\n';
  }
  return os.str();
}

inline std::string to_csv(const TraceTable& t) {
  std::ostringstream os;
  os << kTraceCsvHeader << '\n';
  for (const auto& r : t.rows)
    os << r.iteration << ',' << detail::fmt9(r.objective) << ',' << detail::fmt9(r.phase_change) << ','
       << detail::fmt9(r.precoder_change) << '\n';
  return os.str();
}

inline std::string to_csv(const SnapshotTable& t) {
  std::ostringstream os;
  os << kSnapshotCsvHeader << '\n';
  for (const auto& r : t.rows)
    os << r.bs << ',' << detail::fmt9(r.x) << ',' << detail::fmt9(r.y) << ',' << detail::fmt9(r.distance) << ','
       << detail::fmt9(r.local) << ',' << (r.selected ? 1 : 0) << ',' << detail::fmt9(r.resolvable) << ','
       << detail::fmt9(r.redistributed) << '\n';
  return os.str();
}

// JSON keeps full double precision so that tables round-trip exactly.

inline json to_json(const ResultTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"eta", r.eta},
                    {"pattern", to_string(r.pattern)},
                    {"ris", r.ris},
                    {"N", r.antennas},
                    {"M", r.ris_elements},
                    {"mean_R", r.mean_total},
                    {"mean_psi", r.mean_psi},
                    {"std_psi", r.std_psi},
                    {"trial_R", r.trial_total},
                    {"trial_psi", r.trial_psi},
                    {"trial_seeds", r.seeds}});
  return {{"axis", t.axis}, {"rows", rows}};
}

inline ResultTable result_table_from_json(const json& j) {
  ResultTable t;
  t.axis = j.at("axis").get<std::string>();
  for (const auto& r : j.at("rows")) {
    ResultRow row;
    row.eta = r.at("eta").get<double>();
    row.pattern = parse_pattern(r.at("pattern").get<std::string>());
    row.ris = r.at("ris").get<bool>();
    row.antennas = r.at("N").get<std::size_t>();
    row.ris_elements = r.at("M").get<std::size_t>();
    row.mean_total = r.at("mean_R").get<double>();
    row.mean_psi = r.at("mean_psi").get<double>();
    row.std_psi = r.at("std_psi").get<double>();
    row.trial_total = r.at("trial_R").get<std::vector<double>>();
    row.trial_psi = r.at("trial_psi").get<std::vector<double>>();
    row.seeds = r.at("trial_seeds").get<std::vector<std::uint64_t>>();
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline json to_json(const TraceTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"iteration", r.iteration},
                    {"objective", r.objective},
                    {"phase_change", r.phase_change},
                    {"precoder_change", r.precoder_change}});
  return {{"seed", t.seed},
          {"selection", t.selection},
          {"R", t.total},
          {"psi", t.survivability},
          {"rows", rows}};
}

inline TraceTable trace_table_from_json(const json& j) {
  TraceTable t;
  t.seed = j.at("seed").get<std::uint64_t>();
  t.selection = j.at("selection").get<std::vector<std::size_t>>();
  t.total = j.at("R").get<double>();
  t.survivability = j.at("psi").get<double>();
  for (const auto& r : j.at("rows"))
    t.rows.push_back({r.at("iteration").get<std::size_t>(), r.at("objective").get<double>(),
                      r.at("phase_change").get<double>(), r.at("precoder_change").get<double>()});
  return t;
}

inline json to_json(const SnapshotTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"bs", r.bs},
                    {"x", r.x},
                    {"y", r.y},
                    {"distance", r.distance},
                    {"local", r.local},
                    {"selected", r.selected},
                    {"resolvable", r.resolvable},
                    {"redistributed", r.redistributed}});
  return {{"seed", t.seed},
          {"eta", t.demand},
          {"R", t.total},
          {"psi", t.survivability},
          {"nearest_selected", t.nearest_selected},
          {"rows", rows}};
}

inline SnapshotTable snapshot_table_from_json(const json& j) {
  SnapshotTable t;
  t.seed = j.at("seed").get<std::uint64_t>();
  t.demand = j.at("eta").get<double>();
  t.total = j.at("R").get<double>();
  t.survivability = j.at("psi").get<double>();
  t.nearest_selected = j.at("nearest_selected").get<bool>();
  for (const auto& r : j.at("rows"))
    t.rows.push_back({r.at("bs").get<std::size_t>(), r.at("x").get<double>(), r.at("y").get<double>(),
                      r.at("distance").get<double>(), r.at("local").get<double>(), r.at("selected").get<bool>(),
                      r.at("resolvable").get<double>(), r.at("redistributed").get<double>()});
  return t;
}

enum class ExportFormat { Csv, Json };

inline ExportFormat parse_format(const std::string& s) {
  if (s == "csv") return ExportFormat::Csv;
  if (s == "json") return ExportFormat::Json;
  throw InvalidInput("unknown output format '" + s + "' (expected csv|json)");
}

inline std::string extension(ExportFormat f) { return f == ExportFormat::Csv ? ".csv" : ".json"; }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
}

/// Writes the table; output bytes depend only on the table contents.
template <typename Table>
void export_table(const Table& table, const std::filesystem::path& path, ExportFormat format) {
  write_text(path, format == ExportFormat::Csv ? to_csv(table) : to_json(table).dump(2) + "\n");
}

// *=== manifests ===*

inline json to_json(const TrafficSettings& t) {
  return {{"eta", t.intensity}, {"alpha", t.alpha}, {"gamma", t.gamma}, {"sigma_chi", t.sigma_chi}};
}

inline json to_json(const ExperimentSpec& spec) {
  const auto& s = spec.scenario.system;
  json tau = std::isfinite(spec.solver.outer_tolerance) ? json(spec.solver.outer_tolerance) : json("inf");
  json patterns = json::array();
  for (auto p : spec.patterns) patterns.push_back(to_string(p));
  return {{"system",
           {{"N", s.antennas},
            {"M", s.ris_elements},
            {"L", s.surviving_bs},
            {"P_max", s.max_power},
            {"B", s.bandwidth},
            {"f_c", s.carrier_frequency},
            {"sigma2", s.noise_power},
            {"C_0", s.bbu_capacity},
            {"d_0", s.site_distance},
            {"kappa_dB", linear_to_db(s.rician_factor)},
            {"big_M", s.big_m}}},
          {"pathloss", {{"n_los", spec.scenario.pathloss.los_exponent}, {"n_nlos", spec.scenario.pathloss.nlos_exponent}}},
          {"ris", {{"offset_fraction", spec.scenario.ris_offset_fraction}}},
          {"traffic", to_json(spec.scenario.traffic)},
          {"solver",
           {{"E", spec.solver.max_outer_iterations},
            {"tau_out", tau},
            {"max_inner", spec.solver.inner.max_iterations},
            {"grad_tol", spec.solver.inner.gradient_tolerance},
            {"backtrack", spec.solver.inner.backtrack_factor},
            {"strategy", to_string(spec.solver.strategy)},
            {"eps_reg", spec.solver.eps_for(s.antennas)}}},
          {"experiment",
           {{"eta_grid", spec.eta_grid},
            {"antenna_grid", spec.antenna_grid},
            {"patterns", patterns},
            {"hotspot", {{"alpha", spec.hotspot_shape.alpha}, {"gamma", spec.hotspot_shape.gamma}, {"sigma_chi", spec.hotspot_shape.sigma_chi}}},
            {"uniform_sigma_chi", spec.uniform_shape.sigma_chi},
            {"ris_pair", spec.ris_pair},
            {"trials", spec.trials},
            {"base_seed", spec.base_seed}}}};
}

/// Manifest written next to each table: enough to rerun it exactly.
inline json make_manifest(const std::string& command, const ExperimentSpec& spec, const std::vector<std::uint64_t>& seeds) {
  return {{"tool", "risbr"},
          {"version", RISBR_VERSION},
          {"command", command},
          {"config", to_json(spec)},
          {"seeding", "trial seed = derive_seed(base_seed, bits(eta), N, trial); RIS on/off and traffic patterns share seeds"},
          {"seeds", seeds}};
}

inline std::vector<std::uint64_t> seeds_of(const ResultTable& t) {
  std::vector<std::uint64_t> out;
  for (const auto& r : t.rows)
    for (auto s : r.seeds)
      if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  return out;
}

inline std::filesystem::path manifest_path(const std::filesystem::path& table_path) {
  auto p = table_path;
  p.replace_extension(".manifest.json");
  return p;
}

}  // namespace risbr
