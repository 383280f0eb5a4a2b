// risbr: single solves, experiment tables and self-checks for RIS-assisted backhaul redistribution.
//
// Exit codes: 0 ok, 1 a validate check failed, 2 configuration or usage error, 3 numerical failure.

#include "risbr/config.hpp"
#include "risbr/harness.hpp"
#include "risbr/optimizer.hpp"
#include "risbr/parallel.hpp"
#include "risbr/validate.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace risbr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool no_ris = false;
  std::string out;
  std::string format;
  std::string strategy;
};

// config file (or defaults) with the command-line overrides applied
RunConfig resolve(const Options& o) {
  RunConfig rc = o.config.empty() ? parse_run_config("{}") : load_run_config(o.config);
  auto& spec = rc.spec;
  if (o.seed) spec.base_seed = *o.seed;
  if (o.no_ris) {
    spec.scenario.system.ris_elements = 0;
    spec.ris_pair = false;
  }
  if (!o.out.empty()) rc.output_dir = o.out;
  if (!o.format.empty()) rc.format = parse_format(o.format);
  if (!o.strategy.empty()) spec.solver.strategy = parse_strategy(o.strategy);
  spec.threads = default_thread_count();
  spec.validate();
  return rc;
}

template <typename Table>
fs::path write_table(const RunConfig& rc, const std::string& stem, const Table& table, const json& manifest) {
  const fs::path path = fs::path(rc.output_dir) / (stem + extension(rc.format));
  export_table(table, path, rc.format);
  const fs::path mpath = manifest_path(path);
  write_text(mpath, manifest.dump(2) + "\n");
  std::cout << path.string() << "\n" << mpath.string() << "\n";
  return path;
}

json solve_dump(const Scenario& sc, const SolveResult& r) {
  json phase = json::array();
  for (Eigen::Index m = 0; m < r.phase.phi.size(); ++m) phase.push_back({r.phase.phi(m).real(), r.phase.phi(m).imag()});
  json precoders = json::array();
  for (const auto& w : r.precoders.w) {
    json v = json::array();
    for (Eigen::Index i = 0; i < w.size(); ++i) v.push_back({w(i).real(), w(i).imag()});
    precoders.push_back(v);
  }
  return {{"seed", sc.seed},
          {"strategy", to_string(r.strategy)},
          {"demand", sc.traffic.demand},
          {"total", r.total},
          {"survivability", r.survivability},
          {"selection", r.selection.members()},
          {"rates", r.rates},
          {"credited", r.credited},
          {"spare", sc.traffic.spare},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"selections_evaluated", r.selections_evaluated},
          {"objective_trace", r.objective_trace},
          {"phase", phase},
          {"precoders", precoders}};
}

int cmd_solve(const Options& o) {
  const RunConfig rc = resolve(o);
  const auto& spec = rc.spec;
  const Scenario sc = build_scenario(spec.scenario, spec.base_seed);
  Rng rng(derive_seed(spec.base_seed, 4));
  SolverConfig solver = spec.solver;
  solver.threads = spec.threads;
  const SolveResult r = run_algorithm(sc, solver, rng);

  std::printf("R            %.6e bit/s\n", r.total);
  std::printf("demand       %.6e bit/s\n", sc.traffic.demand);
  std::printf("psi          %.6f\n", r.survivability);
  std::printf("selected     ");
  for (auto l : r.selection.members()) std::printf("%zu ", l);
  std::printf("\niterations   %zu%s\n", r.iterations, r.converged ? " (converged)" : "");
  std::printf("wall time    %.3f s\n", r.wall_seconds);

  if (!o.out.empty()) {
    const fs::path path = fs::path(rc.output_dir) / "solve.json";
    write_text(path, solve_dump(sc, r).dump(2) + "\n");
    write_text(manifest_path(path), make_manifest("solve", spec, {spec.base_seed}).dump(2) + "\n");
    std::cout << path.string() << "\n";
  }
  return kExitOk;
}

int cmd_convergence(const Options& o) {
  const RunConfig rc = resolve(o);
  const TraceTable t = run_convergence(rc.spec);
  write_table(rc, "convergence", t, make_manifest("convergence", rc.spec, {t.seed}));
  return kExitOk;
}

int cmd_snapshot(const Options& o) {
  const RunConfig rc = resolve(o);
  const SnapshotTable t = run_snapshot(rc.spec);
  write_table(rc, "snapshot", t, make_manifest("snapshot", rc.spec, {t.seed}));
  return kExitOk;
}

int cmd_sweep_traffic(const Options& o) {
  const RunConfig rc = resolve(o);
  const ResultTable t = run_traffic_sweep(rc.spec);
  write_table(rc, "traffic_sweep", t, make_manifest("sweep-traffic", rc.spec, seeds_of(t)));
  return kExitOk;
}

int cmd_sweep_antennas(const Options& o) {
  const RunConfig rc = resolve(o);
  const ResultTable t = run_antenna_sweep(rc.spec);
  write_table(rc, "antenna_sweep", t, make_manifest("sweep-antennas", rc.spec, seeds_of(t)));
  return kExitOk;
}

int cmd_validate(const Options& o) {
  const RunConfig rc = resolve(o);
  bool all = true;
  for (const auto& c : run_validation(rc.spec, rc.spec.base_seed)) {
    std::printf("%-4s %-22s worst=%.3e tol=%.3g n=%zu\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.worst,
                c.tolerance, c.samples);
    all = all && c.passed;
  }
  return all ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RIS-assisted backhaul traffic redistribution"};
  app.set_version_flag("--version", std::string(RISBR_VERSION));
  app.require_subcommand(1);

  Options opt;
  auto add_common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config, "JSON run configuration");
    sub->add_option("--seed", opt.seed, "base seed (overrides experiment.base_seed)");
    sub->add_flag("--no-ris", opt.no_ris, "force M = 0");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--format", opt.format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--strategy", opt.strategy, "outer|per-iter|greedy")
        ->check(CLI::IsMember({"outer", "per-iter", "greedy"}));
  };

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Command commands[] = {
      {"solve", "optimize one realization and print the result", cmd_solve},
      {"convergence", "per-iteration objective and iterate changes", cmd_convergence},
      {"snapshot", "per-BS local and redistributed traffic", cmd_snapshot},
      {"sweep-traffic", "mean R and psi versus traffic intensity", cmd_sweep_traffic},
      {"sweep-antennas", "mean R and psi versus antenna count", cmd_sweep_antennas},
      {"validate", "run the fast invariant checks", cmd_validate},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    subs.emplace_back(sub, &c);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    for (const auto& [sub, cmd] : subs)
      if (sub->parsed()) return cmd->run(opt);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidInput& e) {
    std::cerr << "error: invalid configuration: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalFailure& e) {
    std::cerr << "error: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
