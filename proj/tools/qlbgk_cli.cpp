// qlbgk: run the quantum Liouville-BGK and quantum drift-diffusion solvers
// on the built-in scenarios.
//
// Exit codes: 0 success, 1 other error, 2 solver non-convergence,
// 3 invalid configuration.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "qlbgk/error.hpp"
#include "qlbgk/harness.hpp"
#include "qlbgk/qdd.hpp"
#include "qlbgk/qle.hpp"
#include "qlbgk/scenarios.hpp"

namespace fs = std::filesystem;
using namespace qlbgk;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNoConvergence = 2;
constexpr int kExitInvalidConfig = 3;

struct Flags {
  std::optional<std::string> scenario;
  std::optional<double> epsilon;
  std::optional<double> beta;
  std::optional<double> alpha;
  std::optional<int> grid_points;
  std::optional<double> time_step;
  std::optional<double> final_time;
  std::optional<double> tolerance;
  std::optional<double> snapshot_stride;
  std::optional<std::string> out_dir;
  std::optional<std::string> config_file;
  std::vector<double> steps{4e-4, 2e-4, 1e-4};
  double reference_step = 2.5e-5;
};

void add_common_options(CLI::App& app, Flags& f) {
  app.add_option("--scenario", f.scenario,
                 "maxwellian, hamiltonian-function, wave-packets or "
                 "wave-packets-eps0.0025");
  app.add_option("--epsilon", f.epsilon, "scaled mean free path");
  app.add_option("--beta", f.beta, "scaled de Broglie length");
  app.add_option("--alpha", f.alpha, "scaled Debye length");
  app.add_option("--grid-points", f.grid_points, "interior grid points N");
  app.add_option("--time-step", f.time_step,
                 "time step of the solver being run (QLE for compare and "
                 "converge)");
  app.add_option("--final-time", f.final_time, "final time T");
  app.add_option("--tolerance", f.tolerance, "NLCG tolerance");
  app.add_option("--snapshot-stride", f.snapshot_stride,
                 "time between recorded snapshots");
  app.add_option("--out-dir", f.out_dir,
                 "output directory (default: $QLBGK_OUT_DIR or qlbgk-out)");
  app.add_option("--config", f.config_file, "flat key=value config file");
}

struct Resolved {
  SimConfig config;
  fs::path out_dir;
  bool final_time_given = false;
};

Resolved resolve(const Flags& f, const std::string& command) {
  KeyValues values;
  std::optional<std::string> file_out_dir;
  if (f.config_file) {
    values = read_key_value_file(*f.config_file);
    if (auto it = values.find("out_dir"); it != values.end()) {
      file_out_dir = it->second;
      values.erase(it);
    }
  }
  auto set = [&](const char* key, const auto& opt) {
    if (!opt) return;
    if constexpr (std::is_same_v<std::decay_t<decltype(*opt)>, std::string>) {
      values[key] = *opt;
    } else if constexpr (std::is_same_v<std::decay_t<decltype(*opt)>, int>) {
      values[key] = std::to_string(*opt);
    } else {
      values[key] = format_double(*opt);
    }
  };
  set("scenario", f.scenario);
  set("epsilon", f.epsilon);
  set("beta", f.beta);
  set("alpha", f.alpha);
  set("grid_points", f.grid_points);
  set(command == "qdd" ? "qdd_time_step" : "time_step", f.time_step);
  set("final_time", f.final_time);
  set("tolerance", f.tolerance);
  set("snapshot_interval", f.snapshot_stride);

  Resolved r;
  r.final_time_given = values.count("final_time") > 0;
  apply_config(r.config, values);
  if (command == "converge" && !r.final_time_given) r.config.final_time = 0.01;
  r.config.validate();

  if (f.out_dir) {
    r.out_dir = *f.out_dir;
  } else if (const char* env = std::getenv("QLBGK_OUT_DIR"); env && *env) {
    r.out_dir = env;
  } else if (file_out_dir) {
    r.out_dir = *file_out_dir;
  } else {
    r.out_dir = "qlbgk-out";
  }
  return r;
}

int failure_code(const Trajectory& t) {
  if (!t.failed) return kExitOk;
  std::cerr << "solver failed: " << t.failure << "\n";
  try {
    if (t.error) std::rethrow_exception(t.error);
  } catch (const ConvergenceError&) {
    return kExitNoConvergence;
  } catch (...) {
  }
  return kExitError;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

RunManifest start_manifest(const std::string& command, const SimConfig& c) {
  RunManifest m;
  m.command = command;
  m.config = config_echo(c);
  m.version = library_version();
  return m;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

nlohmann::json trajectory_summary(const Trajectory& t, const SimConfig& c) {
  nlohmann::json j;
  j["scenario"] = c.scenario;
  j["epsilon"] = c.epsilon;
  j["final_time"] = t.final_time;
  j["snapshot_count"] = t.snapshots.size();
  j["max_step_mass_change"] = t.max_step_mass_change;
  if (!t.snapshots.empty()) {
    const double m0 = t.snapshots.front().trace;
    j["initial_mass"] = m0;
    j["final_mass"] = t.snapshots.back().trace;
    j["discarded_mass"] = t.snapshots.back().discarded_mass;
  }
  j["failed"] = t.failed;
  if (t.failed) j["failure"] = t.failure;
  return j;
}

int run_single(const Resolved& r, bool qle) {
  const std::string command = qle ? "qle" : "qdd";
  RunManifest manifest = start_manifest(command, r.config);
  auto t0 = std::chrono::steady_clock::now();
  const Scenario scenario = make_scenario(r.config);
  manifest.timings.emplace_back("setup", seconds_since(t0));

  t0 = std::chrono::steady_clock::now();
  Trajectory traj;
  if (qle) {
    const QleSolver solver(scenario.grid, r.config.qle(), scenario.v_ext_run);
    traj = solver.run(scenario.rho0, r.config.final_time,
                      static_cast<int>(std::llround(r.config.snapshot_interval /
                                                    r.config.qle_time_step)));
  } else {
    const QddSolver solver(scenario.grid, r.config.qdd(), scenario.v_ext_run);
    traj = solver.run(local_density(scenario.rho0), r.config.final_time,
                      static_cast<int>(std::llround(r.config.snapshot_interval /
                                                    r.config.qdd_time_step)));
  }
  manifest.timings.emplace_back(command, seconds_since(t0));

  fs::create_directories(r.out_dir);
  manifest.outputs.push_back(write_trajectory_csv(
      traj, scenario.grid, qle ? "n_qle" : "n_qdd", r.out_dir, command + ".csv"));
  write_json(r.out_dir / "summary.json", trajectory_summary(traj, r.config));
  manifest.outputs.push_back("summary.json");
  write_manifest(manifest, r.out_dir);

  std::cout << command << ": " << traj.snapshots.size() << " snapshots to t = "
            << traj.final_time << ", max step mass change "
            << traj.max_step_mass_change << "\n";
  return failure_code(traj);
}

int run_compare(const Resolved& r) {
  RunManifest manifest = start_manifest("compare", r.config);
  auto t0 = std::chrono::steady_clock::now();
  const Scenario scenario = make_scenario(r.config);
  manifest.timings.emplace_back("setup", seconds_since(t0));
  const ComparisonReport report = run_comparison(scenario, r.config);
  manifest.timings.emplace_back("qle", report.qle_seconds);
  manifest.timings.emplace_back("qdd", report.qdd_seconds);

  fs::create_directories(r.out_dir);
  const std::string csv = write_comparison_csv(report, r.out_dir);
  manifest.outputs.push_back(csv);
  manifest.outputs.push_back(write_snapshot_table(report, r.out_dir));
  manifest.outputs.push_back(write_comparison_summary(report, r.out_dir));
  manifest.outputs.push_back(emit_plot_script(report, csv, r.out_dir));
  write_manifest(manifest, r.out_dir);

  std::cout << "compare " << report.scenario << " eps = " << report.epsilon
            << ": space-time relative l2 error " << report.error
            << " over " << report.times.size() << " snapshots\n"
            << "mass drift qle " << report.qle_mass_drift << ", qdd "
            << report.qdd_mass_drift << "\n";
  const int a = failure_code(report.qle);
  const int b = failure_code(report.qdd);
  if (a == kExitNoConvergence || b == kExitNoConvergence) {
    return kExitNoConvergence;
  }
  return std::max(a, b);
}

int run_converge(const Resolved& r, const Flags& f) {
  RunManifest manifest = start_manifest("converge", r.config);
  auto t0 = std::chrono::steady_clock::now();
  const Scenario scenario = make_scenario(r.config);
  const ConvergenceStudy study =
      run_convergence_study(scenario, r.config, f.steps, f.reference_step);
  manifest.timings.emplace_back("study", seconds_since(t0));

  fs::create_directories(r.out_dir);
  manifest.outputs.push_back(write_convergence_csv(study, r.out_dir));
  nlohmann::json j;
  j["scenario"] = r.config.scenario;
  j["final_time"] = r.config.final_time;
  j["reference_step"] = study.reference_step;
  j["fitted_order"] = study.fitted_order;
  j["monotone"] = study.monotone;
  write_json(r.out_dir / "summary.json", j);
  manifest.outputs.push_back("summary.json");
  write_manifest(manifest, r.out_dir);

  for (const ConvergenceRow& row : study.rows) {
    std::cout << "h = " << row.time_step << "  error = " << row.error
              << "  order = " << row.order << "\n";
  }
  std::cout << "fitted order " << study.fitted_order << "\n";
  if (!study.monotone) std::cout << "warning: errors are not monotone in h\n";
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum Liouville-BGK vs quantum drift-diffusion solver"};
  app.require_subcommand(1);
  Flags flags;
  CLI::App* qle = app.add_subcommand("qle", "run the kinetic solver");
  CLI::App* qdd = app.add_subcommand("qdd", "run the drift-diffusion solver");
  CLI::App* compare =
      app.add_subcommand("compare", "run both solvers and compare densities");
  CLI::App* converge =
      app.add_subcommand("converge", "time-step self-convergence study");
  for (CLI::App* sub : {qle, qdd, compare, converge}) {
    add_common_options(*sub, flags);
  }
  converge->add_option("--steps", flags.steps, "time steps to test")
      ->delimiter(',');
  converge->add_option("--reference-step", flags.reference_step,
                       "time step of the reference run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalidConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const Resolved r = resolve(flags, command);
    if (command == "qle") return run_single(r, true);
    if (command == "qdd") return run_single(r, false);
    if (command == "compare") return run_compare(r);
    return run_converge(r, flags);
  } catch (const InvalidConfig& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const ConvergenceError& e) {
    std::cerr << "solver did not converge: " << e.what() << "\n";
    return kExitNoConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}
