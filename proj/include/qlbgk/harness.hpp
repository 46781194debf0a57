#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qlbgk/qle.hpp"
#include "qlbgk/scenarios.hpp"

namespace qlbgk {

/// sqrt(sum_k sum_i (n_a - n_b)^2 dx h_snap) / sqrt(sum_k sum_i n_b^2 dx h_snap)
/// over all snapshots, b being the reference. Snapshot times must agree.
double space_time_error(const Trajectory& a, const Trajectory& b,
                        const Grid& grid);

struct ComparisonReport {
  std::string scenario;
  double epsilon = 0.0;
  double error = 0.0;
  std::vector<double> times;
  /// Relative l2 error at each snapshot.
  std::vector<double> snapshot_errors;
  /// max_k |m_k - m_0| / m_0 over snapshots.
  double qle_mass_drift = 0.0;
  double qdd_mass_drift = 0.0;
  double qle_max_step_mass_change = 0.0;
  double qdd_max_step_mass_change = 0.0;
  double qle_seconds = 0.0;
  double qdd_seconds = 0.0;
  Trajectory qle;
  Trajectory qdd;
  RealVector x;

  bool failed() const { return qle.failed || qdd.failed; }
};

/// Runs QLE from rho0 and QDD from n[rho0] over [0, T], aligned every
/// config.snapshot_interval. The error covers the snapshots both runs reached.
ComparisonReport run_comparison(const Scenario& scenario,
                                const SimConfig& config);

struct ConvergenceRow {
  double time_step = 0.0;
  double error = 0.0;
  /// log2-style order against the previous row; NaN on the first row.
  double order = 0.0;
};

struct ConvergenceStudy {
  double reference_step = 0.0;
  std::vector<ConvergenceRow> rows;
  /// Least-squares slope of log(error) against log(h).
  double fitted_order = 0.0;
  /// False when an error fails to decrease with h (reported, not fatal).
  bool monotone = true;
};

/// dx * ||K_a - K_b||_F, the Hilbert-Schmidt distance of two operators.
double hilbert_schmidt_distance(const DensityOperator& a,
                                const DensityOperator& b);

/// Least-squares slope of log(errors) against log(steps).
double observed_order(const std::vector<double>& steps,
                      const std::vector<double>& errors);

/// QLE self-convergence at config.final_time against a run with
/// reference_step, which must be <= min(steps) / 4.
ConvergenceStudy run_convergence_study(const Scenario& scenario,
                                       const SimConfig& config,
                                       std::vector<double> steps,
                                       double reference_step);

/// gnuplot script with a 2x2 grid of density panels at four snapshot times
/// read from `csv_file` (columns t,x,n_qle,n_qdd). An empty report gives the
/// header only.
std::string plot_script(const ComparisonReport& report,
                        const std::string& csv_file,
                        const std::string& image_file = "comparison.png");

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::string version;
  std::vector<std::pair<std::string, double>> timings;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const;
};

std::string library_version();

/// Shortest round-trip decimal form of x.
std::string format_double(double x);

// Output writers. Each returns the file name it created inside `dir`.

std::string write_comparison_csv(const ComparisonReport& report,
                                 const std::filesystem::path& dir);
std::string write_snapshot_table(const ComparisonReport& report,
                                 const std::filesystem::path& dir);
std::string write_comparison_summary(const ComparisonReport& report,
                                     const std::filesystem::path& dir);
std::string emit_plot_script(const ComparisonReport& report,
                             const std::string& csv_file,
                             const std::filesystem::path& dir);
/// Single-solver trajectory as t,x,<column>.
std::string write_trajectory_csv(const Trajectory& traj, const Grid& grid,
                                 const std::string& column,
                                 const std::filesystem::path& dir,
                                 const std::string& file_name);
std::string write_convergence_csv(const ConvergenceStudy& study,
                                  const std::filesystem::path& dir);
/// Lists itself in `outputs` before writing.
std::string write_manifest(RunManifest manifest,
                           const std::filesystem::path& dir);

// Flat key=value configuration: one pair per line, '#' starts a comment,
// blank lines ignored. Syntax errors and unknown keys throw InvalidConfig.

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
KeyValues read_key_value_file(const std::filesystem::path& path);

/// Applies `values` to `config`. A "scenario" key naming a preset resets the
/// config to that preset first; the remaining keys are applied on top.
void apply_config(SimConfig& config, const KeyValues& values);

/// Every field of `config` as key=value pairs that apply_config accepts.
KeyValues config_echo(const SimConfig& config);

std::vector<std::string> config_keys();

} // namespace qlbgk
