#include "qlbgk/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "qlbgk/error.hpp"
#include "qlbgk/qdd.hpp"

#ifndef QLBGK_VERSION
#define QLBGK_VERSION "unknown"
#endif

namespace qlbgk {

namespace fs = std::filesystem;

namespace {

bool same_time(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a));
}

int stride_for(double interval, double step) {
  return std::max(1, static_cast<int>(std::llround(interval / step)));
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

double mass_drift(const Trajectory& t) {
  if (t.snapshots.empty()) return 0.0;
  const double m0 = t.snapshots.front().trace;
  double drift = 0.0;
  for (const auto& s : t.snapshots) {
    drift = std::max(drift, std::abs(s.trace - m0) / m0);
  }
  return drift;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
    throw InvalidConfig("value of '" + key + "' is not a number: '" + value +
                        "'");
  }
  return out;
}

int parse_int(const std::string& key, const std::string& value) {
  int out = 0;
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw InvalidConfig("value of '" + key + "' is not an integer: '" + value +
                        "'");
  }
  return out;
}

struct Field {
  const char* key;
  std::function<void(SimConfig&, const std::string&)> set;
  std::function<std::string(const SimConfig&)> get;
};

template <typename T>
Field real_field(const char* key, T SimConfig::*member) {
  return {key,
          [key, member](SimConfig& c, const std::string& v) {
            c.*member = parse_double(key, v);
          },
          [member](const SimConfig& c) { return format_double(c.*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"grid_points",
       [](SimConfig& c, const std::string& v) {
         c.grid_points = parse_int("grid_points", v);
       },
       [](const SimConfig& c) { return std::to_string(c.grid_points); }},
      real_field("alpha", &SimConfig::alpha),
      real_field("beta", &SimConfig::beta),
      real_field("epsilon", &SimConfig::epsilon),
      real_field("time_step", &SimConfig::qle_time_step),
      real_field("qdd_time_step", &SimConfig::qdd_time_step),
      real_field("final_time", &SimConfig::final_time),
      real_field("tolerance", &SimConfig::tolerance),
      {"max_iterations",
       [](SimConfig& c, const std::string& v) {
         c.max_iterations = parse_int("max_iterations", v);
       },
       [](const SimConfig& c) { return std::to_string(c.max_iterations); }},
      real_field("truncation", &SimConfig::truncation),
      real_field("snapshot_interval", &SimConfig::snapshot_interval),
      real_field("barrier_height", &SimConfig::barrier_height),
      real_field("barrier_width", &SimConfig::barrier_width),
      real_field("barrier_center", &SimConfig::barrier_center),
      real_field("tilt", &SimConfig::tilt),
      real_field("packet_center", &SimConfig::packet_center),
      real_field("packet_width", &SimConfig::packet_width),
      real_field("packet_floor", &SimConfig::packet_floor),
  };
  return table;
}

} // namespace

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  (void)ec;
  return std::string(buf, ptr);
}

std::string library_version() { return QLBGK_VERSION; }

double space_time_error(const Trajectory& a, const Trajectory& b,
                        const Grid& grid) {
  if (a.snapshots.size() != b.snapshots.size()) {
    throw InvalidArgument("space_time_error: snapshot counts differ");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
    const Snapshot& sa = a.snapshots[k];
    const Snapshot& sb = b.snapshots[k];
    if (!same_time(sa.time, sb.time)) {
      throw InvalidArgument("space_time_error: snapshot times differ");
    }
    if (sa.density.size() != grid.size() || sb.density.size() != grid.size()) {
      throw InvalidArgument("space_time_error: density length mismatch");
    }
    num += (sa.density - sb.density).squaredNorm();
    den += sb.density.squaredNorm();
  }
  // Uniform snapshot spacing: dx and h_snap cancel in the ratio.
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

ComparisonReport run_comparison(const Scenario& scenario,
                                const SimConfig& config) {
  config.validate();
  ComparisonReport report;
  report.scenario = scenario.name;
  report.epsilon = config.epsilon;
  report.x = scenario.grid.nodes();

  auto start = std::chrono::steady_clock::now();
  const QleSolver qle(scenario.grid, config.qle(), scenario.v_ext_run);
  Trajectory qle_traj =
      qle.run(scenario.rho0, config.final_time,
              stride_for(config.snapshot_interval, config.qle_time_step));
  report.qle_seconds = seconds_since(start);

  start = std::chrono::steady_clock::now();
  const QddSolver qdd(scenario.grid, config.qdd(), scenario.v_ext_run);
  Trajectory qdd_traj =
      qdd.run(local_density(scenario.rho0), config.final_time,
              stride_for(config.snapshot_interval, config.qdd_time_step));
  report.qdd_seconds = seconds_since(start);

  report.qle_max_step_mass_change = qle_traj.max_step_mass_change;
  report.qdd_max_step_mass_change = qdd_traj.max_step_mass_change;
  report.qle_mass_drift = mass_drift(qle_traj);
  report.qdd_mass_drift = mass_drift(qdd_traj);

  // Keep the snapshots present in both runs.
  report.qle = qle_traj;
  report.qdd = qdd_traj;
  report.qle.snapshots.clear();
  report.qdd.snapshots.clear();
  std::size_t j = 0;
  for (const Snapshot& s : qle_traj.snapshots) {
    while (j < qdd_traj.snapshots.size() &&
           qdd_traj.snapshots[j].time < s.time &&
           !same_time(qdd_traj.snapshots[j].time, s.time)) {
      ++j;
    }
    if (j == qdd_traj.snapshots.size()) break;
    if (same_time(qdd_traj.snapshots[j].time, s.time)) {
      report.qle.snapshots.push_back(s);
      report.qdd.snapshots.push_back(qdd_traj.snapshots[j]);
    }
  }

  for (std::size_t k = 0; k < report.qle.snapshots.size(); ++k) {
    const RealVector& a = report.qle.snapshots[k].density;
    const RealVector& b = report.qdd.snapshots[k].density;
    report.times.push_back(report.qle.snapshots[k].time);
    report.snapshot_errors.push_back((a - b).norm() / b.norm());
  }
  report.error = space_time_error(report.qle, report.qdd, scenario.grid);
  return report;
}

double hilbert_schmidt_distance(const DensityOperator& a,
                                const DensityOperator& b) {
  return a.grid().dx() * (assemble_matrix(a) - assemble_matrix(b)).norm();
}

double observed_order(const std::vector<double>& steps,
                      const std::vector<double>& errors) {
  if (steps.size() != errors.size() || steps.size() < 2) {
    throw InvalidArgument("observed_order needs at least two points");
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double m = static_cast<double>(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double x = std::log(steps[i]);
    const double y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

ConvergenceStudy run_convergence_study(const Scenario& scenario,
                                       const SimConfig& config,
                                       std::vector<double> steps,
                                       double reference_step) {
  if (steps.empty()) throw InvalidConfig("convergence study needs step sizes");
  std::sort(steps.begin(), steps.end(), std::greater<>());
  if (!(reference_step > 0.0) || reference_step > steps.back() / 4.0 * (1 + 1e-12)) {
    throw InvalidConfig("reference step must be at most min(steps) / 4");
  }
  auto final_state = [&](double h) {
    SimConfig c = config;
    c.qle_time_step = h;
    c.snapshot_interval = h;
    const QleSolver solver(scenario.grid, c.qle(), scenario.v_ext_run);
    const int n = static_cast<int>(std::llround(config.final_time / h));
    if (std::abs(n * h - config.final_time) > 1e-9 * config.final_time) {
      throw InvalidConfig("final_time must be a multiple of every step");
    }
    QleState state{scenario.rho0, std::nullopt, 0.0, 0};
    for (int k = 0; k < n; ++k) state = solver.step(state);
    return state.rho;
  };

  ConvergenceStudy study;
  study.reference_step = reference_step;
  const DensityOperator reference = final_state(reference_step);
  std::vector<double> errs;
  for (double h : steps) {
    ConvergenceRow row;
    row.time_step = h;
    row.error = hilbert_schmidt_distance(final_state(h), reference);
    row.order = std::numeric_limits<double>::quiet_NaN();
    if (!study.rows.empty()) {
      const ConvergenceRow& prev = study.rows.back();
      row.order = std::log(prev.error / row.error) / std::log(prev.time_step / h);
      if (row.error >= prev.error) study.monotone = false;
    }
    study.rows.push_back(row);
    errs.push_back(row.error);
  }
  study.fitted_order =
      steps.size() >= 2 ? observed_order(steps, errs)
                        : std::numeric_limits<double>::quiet_NaN();
  return study;
}

std::string plot_script(const ComparisonReport& report,
                        const std::string& csv_file,
                        const std::string& image_file) {
  std::ostringstream s;
  s << "# QLE vs QDD densities";
  if (!report.scenario.empty()) {
    s << ", scenario " << report.scenario << ", eps = "
      << format_double(report.epsilon);
  }
  s << "\n";
  if (report.times.empty()) return s.str();

  s << "set datafile separator ','\n"
    << "set terminal pngcairo size 1200,900\n"
    << "set output '" << image_file << "'\n"
    << "set multiplot layout 2,2 title 'relative space-time l2 error "
    << format_double(report.error) << "'\n"
    << "set xlabel 'x'\nset ylabel 'n'\n";
  const std::size_t last = report.times.size() - 1;
  for (int panel = 1; panel <= 4; ++panel) {
    // Quarters of the run, rounded to the nearest snapshot.
    const std::size_t k = static_cast<std::size_t>(
        std::llround(static_cast<double>(last) * panel / 4.0));
    const std::string t = format_double(report.times[k]);
    s << "set title 't = " << t << "'\n"
      << "plot '" << csv_file << "' every ::1 using 2:(abs($1-" << t
      << ")<1e-12 ? $3 : 1/0) with lines title 'QLE', \\\n"
      << "     '' every ::1 using 2:(abs($1-" << t
      << ")<1e-12 ? $4 : 1/0) with lines dashtype 2 title 'QDD'\n";
  }
  s << "unset multiplot\n";
  return s.str();
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["version"] = version;
  j["config"] = config;
  auto t = nlohmann::json::object();
  for (const auto& [phase, sec] : timings) t[phase] = sec;
  j["timings_seconds"] = t;
  j["outputs"] = outputs;
  return j;
}

std::string write_comparison_csv(const ComparisonReport& report,
                                 const fs::path& dir) {
  const std::string name = "comparison.csv";
  std::ofstream out = open_output(dir / name);
  out << "t,x,n_qle,n_qdd\n";
  for (std::size_t k = 0; k < report.times.size(); ++k) {
    const std::string t = format_double(report.times[k]);
    const RealVector& a = report.qle.snapshots[k].density;
    const RealVector& b = report.qdd.snapshots[k].density;
    for (Eigen::Index i = 0; i < report.x.size(); ++i) {
      out << t << ',' << format_double(report.x(i)) << ','
          << format_double(a(i)) << ',' << format_double(b(i)) << '\n';
    }
  }
  return name;
}

std::string write_snapshot_table(const ComparisonReport& report,
                                 const fs::path& dir) {
  const std::string name = "snapshots.csv";
  std::ofstream out = open_output(dir / name);
  out << "t,relative_error,trace_qle,mass_qdd\n";
  for (std::size_t k = 0; k < report.times.size(); ++k) {
    out << format_double(report.times[k]) << ','
        << format_double(report.snapshot_errors[k]) << ','
        << format_double(report.qle.snapshots[k].trace) << ','
        << format_double(report.qdd.snapshots[k].trace) << '\n';
  }
  return name;
}

std::string write_comparison_summary(const ComparisonReport& report,
                                     const fs::path& dir) {
  const std::string name = "summary.json";
  nlohmann::json j;
  j["scenario"] = report.scenario;
  j["epsilon"] = report.epsilon;
  j["space_time_error"] = report.error;
  j["snapshot_count"] = report.times.size();
  j["qle_mass_drift"] = report.qle_mass_drift;
  j["qdd_mass_drift"] = report.qdd_mass_drift;
  j["qle_max_step_mass_change"] = report.qle_max_step_mass_change;
  j["qdd_max_step_mass_change"] = report.qdd_max_step_mass_change;
  j["qle_failed"] = report.qle.failed;
  j["qdd_failed"] = report.qdd.failed;
  if (report.qle.failed) j["qle_failure"] = report.qle.failure;
  if (report.qdd.failed) j["qdd_failure"] = report.qdd.failure;
  open_output(dir / name) << j.dump(2) << '\n';
  return name;
}

std::string emit_plot_script(const ComparisonReport& report,
                             const std::string& csv_file, const fs::path& dir) {
  const std::string name = "comparison.gp";
  open_output(dir / name) << plot_script(report, csv_file);
  return name;
}

std::string write_trajectory_csv(const Trajectory& traj, const Grid& grid,
                                 const std::string& column, const fs::path& dir,
                                 const std::string& file_name) {
  std::ofstream out = open_output(dir / file_name);
  out << "t,x," << column << '\n';
  for (const Snapshot& s : traj.snapshots) {
    const std::string t = format_double(s.time);
    for (int i = 0; i < grid.size(); ++i) {
      out << t << ',' << format_double(grid.node(i)) << ','
          << format_double(s.density(i)) << '\n';
    }
  }
  return file_name;
}

std::string write_convergence_csv(const ConvergenceStudy& study,
                                  const fs::path& dir) {
  const std::string name = "convergence.csv";
  std::ofstream out = open_output(dir / name);
  out << "h,error,order\n";
  for (const ConvergenceRow& r : study.rows) {
    out << format_double(r.time_step) << ',' << format_double(r.error) << ','
        << (std::isnan(r.order) ? std::string() : format_double(r.order))
        << '\n';
  }
  return name;
}

std::string write_manifest(RunManifest manifest, const fs::path& dir) {
  const std::string name = "manifest.json";
  manifest.outputs.push_back(name);
  open_output(dir / name) << manifest.to_json().dump(2) << '\n';
  return name;
}

KeyValues parse_key_values(const std::string& text) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidConfig("line " + std::to_string(lineno) +
                          ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw InvalidConfig("line " + std::to_string(lineno) +
                          ": empty key or value");
    }
    if (!out.emplace(key, value).second) {
      throw InvalidConfig("line " + std::to_string(lineno) +
                          ": duplicate key '" + key + "'");
    }
  }
  return out;
}

KeyValues read_key_value_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot read config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_key_values(text.str());
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys{"scenario"};
  for (const Field& f : fields()) keys.emplace_back(f.key);
  return keys;
}

void apply_config(SimConfig& config, const KeyValues& values) {
  if (auto it = values.find("scenario"); it != values.end()) {
    config = preset(it->second);
  }
  for (const auto& [key, value] : values) {
    if (key == "scenario") continue;
    const auto& table = fields();
    auto f = std::find_if(table.begin(), table.end(),
                          [&](const Field& fd) { return key == fd.key; });
    if (f == table.end()) throw InvalidConfig("unknown config key '" + key + "'");
    f->set(config, value);
  }
}

KeyValues config_echo(const SimConfig& config) {
  KeyValues out;
  out["scenario"] = config.scenario;
  for (const Field& f : fields()) out[f.key] = f.get(config);
  return out;
}

} // namespace qlbgk
