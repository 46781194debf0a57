#include "qlbgk/scenarios.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "qlbgk/equilibrium.hpp"
#include "qlbgk/error.hpp"
#include "qlbgk/linalg.hpp"

namespace qlbgk {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidConfig(what);
}

bool is_multiple(double interval, double step) {
  const double r = interval / step;
  return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r);
}

/// Spectral operator with weights f(lambda_p) of H0 + V, unit trace.
template <typename F>
DensityOperator spectral_initial(const Grid& grid, double beta,
                                 const RealVector& v, double threshold, F f) {
  if (v.size() != grid.size()) {
    throw InvalidArgument("potential length does not match grid");
  }
  const SpectralDecomposition spec =
      eig_sym_tridiag(free_hamiltonian(grid, beta).plus_diagonal(v), grid);
  const double lmin = spec.eigenvalues(0);
  RealVector w(spec.eigenvalues.size());
  for (Eigen::Index p = 0; p < w.size(); ++p) {
    w(p) = f(spec.eigenvalues(p), lmin);
  }
  w /= w.sum();
  Eigen::Index kept = 0;
  while (kept < w.size() && w(kept) >= threshold) ++kept;
  // Eigenvalues ascend, so for decreasing f the kept weights are a prefix.
  RealVector wk = w.head(kept) / w.head(kept).sum();
  return DensityOperator(grid, std::move(wk),
                         spec.eigenvectors.leftCols(kept).cast<Complex>());
}

} // namespace

void SimConfig::validate() const {
  require(scenario == "maxwellian" || scenario == "hamiltonian-function" ||
              scenario == "wave-packets",
          "unknown scenario '" + scenario + "'");
  require(grid_points >= 8, "grid_points must be at least 8");
  require(alpha > 0.0 && std::isfinite(alpha), "alpha must be positive");
  require(beta > 0.0 && std::isfinite(beta), "beta must be positive");
  require(epsilon > 0.0 && std::isfinite(epsilon), "epsilon must be positive");
  require(qle_time_step > 0.0, "time_step must be positive");
  require(qdd_time_step > 0.0, "qdd_time_step must be positive");
  require(final_time >= 0.0 && std::isfinite(final_time),
          "final_time must be nonnegative");
  require(tolerance > 0.0 && tolerance < 1.0, "tolerance must be in (0, 1)");
  require(max_iterations >= 1, "max_iterations must be at least 1");
  require(truncation >= 0.0 && truncation < 1.0,
          "truncation must be in [0, 1)");
  require(snapshot_interval > 0.0, "snapshot_interval must be positive");
  require(is_multiple(snapshot_interval, qle_time_step),
          "snapshot_interval must be a multiple of time_step");
  require(is_multiple(snapshot_interval, qdd_time_step),
          "snapshot_interval must be a multiple of qdd_time_step");
  require(barrier_width > 0.0 && barrier_height >= 0.0,
          "barrier geometry must be positive");
  require(barrier_center - 1.5 * barrier_width > 0.0 &&
              barrier_center + 1.5 * barrier_width < 1.0,
          "barriers must lie inside (0, 1)");
  require(packet_width > 0.0 && packet_floor >= 0.0,
          "wave packet parameters must be positive");
}

QleConfig SimConfig::qle() const {
  QleConfig c;
  c.time_step = qle_time_step;
  c.epsilon = epsilon;
  c.beta = beta;
  c.alpha = alpha;
  c.truncation_threshold = truncation;
  c.equilibrium.tolerance = tolerance;
  c.equilibrium.max_iterations = max_iterations;
  c.equilibrium.truncation_threshold = truncation;
  return c;
}

QddConfig SimConfig::qdd() const {
  QddConfig c;
  c.time_step = qdd_time_step;
  c.beta = beta;
  c.alpha = alpha;
  c.equilibrium.tolerance = tolerance;
  c.equilibrium.max_iterations = max_iterations;
  c.equilibrium.truncation_threshold = truncation;
  return c;
}

std::vector<std::string> preset_names() {
  return {"default", "maxwellian", "hamiltonian-function",
          "wave-packets", "wave-packets-eps0.0025"};
}

SimConfig preset(const std::string& name) {
  SimConfig c;
  if (name == "default" || name == "maxwellian") return c;
  if (name == "hamiltonian-function" || name == "wave-packets") {
    c.scenario = name;
    return c;
  }
  if (name == "wave-packets-eps0.0025") {
    c.scenario = "wave-packets";
    c.epsilon = 0.0025;
    c.qle_time_step = 5e-6;
    return c;
  }
  throw InvalidConfig("unknown preset '" + name + "'");
}

RealVector double_barrier_potential(const Grid& grid, double height,
                                    double width, double center) {
  if (width < 2.0 * grid.dx()) {
    std::ostringstream msg;
    msg << "barrier width " << width << " is below two cells (dx = "
        << grid.dx() << "); grid too coarse";
    throw InvalidArgument(msg.str());
  }
  const double a = snap_to_midpoint(grid, center - 1.5 * width).snapped;
  const double b = snap_to_midpoint(grid, center - 0.5 * width).snapped;
  const double c = snap_to_midpoint(grid, center + 0.5 * width).snapped;
  const double d = snap_to_midpoint(grid, center + 1.5 * width).snapped;
  RealVector v = RealVector::Zero(grid.size());
  for (int i = 0; i < grid.size(); ++i) {
    const double x = grid.node(i);
    if ((x > a && x < b) || (x > c && x < d)) v(i) = height;
  }
  return v;
}

RealVector tilted_potential(const RealVector& base, double slope,
                            const Grid& grid) {
  if (base.size() != grid.size()) {
    throw InvalidArgument("potential length does not match grid");
  }
  return base + slope * grid.nodes();
}

DensityOperator ic_maxwellian(const Grid& grid, double beta,
                              const RealVector& v_ext0, double threshold) {
  return spectral_initial(grid, beta, v_ext0, threshold,
                          [](double l, double lmin) {
                            return std::exp(-(l - lmin));
                          });
}

DensityOperator ic_hamiltonian_function(const Grid& grid, double beta,
                                        const RealVector& v_ext0,
                                        double threshold) {
  return spectral_initial(grid, beta, v_ext0, threshold,
                          [](double l, double) { return 1.0 / (1.0 + l * l); });
}

DensityOperator ic_wave_packets(const Grid& grid, double beta, double x0,
                                double sigma, double eta, double threshold) {
  constexpr double pi = std::numbers::pi;
  const int n = grid.size();
  const RealVector x = grid.nodes();
  RealVector chi(n);
  for (int i = 0; i < n; ++i) {
    chi(i) = std::exp(-(x(i) - x0) * (x(i) - x0) / (sigma * sigma)) + eta;
  }
  // Columns chi * e_p scaled by sqrt(weight); the kernel is V V^dagger.
  Eigen::MatrixXcd v(n, 5);
  for (int p = 1; p <= 5; ++p) {
    const double k = 8.0 * pi * beta * p;
    const double w = std::exp(-k * k);
    ComplexVector e(n);
    for (int i = 0; i < n; ++i) e(i) = std::polar(1.0, 8.0 * pi * p * x(i));
    e /= std::sqrt(grid.dx() * e.squaredNorm());
    v.col(p - 1) = std::sqrt(w) * chi.cast<Complex>().cwiseProduct(e);
  }
  const DensityOperator raw =
      DensityOperator::from_kernel(grid, v * v.adjoint());
  const DensityOperator cut = truncate(raw, threshold);
  return DensityOperator(grid, cut.weights() / trace(cut), cut.modes());
}

Scenario make_scenario(const SimConfig& config) {
  config.validate();
  const Grid grid = config.grid();
  const RealVector v0 =
      double_barrier_potential(grid, config.barrier_height,
                               config.barrier_width, config.barrier_center);
  if (config.scenario == "wave-packets") {
    DensityOperator rho0 =
        ic_wave_packets(grid, config.beta, config.packet_center,
                        config.packet_width, config.packet_floor,
                        config.truncation);
    return {config.scenario, grid, v0, v0, std::move(rho0), config};
  }
  const RealVector v_run = tilted_potential(v0, config.tilt, grid);
  DensityOperator rho0 =
      config.scenario == "maxwellian"
          ? ic_maxwellian(grid, config.beta, v0, config.truncation)
          : ic_hamiltonian_function(grid, config.beta, v0, config.truncation);
  return {config.scenario, grid, v0, v_run, std::move(rho0), config};
}

} // namespace qlbgk
