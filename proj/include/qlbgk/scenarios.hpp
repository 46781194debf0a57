#pragma once

#include <map>
#include <string>
#include <vector>

#include "qlbgk/grid.hpp"
#include "qlbgk/qdd.hpp"
#include "qlbgk/qle.hpp"
#include "qlbgk/state.hpp"

namespace qlbgk {

/// Every numeric knob of a run. Field names double as the keys of the flat
/// key=value config format (see config_keys()).
struct SimConfig {
  std::string scenario = "maxwellian";
  int grid_points = 400;
  double alpha = 1.0;
  double beta = 0.015;
  double epsilon = 0.01;
  double qle_time_step = 1e-4;
  double qdd_time_step = 1e-4;
  double final_time = 0.1;
  double tolerance = 1e-7;
  int max_iterations = 500; ///< NLCG iteration cap
  double truncation = 1e-7;
  /// Time between recorded snapshots; must be a multiple of both steps.
  double snapshot_interval = 1e-3;
  double barrier_height = 2.0;
  double barrier_width = 0.05;
  double barrier_center = 0.5;
  double tilt = -2.0;
  double packet_center = 0.42;
  double packet_width = 0.075;
  double packet_floor = 5e-3;

  /// Throws InvalidConfig.
  void validate() const;

  QleConfig qle() const;
  QddConfig qdd() const;
  Grid grid() const { return Grid(grid_points); }
};

/// Named parameter sets. "default" and the scenario names share the
/// reference parameters; "wave-packets-eps0.0025" uses eps = 0.0025 and a
/// QLE step of 5e-6. Throws InvalidConfig for an unknown name.
SimConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// Two barriers of the given height and width around a well of the same
/// width centered at `center`. Jumps sit on cell midpoints.
RealVector double_barrier_potential(const Grid& grid, double height = 2.0,
                                    double width = 0.05, double center = 0.5);

/// base_i + slope * x_i.
RealVector tilted_potential(const RealVector& base, double slope,
                            const Grid& grid);

/// exp(-(H0 + V0)) / Tr, truncated at `threshold` and renormalized.
DensityOperator ic_maxwellian(const Grid& grid, double beta,
                              const RealVector& v_ext0,
                              double threshold = 1e-7);

/// f(H0 + V0) / Tr with f(x) = 1 / (1 + x^2).
DensityOperator ic_hamiltonian_function(const Grid& grid, double beta,
                                        const RealVector& v_ext0,
                                        double threshold = 1e-7);

/// chi gamma0 chi / Tr with chi = exp(-(x - x0)^2 / sigma^2) + eta and
/// gamma0 = sum_{p=1}^{5} exp(-(8 pi beta p)^2) |e_p><e_p|,
/// e_p(x) = exp(8 i pi p x).
DensityOperator ic_wave_packets(const Grid& grid, double beta,
                                double x0 = 0.42, double sigma = 0.075,
                                double eta = 5e-3, double threshold = 1e-7);

struct Scenario {
  std::string name;
  Grid grid{1};
  /// Potential used to build rho0.
  RealVector v_ext_initial;
  /// Potential seen by both solvers for t > 0.
  RealVector v_ext_run;
  DensityOperator rho0;
  SimConfig params;
};

/// Builds config.scenario (maxwellian, hamiltonian-function, wave-packets).
Scenario make_scenario(const SimConfig& config);

} // namespace qlbgk
