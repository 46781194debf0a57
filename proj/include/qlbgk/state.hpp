#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <string>

#include "qlbgk/grid.hpp"
#include "qlbgk/linalg.hpp"

namespace qlbgk {

/// Spectral representation rho = sum_p w_p |phi_p><phi_p| of a positive
/// trace-class matrix. Weights are nonnegative and descending; modes are
/// dx-orthonormal columns. Immutable once built.
class DensityOperator {
public:
  DensityOperator(Grid grid, RealVector weights, Eigen::MatrixXcd modes,
                  double discarded_mass = 0.0);

  /// Builds the operator from a Hermitian kernel (diagonal = density).
  /// Weights in (-1e-12 * max(1, trace), 0) are clamped to zero; anything
  /// more negative throws PositivityError. Zero weights are dropped.
  static DensityOperator from_kernel(const Grid& grid,
                                     const Eigen::MatrixXcd& kernel,
                                     double discarded_mass = 0.0);

  const Grid& grid() const noexcept { return grid_; }
  const RealVector& weights() const noexcept { return weights_; }
  const Eigen::MatrixXcd& modes() const noexcept { return modes_; }
  int mode_count() const noexcept { return static_cast<int>(weights_.size()); }
  bool empty() const noexcept { return weights_.size() == 0; }

  /// Cumulative mass removed by truncation since the initial condition.
  double discarded_mass() const noexcept { return discarded_mass_; }

  /// Same spectrum, modes replaced (used by unitary sub-steps).
  DensityOperator with_modes(Eigen::MatrixXcd modes) const;

private:
  Grid grid_;
  RealVector weights_;
  Eigen::MatrixXcd modes_;
  double discarded_mass_;
};

/// n_i = sum_p w_p |phi_{p,i}|^2.
RealVector local_density(const DensityOperator& rho);

/// sum_p w_p, equal to dx * sum_i n_i.
double trace(const DensityOperator& rho);

/// Drops modes with weight below `threshold` and adds their mass to the
/// discarded-mass ledger.
DensityOperator truncate(const DensityOperator& rho, double threshold);

/// Truncates, then rescales the kept weights so the trace is unchanged.
/// The dropped mass still goes to the ledger.
DensityOperator truncate_preserving_trace(const DensityOperator& rho,
                                          double threshold);

/// Dense kernel sum_p w_p phi_p phi_p^dagger; its diagonal is local_density.
Eigen::MatrixXcd assemble_matrix(const DensityOperator& rho);

/// Tr(rho log rho - rho) + Tr(H0 rho), with 0 log 0 = 0.
double free_energy(const DensityOperator& rho, const TridiagonalOperator& h0);

/// Projector-level distance max|K_a - K_b| between the assembled kernels.
double kernel_distance(const DensityOperator& a, const DensityOperator& b);

/// Checkpoint container:
/// {"format": "qlbgk-density-operator", "version": 1, "grid_points": N,
///  "discarded_mass": m, "weights": [...], "modes_real": [[...]],
///  "modes_imag": [[...]]}, modes stored one array per mode.
nlohmann::json to_json(const DensityOperator& rho);
DensityOperator density_operator_from_json(const nlohmann::json& j);

void save_density_operator(const DensityOperator& rho, const std::string& path);
DensityOperator load_density_operator(const std::string& path);

} // namespace qlbgk
