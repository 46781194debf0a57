#pragma once

#include <Eigen/Dense>

#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "qlbgk/equilibrium.hpp"
#include "qlbgk/grid.hpp"
#include "qlbgk/state.hpp"
#include "qlbgk/tridiagonal_solve.hpp"

namespace qlbgk {

/// Parameters of the scaled Liouville-BGK + Poisson system and its stepper.
struct QleConfig {
  double time_step = 1e-4; ///< h
  double epsilon = 0.01;   ///< scaled mean free path
  double beta = 0.015;     ///< scaled de Broglie length
  double alpha = 1.0;      ///< scaled Debye length
  double truncation_threshold = 1e-7;
  /// Rescale the kept weights after truncation so the trace is unchanged.
  bool preserve_trace_on_truncation = true;
  /// Drop the Poisson coupling (alpha -> infinity limit).
  bool disable_poisson = false;
  EquilibriumOptions equilibrium;

  void validate() const;
};

/// One point of a trajectory, as handed to observers.
struct Snapshot {
  int step = 0;
  double time = 0.0;
  RealVector density;
  double trace = 0.0;
  double discarded_mass = 0.0;
  /// Filled by drift-diffusion runs only.
  RealVector chemical_potential;
  RealVector poisson_potential;
};

using SnapshotObserver = std::function<void(const Snapshot&)>;

struct Trajectory {
  std::vector<Snapshot> snapshots;
  bool failed = false;
  std::string failure;
  /// The exception that ended a failed run.
  std::exception_ptr error;
  double final_time = 0.0; ///< K h with K = round(T / h)
  /// max_k |m_{k+1} - m_k| / m_k over every step, m the trace or mass.
  double max_step_mass_change = 0.0;
};

struct QleState {
  DensityOperator rho;
  /// Chemical potential of the last collision step, reused as warm start.
  std::optional<RealVector> chemical_potential;
  double time = 0.0;
  int step = 0;
};

struct CollisionResult {
  DensityOperator rho;
  RealVector chemical_potential;
  MinimizeReport report;
};

/// Strang splitting stepper: transport(h/2), collision(h), transport(h/2),
/// the transport part itself split as kinetic(t/2), Poisson phase(t),
/// kinetic(t/2). Crank-Nicolson factorizations are cached per duration.
class QleSolver {
public:
  QleSolver(Grid grid, QleConfig config, RealVector external_potential);

  const Grid& grid() const noexcept { return grid_; }
  const QleConfig& config() const noexcept { return config_; }
  const RealVector& external_potential() const noexcept { return v_ext_; }

  /// H_L = (-beta^2 Delta_Neu - V_ext) / (sqrt(2) beta epsilon).
  const TridiagonalOperator& kinetic_generator() const noexcept {
    return generator_;
  }

  /// Cayley step (iI - (t/2) H_L)^{-1} (iI + (t/2) H_L) on every mode.
  DensityOperator kinetic_half_step(const DensityOperator& rho,
                                    double t) const;

  /// Multiplies each mode by exp(i t V / (sqrt(2) beta epsilon)) with V the
  /// Poisson potential of the current density.
  DensityOperator poisson_phase_step(const DensityOperator& rho,
                                     double t) const;

  /// Same as poisson_phase_step with a caller-supplied potential.
  DensityOperator phase_step(const DensityOperator& rho,
                             const RealVector& potential, double t) const;

  DensityOperator transport_step(const DensityOperator& rho, double t) const;

  /// Exact solution of d/dt rho = (rho_e[rho(0)] - rho) / eps^2 over t,
  /// rediagonalized in the canonical basis. No truncation.
  CollisionResult
  collision_step(const DensityOperator& rho, double t,
                 const std::optional<RealVector>& warm_start = {}) const;

  QleState step(const QleState& state) const;

  /// Advances K = round(T/h) steps. Snapshots are taken every `stride`
  /// steps and at the end. Solver errors end the run with `failed` set.
  Trajectory run(const DensityOperator& rho0, double final_time, int stride,
                 const SnapshotObserver& observer = {}) const;

private:
  const TridiagonalFactorization<Complex>& cayley_factor(double t) const;

  Grid grid_;
  QleConfig config_;
  RealVector v_ext_;
  TridiagonalOperator generator_;
  mutable std::mutex cache_mutex_;
  mutable std::map<double, std::shared_ptr<TridiagonalFactorization<Complex>>>
      cayley_cache_;
};

/// Free-function form of one qle step (builds a solver; prefer QleSolver
/// for repeated steps).
DensityOperator qle_step(const DensityOperator& rho, const QleConfig& config,
                         const RealVector& external_potential);

Snapshot make_snapshot(const DensityOperator& rho, int step, double time);

} // namespace qlbgk
