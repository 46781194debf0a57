#include "qlbgk/qle.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

namespace qlbgk {

void QleConfig::validate() const {
  if (!(time_step > 0.0)) throw InvalidArgument("time step must be positive");
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  if (truncation_threshold < 0.0) {
    throw InvalidArgument("truncation threshold must be nonnegative");
  }
}

Snapshot make_snapshot(const DensityOperator& rho, int step, double time) {
  return {step, time, local_density(rho), trace(rho), rho.discarded_mass(), {},
          {}};
}

QleSolver::QleSolver(Grid grid, QleConfig config, RealVector external_potential)
    : grid_(grid), config_(std::move(config)),
      v_ext_(std::move(external_potential)) {
  config_.validate();
  if (v_ext_.size() != grid_.size()) {
    throw InvalidArgument("external potential length does not match grid");
  }
  const double scale = 1.0 / (std::sqrt(2.0) * config_.beta * config_.epsilon);
  generator_ = free_hamiltonian(grid_, config_.beta)
                   .plus_diagonal(-v_ext_)
                   .scaled(scale);
  // Duration used by every kinetic sub-step of qle_step.
  cayley_factor(config_.time_step / 4.0);
}

const TridiagonalFactorization<Complex>&
QleSolver::cayley_factor(double t) const {
  std::lock_guard lock(cache_mutex_);
  auto it = cayley_cache_.find(t);
  if (it == cayley_cache_.end()) {
    const Complex i(0.0, 1.0);
    const ComplexVector diag =
        (-0.5 * t * generator_.diag).cast<Complex>().array() + i;
    const ComplexVector off = (-0.5 * t * generator_.lower).cast<Complex>();
    it = cayley_cache_
             .emplace(t, std::make_shared<TridiagonalFactorization<Complex>>(
                             off, diag, off))
             .first;
  }
  return *it->second;
}

DensityOperator QleSolver::kinetic_half_step(const DensityOperator& rho,
                                             double t) const {
  if (t == 0.0 || rho.empty()) return rho;
  const auto& lu = cayley_factor(t);
  const Complex i(0.0, 1.0);
  const TridiagonalOperator rhs_op = generator_.scaled(0.5 * t);
  Eigen::MatrixXcd modes(rho.modes().rows(), rho.modes().cols());
  for (Eigen::Index p = 0; p < modes.cols(); ++p) {
    const ComplexVector w = rho.modes().col(p);
    const ComplexVector rhs = i * w + rhs_op.apply(w);
    modes.col(p) = lu.solve(rhs);
  }
  return rho.with_modes(std::move(modes));
}

DensityOperator QleSolver::phase_step(const DensityOperator& rho,
                                      const RealVector& potential,
                                      double t) const {
  if (potential.size() != grid_.size()) {
    throw InvalidArgument("phase_step: potential length does not match grid");
  }
  if (t == 0.0 || rho.empty()) return rho;
  const double rate = t / (std::sqrt(2.0) * config_.beta * config_.epsilon);
  ComplexVector phase(potential.size());
  for (Eigen::Index j = 0; j < potential.size(); ++j) {
    phase(j) = std::polar(1.0, rate * potential(j));
  }
  return rho.with_modes(phase.asDiagonal() * rho.modes());
}

DensityOperator QleSolver::poisson_phase_step(const DensityOperator& rho,
                                              double t) const {
  if (config_.disable_poisson || t == 0.0) return rho;
  return phase_step(rho, solve_poisson(local_density(rho), config_.alpha, grid_),
                    t);
}

DensityOperator QleSolver::transport_step(const DensityOperator& rho,
                                          double t) const {
  const DensityOperator a = kinetic_half_step(rho, 0.5 * t);
  const DensityOperator b = poisson_phase_step(a, t);
  return kinetic_half_step(b, 0.5 * t);
}

CollisionResult
QleSolver::collision_step(const DensityOperator& rho, double t,
                          const std::optional<RealVector>& warm_start) const {
  const RealVector n = local_density(rho);
  const DensityConstraintFunctional functional(grid_, config_.beta, n);
  const RealVector initial =
      warm_start ? *warm_start : semiclassical_guess(n, config_.beta);
  MinimizeResult eq = minimize(functional, initial, config_.equilibrium);
  if (t == 0.0) {
    return {rho, std::move(eq.potential), std::move(eq.report)};
  }

  const double keep = std::exp(-t / (config_.epsilon * config_.epsilon));
  const SpectralDecomposition& spec = eq.final_evaluation.spectrum;
  RealVector w(spec.eigenvalues.size());
  for (Eigen::Index p = 0; p < w.size(); ++p) {
    w(p) = std::exp(-spec.eigenvalues(p));
  }
  // Modes far below the largest weight cannot affect the kernel.
  Eigen::Index used = 0;
  while (used < w.size() && w(used) > 1e-20 * w(0)) ++used;
  const Eigen::MatrixXd psi = spec.eigenvectors.leftCols(used);
  Eigen::MatrixXcd kernel =
      ((1.0 - keep) * (psi * w.head(used).asDiagonal() * psi.transpose()))
          .cast<Complex>();
  if (keep > 0.0) kernel += keep * assemble_matrix(rho);

  return {DensityOperator::from_kernel(grid_, kernel, rho.discarded_mass()),
          std::move(eq.potential), std::move(eq.report)};
}

QleState QleSolver::step(const QleState& state) const {
  const double h = config_.time_step;
  const DensityOperator first = transport_step(state.rho, 0.5 * h);
  CollisionResult collided =
      collision_step(first, h, state.chemical_potential);
  const DensityOperator kept =
      config_.preserve_trace_on_truncation
          ? truncate_preserving_trace(collided.rho,
                                      config_.truncation_threshold)
          : truncate(collided.rho, config_.truncation_threshold);
  if (kept.empty()) {
    throw PositivityError("qle step: truncation removed every mode");
  }
  return {transport_step(kept, 0.5 * h), std::move(collided.chemical_potential),
          state.time + h, state.step + 1};
}

Trajectory QleSolver::run(const DensityOperator& rho0, double final_time,
                          int stride, const SnapshotObserver& observer) const {
  if (final_time < 0.0) throw InvalidArgument("final time must be >= 0");
  if (stride < 1) throw InvalidArgument("snapshot stride must be >= 1");
  const int steps =
      static_cast<int>(std::llround(final_time / config_.time_step));
  Trajectory traj;
  traj.final_time = steps * config_.time_step;
  auto record = [&](const QleState& s) {
    traj.snapshots.push_back(make_snapshot(s.rho, s.step, s.time));
    if (observer) observer(traj.snapshots.back());
  };

  QleState state{rho0, std::nullopt, 0.0, 0};
  record(state);
  for (int k = 1; k <= steps; ++k) {
    const double before = trace(state.rho);
    try {
      state = step(state);
    } catch (const std::exception& e) {
      traj.failed = true;
      traj.error = std::current_exception();
      traj.failure = "step " + std::to_string(k) + ": " + e.what();
      return traj;
    }
    traj.max_step_mass_change =
        std::max(traj.max_step_mass_change,
                 std::abs(trace(state.rho) - before) / before);
    state.time = k * config_.time_step;
    if (k % stride == 0 || k == steps) record(state);
  }
  return traj;
}

DensityOperator qle_step(const DensityOperator& rho, const QleConfig& config,
                         const RealVector& external_potential) {
  const QleSolver solver(rho.grid(), config, external_potential);
  return solver.step({rho, std::nullopt, 0.0, 0}).rho;
}

} // namespace qlbgk
