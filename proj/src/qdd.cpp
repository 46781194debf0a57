#include "qlbgk/qdd.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

#include "qlbgk/error.hpp"

namespace qlbgk {

void QddConfig::validate() const {
  if (!(time_step > 0.0)) throw InvalidArgument("time step must be positive");
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
}

DriftDiffusionFunctional::DriftDiffusionFunctional(Grid grid, double beta,
                                                   RealVector density,
                                                   RealVector total_potential,
                                                   double time_step)
    : ChemicalPotentialFunctional(grid, beta, std::move(density)),
      w_(std::move(total_potential)), h_(time_step),
      d_(build_difference_matrices(grid)) {
  if (w_.size() != grid_.size()) {
    throw InvalidArgument("total potential length does not match grid");
  }
  if (!(h_ >= 0.0)) throw InvalidArgument("time step must be nonnegative");
}

void DriftDiffusionFunctional::complete(Evaluation& e) const {
  const double dx = grid_.dx();
  const RealVector u = e.point + w_;
  const RealVector dp = d_.plus.apply(u);
  const RealVector dm = d_.minus.apply(u);
  const RealVector fp = target_.cwiseProduct(dp);
  const RealVector fm = target_.cwiseProduct(dm);
  e.value = 0.25 * h_ * dx * (fp.dot(dp) + fm.dot(dm)) + e.spectral_sum +
            dx * e.point.dot(target_);
  e.gradient = 0.5 * h_ *
                   (d_.plus.apply_transpose(fp) + d_.minus.apply_transpose(fm)) +
               target_ - e.equilibrium_density;
}

std::pair<double, double>
DriftDiffusionFunctional::surrogate_slope(const RealVector& a,
                                          const RealVector& s,
                                          double b) const {
  auto [d1, d2] = ChemicalPotentialFunctional::surrogate_slope(a, s, b);
  const double c = 0.5 * h_ * grid_.dx();
  const RealVector u = a + b * s + w_;
  const RealVector sp = d_.plus.apply(s);
  const RealVector sm = d_.minus.apply(s);
  d1 += c * (target_.cwiseProduct(d_.plus.apply(u)).dot(sp) +
             target_.cwiseProduct(d_.minus.apply(u)).dot(sm));
  d2 += c * (target_.cwiseProduct(sp).dot(sp) + target_.cwiseProduct(sm).dot(sm));
  return {d1, d2};
}

ResponsePreconditioner DriftDiffusionFunctional::preconditioner() const {
  const TridiagonalOperator s = drift_stiffness(grid_, target_, h_);
  return ResponsePreconditioner(grid_, beta_, target_, &s);
}

TridiagonalOperator drift_stiffness(const Grid& grid, const RealVector& n,
                                    double h) {
  const int size = grid.size();
  if (n.size() != size) throw InvalidArgument("density length does not match grid");
  // D+ differences pair (i, i+1) weighted by n_i, D- pairs (i-1, i) by n_i.
  RealVector diag = RealVector::Zero(size);
  RealVector off(size - 1);
  for (int i = 0; i + 1 < size; ++i) {
    const double w = n(i) + n(i + 1);
    diag(i) += w;
    diag(i + 1) += w;
    off(i) = -w;
  }
  const double scale = 0.5 * h / (grid.dx() * grid.dx());
  return TridiagonalOperator::symmetric(scale * diag, scale * off);
}

double eval_J_qdd(const RealVector& a, const RealVector& n_k,
                  const RealVector& w_k, double h, double beta,
                  const Grid& grid) {
  return DriftDiffusionFunctional(grid, beta, n_k, w_k, h).evaluate(a).value;
}

RealVector grad_J_qdd(const RealVector& a, const RealVector& n_k,
                      const RealVector& w_k, double h, double beta,
                      const Grid& grid) {
  return grid.dx() *
         DriftDiffusionFunctional(grid, beta, n_k, w_k, h).evaluate(a).gradient;
}

RealVector qdd_scheme_residual(const RealVector& n_next, const RealVector& n_k,
                               const RealVector& a_next, const RealVector& w_k,
                               double h, const Grid& grid) {
  if (!(h > 0.0)) throw InvalidArgument("time step must be positive");
  const DifferenceMatrices d = build_difference_matrices(grid);
  const RealVector u = a_next + w_k;
  return (n_next - n_k) / h +
         0.5 * d.minus_tilde.apply(RealVector(n_k.cwiseProduct(d.plus.apply(u)))) +
         0.5 * d.plus_tilde.apply(RealVector(n_k.cwiseProduct(d.minus.apply(u))));
}

QddSolver::QddSolver(Grid grid, QddConfig config, RealVector external_potential)
    : grid_(grid), config_(std::move(config)),
      v_ext_(std::move(external_potential)) {
  config_.validate();
  if (v_ext_.size() != grid_.size()) {
    throw InvalidArgument("external potential length does not match grid");
  }
}

QddState QddSolver::initial_state(const RealVector& n0) const {
  if (n0.size() != grid_.size()) {
    throw InvalidArgument("initial density length does not match grid");
  }
  auto [a0, report] = minimize_J(n0, config_.beta, grid_, config_.equilibrium);
  QddState s;
  s.density = n0;
  s.chemical_potential = std::move(a0);
  s.poisson_potential = solve_poisson(n0, config_.alpha, grid_);
  s.last_report = std::move(report);
  return s;
}

QddState QddSolver::step(const QddState& state) const {
  const RealVector v = solve_poisson(state.density, config_.alpha, grid_);
  const DriftDiffusionFunctional functional(grid_, config_.beta, state.density,
                                            v + v_ext_, config_.time_step);
  MinimizeResult r =
      minimize(functional, state.chemical_potential, config_.equilibrium);
  QddState next;
  next.density = std::move(r.final_evaluation.equilibrium_density);
  next.chemical_potential = std::move(r.potential);
  next.poisson_potential = solve_poisson(next.density, config_.alpha, grid_);
  next.time = state.time + config_.time_step;
  next.step = state.step + 1;
  next.last_report = std::move(r.report);
  return next;
}

Trajectory QddSolver::run(const RealVector& n0, double final_time, int stride,
                          const SnapshotObserver& observer) const {
  if (final_time < 0.0) throw InvalidArgument("final time must be >= 0");
  if (stride < 1) throw InvalidArgument("snapshot stride must be >= 1");
  const int steps =
      static_cast<int>(std::llround(final_time / config_.time_step));
  Trajectory traj;
  traj.final_time = steps * config_.time_step;
  auto record = [&](const QddState& s) {
    Snapshot snap;
    snap.step = s.step;
    snap.time = s.time;
    snap.density = s.density;
    snap.trace = grid_.dx() * s.density.sum();
    snap.chemical_potential = s.chemical_potential;
    snap.poisson_potential = s.poisson_potential;
    traj.snapshots.push_back(std::move(snap));
    if (observer) observer(traj.snapshots.back());
  };

  QddState state;
  try {
    state = initial_state(n0);
  } catch (const std::exception& e) {
    traj.failed = true;
    traj.error = std::current_exception();
    traj.failure = std::string("initial potential: ") + e.what();
    return traj;
  }
  record(state);
  for (int k = 1; k <= steps; ++k) {
    const double before = grid_.dx() * state.density.sum();
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
                 std::abs(grid_.dx() * state.density.sum() - before) / before);
    state.time = k * config_.time_step;
    if (k % stride == 0 || k == steps) record(state);
  }
  return traj;
}

QddState qdd_step(const QddState& state, const QddConfig& config,
                  const RealVector& external_potential, const Grid& grid) {
  return QddSolver(grid, config, external_potential).step(state);
}

} // namespace qlbgk
