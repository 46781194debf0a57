#pragma once

#include <Eigen/Dense>

#include "qlbgk/equilibrium.hpp"
#include "qlbgk/grid.hpp"
#include "qlbgk/qle.hpp"

namespace qlbgk {

struct QddConfig {
  double time_step = 1e-4;
  double beta = 0.015;
  double alpha = 1.0;
  EquilibriumOptions equilibrium;

  void validate() const;
};

struct QddState {
  RealVector density;            ///< n^k
  RealVector chemical_potential; ///< A^k
  RealVector poisson_potential;  ///< V^k = V[n^k]
  double time = 0.0;
  int step = 0;
  MinimizeReport last_report;
};

/// J_QDD(A) = (h dx/4) sum n_k (D+(A+W))^2 + (h dx/4) sum n_k (D-(A+W))^2
///            + sum_p exp(-lambda_p[A]) + dx sum n_k A.
/// Its minimizer A^{k+1} makes n[exp(-H_{A^{k+1}})] satisfy the implicit
/// drift-diffusion step.
class DriftDiffusionFunctional : public ChemicalPotentialFunctional {
public:
  DriftDiffusionFunctional(Grid grid, double beta, RealVector density,
                           RealVector total_potential, double time_step);

  std::pair<double, double> surrogate_slope(const RealVector& a,
                                            const RealVector& s,
                                            double b) const override;

  /// Adds the drift_stiffness() term to the response model.
  ResponsePreconditioner preconditioner() const override;

protected:
  void complete(Evaluation& e) const override;

private:
  RealVector w_;
  double h_;
  DifferenceMatrices d_;
};

/// (h/2) [D+^T diag(n) D+ + D-^T diag(n) D-], the Hessian of the quadratic
/// part of J_QDD in the dx pairing.
TridiagonalOperator drift_stiffness(const Grid& grid, const RealVector& n,
                                    double h);

double eval_J_qdd(const RealVector& a, const RealVector& n_k,
                  const RealVector& w_k, double h, double beta,
                  const Grid& grid);

/// Euclidean gradient
/// (h dx/2)[D+^T(n_k D+(A+W)) + D-^T(n_k D-(A+W))] + dx (n_k - n[e^{-H_A}]).
RealVector grad_J_qdd(const RealVector& a, const RealVector& n_k,
                      const RealVector& w_k, double h, double beta,
                      const Grid& grid);

/// Left-hand side of the discrete drift-diffusion equation,
/// (n^{k+1} - n^k)/h + 1/2 D~-(n^k D+ U) + 1/2 D~+(n^k D- U), U = A^{k+1}+W^k.
RealVector qdd_scheme_residual(const RealVector& n_next, const RealVector& n_k,
                               const RealVector& a_next, const RealVector& w_k,
                               double h, const Grid& grid);

class QddSolver {
public:
  QddSolver(Grid grid, QddConfig config, RealVector external_potential);

  const Grid& grid() const noexcept { return grid_; }
  const QddConfig& config() const noexcept { return config_; }

  /// A^0 with n[exp(-H_{A^0})] = n0, from the semiclassical guess.
  QddState initial_state(const RealVector& n0) const;

  QddState step(const QddState& state) const;

  /// Advances K = round(T/h) steps from initial_state(n0), recording every
  /// `stride` steps and the last one.
  Trajectory run(const RealVector& n0, double final_time, int stride,
                 const SnapshotObserver& observer = {}) const;

private:
  Grid grid_;
  QddConfig config_;
  RealVector v_ext_;
};

QddState qdd_step(const QddState& state, const QddConfig& config,
                  const RealVector& external_potential, const Grid& grid);

} // namespace qlbgk
