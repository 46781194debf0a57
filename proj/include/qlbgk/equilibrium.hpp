#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "qlbgk/grid.hpp"
#include "qlbgk/linalg.hpp"
#include "qlbgk/state.hpp"

namespace qlbgk {

/// H0 = -beta^2 * Delta_Neu.
TridiagonalOperator free_hamiltonian(const Grid& grid, double beta);

/// Knobs of the NLCG minimizer and its line search.
struct EquilibriumOptions {
  /// Stop when ||A^k - A^{k-1}||_2 / ||A^k||_2 <= tolerance.
  double tolerance = 1e-7;
  /// Also stop when ||grad||_inf <= gradient_tolerance * ||n||_inf; covers
  /// minimizers at A = 0 where the relative step is undefined.
  double gradient_tolerance = 1e-10;
  int max_iterations = 500;
  /// Secant stops when |g(b)| <= line_tolerance * |g(0)|.
  double line_tolerance = 1e-7;
  int max_line_iterations = 50;
  /// Newton on the semiclassical surrogate seeds the secant iteration.
  bool surrogate_warm_start = true;
  /// Exact minimization along constant shifts before and after NLCG.
  bool constant_shift_polish = true;
  /// Precondition the NLCG directions with the model Hessian of
  /// ResponsePreconditioner. The minimizer is unchanged.
  bool preconditioned = true;
  /// Weight cutoff applied by maxwellian().
  double truncation_threshold = 1e-7;
  /// Optional per-iteration CSV log: iteration,J,gradient_norm,step.
  std::ostream* trace_log = nullptr;
};

struct MinimizeReport {
  int iterations = 0;
  double final_relative_step = 0.0;
  int line_search_calls = 0;
  int evaluations = 0; ///< diagonalizations of H0 + A
  bool converged = false;
  double final_gradient_norm = 0.0;
  int clamp_events = 0;
  std::vector<double> objective_history;
};

/// Model Hessian (in the dx pairing)
///   P = D^{1/2} (I - c beta^2 Delta_Neu)^{-1} D^{1/2} + S,  D = diag(n),
/// from the free-particle density response n / (1 + c beta^2 q^2) plus an
/// optional symmetric tridiagonal stiffness S. apply() returns P^{-1} r.
class ResponsePreconditioner {
public:
  static constexpr double kResponseScale = 0.5;

  ResponsePreconditioner(const Grid& grid, double beta,
                         const RealVector& density,
                         const TridiagonalOperator* stiffness = nullptr,
                         double response_scale = kResponseScale);

  RealVector apply(const RealVector& r) const;

private:
  RealVector inv_sqrt_density_;
  TridiagonalOperator smoothing_; ///< I - c beta^2 Delta_Neu
  std::optional<BandedLU> coupled_;
};

/// Convex functional of the chemical potential whose spectral part is
/// sum_p exp(-lambda_p[A]) with lambda_p the spectrum of H0 + diag(A).
/// Gradients are expressed in the dx-weighted pairing: the derivative of the
/// functional along s is dx * sum_i gradient_i s_i.
class ChemicalPotentialFunctional {
public:
  struct Evaluation {
    RealVector point;
    double value = 0.0;
    RealVector gradient;
    /// n[exp(-(H0 + A))]
    RealVector equilibrium_density;
    SpectralDecomposition spectrum;
    /// sum_p exp(-lambda_p)
    double spectral_sum = 0.0;
    int clamp_events = 0;
  };

  ChemicalPotentialFunctional(Grid grid, double beta, RealVector target);
  virtual ~ChemicalPotentialFunctional() = default;

  const Grid& grid() const noexcept { return grid_; }
  double beta() const noexcept { return beta_; }
  const RealVector& target_density() const noexcept { return target_; }
  const TridiagonalOperator& h0() const noexcept { return h0_; }

  /// Diagonalizes H0 + diag(A) and fills in value and gradient.
  Evaluation evaluate(const RealVector& a) const;

  /// Re-expresses an evaluation at A + c without a new diagonalization.
  Evaluation shifted(const Evaluation& e, double c) const;

  /// The c minimizing the functional along A + c * 1. Exact because the
  /// spectral term scales like exp(-c) and the rest is linear in c.
  double optimal_constant_shift(const Evaluation& e) const;

  /// First and second derivative in b of the semiclassical line model
  /// b -> F_approx(A + b s).
  virtual std::pair<double, double>
  surrogate_slope(const RealVector& a, const RealVector& s, double b) const;

  /// Preconditioner used by minimize(); built from the target density.
  virtual ResponsePreconditioner preconditioner() const;

protected:
  /// Adds the functional-specific terms on top of the spectral part.
  virtual void complete(Evaluation& e) const = 0;

  Grid grid_;
  double beta_;
  RealVector target_;
  TridiagonalOperator h0_;
};

/// J(A) = sum_p exp(-lambda_p[A]) + <A, n>.
class DensityConstraintFunctional : public ChemicalPotentialFunctional {
public:
  using ChemicalPotentialFunctional::ChemicalPotentialFunctional;

protected:
  void complete(Evaluation& e) const override;
};

struct MinimizeResult {
  RealVector potential;
  MinimizeReport report;
  ChemicalPotentialFunctional::Evaluation final_evaluation;
};

/// Polak-Ribiere NLCG (c = max(0, c_PR)) with a secant line search.
/// Throws ConvergenceError once max_iterations is exceeded.
MinimizeResult minimize(const ChemicalPotentialFunctional& functional,
                        const RealVector& initial,
                        const EquilibriumOptions& options = {});

struct LineSearchResult {
  double step = 0.0;
  int evaluations = 0;
  bool used_bracketing = false;
  ChemicalPotentialFunctional::Evaluation at_step;
};

/// argmin_b F(A + b s) for a descent direction s, starting the secant
/// iteration at (0, g(0)) and the surrogate minimizer (or a cold trial
/// step when the warm start is disabled).
LineSearchResult
line_search(const ChemicalPotentialFunctional& functional,
            const ChemicalPotentialFunctional::Evaluation& at_origin,
            const RealVector& direction, const EquilibriumOptions& options);

/// Newton minimizer of the surrogate line model. Returns 0 for s = 0.
double surrogate_minimizer(const ChemicalPotentialFunctional& functional,
                           const RealVector& a, const RealVector& s);

// Free-function surface over the density-constraint functional J.

double eval_J(const RealVector& a, const RealVector& n, double beta,
              const Grid& grid);
RealVector grad_J(const RealVector& a, const RealVector& n, double beta,
                  const Grid& grid);

/// A_i = -log(sqrt(4 pi) beta n_i), the inverse of the semiclassical law
/// n ~ exp(-A) / (sqrt(4 pi) beta).
RealVector semiclassical_guess(const RealVector& n, double beta);

/// (dx / (sqrt(4 pi) beta)) sum_i exp(-(A_i + b s_i)) + b <s, n>.
double surrogate_line_value(const RealVector& a, const RealVector& s,
                            const RealVector& n, double b, double beta,
                            const Grid& grid);

double line_search(const RealVector& a, const RealVector& s,
                   const RealVector& n, double beta, const Grid& grid,
                   double tol);

std::pair<RealVector, MinimizeReport>
minimize_J(const RealVector& n, double beta, const Grid& grid,
           const EquilibriumOptions& options = {},
           const std::optional<RealVector>& initial = std::nullopt);

/// exp(-(H0 + diag(A))) in spectral form, modes with weight below
/// `threshold` dropped (no ledger entry: this is a fresh operator).
DensityOperator equilibrium_from_potential(const RealVector& a, double beta,
                                           const Grid& grid,
                                           double threshold = 0.0);

/// n[exp(-(H0 + diag(A)))].
RealVector equilibrium_density(const RealVector& a, double beta,
                               const Grid& grid);

struct MaxwellianResult {
  DensityOperator rho;
  RealVector potential;
  MinimizeReport report;
};

/// Quantum Maxwellian with local density n, truncated at
/// options.truncation_threshold.
MaxwellianResult
maxwellian(const RealVector& n, double beta, const Grid& grid,
           const EquilibriumOptions& options = {},
           const std::optional<RealVector>& initial = std::nullopt);

} // namespace qlbgk
