#include "qlbgk/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace qlbgk {

namespace {

constexpr double kExponentCap = 700.0;

double semiclassical_prefactor(double beta) {
  return 1.0 / (std::sqrt(4.0 * std::numbers::pi) * beta);
}

void require_beta(double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
}

} // namespace

TridiagonalOperator free_hamiltonian(const Grid& grid, double beta) {
  require_beta(beta);
  return build_neumann_laplacian(grid).scaled(-beta * beta);
}

namespace {

double tridiagonal_entry(const TridiagonalOperator& op, int i, int j) {
  if (i == j) return op.diag(i);
  if (i == j + 1) return op.lower(j);
  if (j == i + 1) return op.upper(i);
  return 0.0;
}

} // namespace

ResponsePreconditioner::ResponsePreconditioner(
    const Grid& grid, double beta, const RealVector& density,
    const TridiagonalOperator* stiffness, double response_scale) {
  if (density.size() != grid.size() || density.minCoeff() <= 0.0) {
    throw InvalidArgument("preconditioner needs a positive density");
  }
  inv_sqrt_density_ = density.cwiseSqrt().cwiseInverse();
  smoothing_ = build_neumann_laplacian(grid)
                   .scaled(-response_scale * beta * beta)
                   .plus_diagonal(RealVector::Ones(grid.size()));
  if (stiffness == nullptr) return;
  // Solve P z = r through w = D^{1/2} z:
  //   (I + T D^{-1/2} S D^{-1/2}) w = T D^{-1/2} r,  T = smoothing_.
  const RealVector& d = inv_sqrt_density_;
  const TridiagonalOperator& t = smoothing_;
  auto s_scaled = [&](int k, int j) {
    return d(k) * tridiagonal_entry(*stiffness, k, j) * d(j);
  };
  const int n = grid.size();
  coupled_.emplace(n, 2, 2, [&](int i, int j) {
    double v = i == j ? 1.0 : 0.0;
    for (int k = std::max(0, i - 1); k <= std::min(n - 1, i + 1); ++k) {
      if (std::abs(k - j) <= 1) v += tridiagonal_entry(t, i, k) * s_scaled(k, j);
    }
    return v;
  });
}

RealVector ResponsePreconditioner::apply(const RealVector& r) const {
  RealVector w = smoothing_.apply(RealVector(inv_sqrt_density_.cwiseProduct(r)));
  if (coupled_) w = coupled_->solve(w);
  return inv_sqrt_density_.cwiseProduct(w);
}

ChemicalPotentialFunctional::ChemicalPotentialFunctional(Grid grid,
                                                         double beta,
                                                         RealVector target)
    : grid_(grid), beta_(beta), target_(std::move(target)),
      h0_(free_hamiltonian(grid, beta)) {
  if (target_.size() != grid_.size()) {
    throw InvalidArgument("target density length does not match grid");
  }
  if (!target_.allFinite() || target_.minCoeff() <= 0.0) {
    throw InvalidArgument(
        "target density must be strictly positive and finite");
  }
}

namespace {

void fill_spectral_terms(ChemicalPotentialFunctional::Evaluation& e) {
  const RealVector& lambda = e.spectrum.eigenvalues;
  RealVector w(lambda.size());
  e.clamp_events = 0;
  for (Eigen::Index p = 0; p < lambda.size(); ++p) {
    double l = lambda(p);
    if (l < -kExponentCap) {
      l = -kExponentCap;
      ++e.clamp_events;
    }
    w(p) = std::exp(-l);
  }
  e.spectral_sum = w.sum();
  // Only modes with a representable weight contribute.
  Eigen::Index used = 0;
  const double cutoff = w.maxCoeff() * 1e-300;
  while (used < w.size() && w(used) > cutoff) ++used;
  e.equilibrium_density =
      e.spectrum.eigenvectors.leftCols(used).cwiseAbs2() * w.head(used);
}

} // namespace

ChemicalPotentialFunctional::Evaluation
ChemicalPotentialFunctional::evaluate(const RealVector& a) const {
  if (a.size() != grid_.size()) {
    throw InvalidArgument("chemical potential length does not match grid");
  }
  if (!a.allFinite()) {
    throw ConvergenceError("chemical potential has non-finite entries");
  }
  Evaluation e;
  e.point = a;
  e.spectrum = eig_sym_tridiag(h0_.plus_diagonal(a), grid_);
  fill_spectral_terms(e);
  complete(e);
  if (!std::isfinite(e.value) || !e.gradient.allFinite()) {
    std::ostringstream msg;
    msg << "functional evaluation is not finite (max |A| = "
        << a.cwiseAbs().maxCoeff() << ")";
    throw ConvergenceError(msg.str());
  }
  return e;
}

ChemicalPotentialFunctional::Evaluation
ChemicalPotentialFunctional::shifted(const Evaluation& e, double c) const {
  Evaluation out = e;
  out.point.array() += c;
  out.spectrum.eigenvalues.array() += c;
  fill_spectral_terms(out);
  complete(out);
  return out;
}

double
ChemicalPotentialFunctional::optimal_constant_shift(const Evaluation& e) const {
  const double mass = grid_.dx() * target_.sum();
  return std::log(e.spectral_sum / mass);
}

std::pair<double, double>
ChemicalPotentialFunctional::surrogate_slope(const RealVector& a,
                                             const RealVector& s,
                                             double b) const {
  const double k = grid_.dx() * semiclassical_prefactor(beta_);
  double d1 = grid_.dx() * s.dot(target_);
  double d2 = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double x = std::exp(std::min(kExponentCap, -(a(i) + b * s(i))));
    d1 -= k * s(i) * x;
    d2 += k * s(i) * s(i) * x;
  }
  return {d1, d2};
}

ResponsePreconditioner ChemicalPotentialFunctional::preconditioner() const {
  return ResponsePreconditioner(grid_, beta_, target_);
}

void DensityConstraintFunctional::complete(Evaluation& e) const {
  e.value = e.spectral_sum + grid_.dx() * e.point.dot(target_);
  e.gradient = target_ - e.equilibrium_density;
}

// ---------------------------------------------------------------------------
// Line search

namespace {

double slope_along(const ChemicalPotentialFunctional::Evaluation& e,
                   const RealVector& s, double dx) {
  return dx * e.gradient.dot(s);
}

/// Round-off floor for |g(b)|: the slope is a difference of two sums of
/// this magnitude.
double slope_noise(const ChemicalPotentialFunctional& f,
                   const ChemicalPotentialFunctional::Evaluation& e,
                   const RealVector& s) {
  const double mag =
      f.grid().dx() *
      ((f.target_density().cwiseAbs() + e.equilibrium_density.cwiseAbs())
           .cwiseProduct(s.cwiseAbs()))
          .sum();
  return 256.0 * std::numeric_limits<double>::epsilon() * mag;
}

} // namespace

double surrogate_minimizer(const ChemicalPotentialFunctional& functional,
                           const RealVector& a, const RealVector& s) {
  const double smax = s.cwiseAbs().maxCoeff();
  if (smax == 0.0) return 0.0;
  // Each Newton step moves the largest exponent by at most this much.
  const double max_move = 5.0 / smax;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  double b = 0.0;
  const auto [d1_0, d2_0] = functional.surrogate_slope(a, s, 0.0);
  const double scale = std::abs(d1_0) + 1e-300;
  for (int it = 0; it < 100; ++it) {
    const auto [d1, d2] = it == 0 ? std::pair{d1_0, d2_0}
                                  : functional.surrogate_slope(a, s, b);
    if (std::abs(d1) <= 1e-13 * scale) break;
    if (d1 > 0.0) {
      hi = std::min(hi, b);
    } else {
      lo = std::max(lo, b);
    }
    double next = d2 > 0.0 ? b - d1 / d2 : b - std::copysign(max_move, d1);
    next = std::clamp(next, b - max_move, b + max_move);
    if (!(next > lo && next < hi)) {
      next = (std::isfinite(lo) && std::isfinite(hi)) ? 0.5 * (lo + hi)
                                                      : next;
    }
    if (next == b) break;
    b = next;
  }
  return b;
}

LineSearchResult
line_search(const ChemicalPotentialFunctional& functional,
            const ChemicalPotentialFunctional::Evaluation& at_origin,
            const RealVector& direction, const EquilibriumOptions& options) {
  const double dx = functional.grid().dx();
  const double smax = direction.cwiseAbs().maxCoeff();
  if (smax == 0.0) {
    throw InvalidArgument("line_search: zero search direction");
  }
  const double g0 = slope_along(at_origin, direction, dx);
  LineSearchResult result;
  if (!(g0 < 0.0)) {
    // Not a descent direction: stay put.
    result.at_step = at_origin;
    return result;
  }
  const double target = options.line_tolerance * std::abs(g0) +
                        slope_noise(functional, at_origin, direction);

  double trial = 1.0 / smax;
  if (options.surrogate_warm_start) {
    const double b = surrogate_minimizer(functional, at_origin.point,
                                         direction);
    if (std::isfinite(b) && b > 0.0) trial = b;
  }

  // g is nondecreasing along the line (convexity); (lo, hi) brackets its root.
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double b_prev = 0.0;
  double g_prev = g0;
  double b = trial;
  auto eval = functional.evaluate(at_origin.point + b * direction);
  ++result.evaluations;
  auto best = eval;
  double best_b = b;
  double g = slope_along(eval, direction, dx);

  for (int it = 0; it < options.max_line_iterations; ++it) {
    if (std::abs(g) <= target) {
      result.step = b;
      result.at_step = std::move(eval);
      return result;
    }
    if (eval.value < best.value) {
      best = eval;
      best_b = b;
    }
    if (g < 0.0) {
      lo = std::max(lo, b);
    } else {
      hi = std::min(hi, b);
    }
    double next = b - g * (b - b_prev) / (g - g_prev);
    if (!std::isfinite(next) || !(next > lo && next < hi)) {
      result.used_bracketing = true;
      next = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * std::max(b, lo);
    }
    b_prev = b;
    g_prev = g;
    b = next;
    eval = functional.evaluate(at_origin.point + b * direction);
    ++result.evaluations;
    g = slope_along(eval, direction, dx);
  }
  if (eval.value < best.value) {
    best = eval;
    best_b = b;
  }
  if (best.value < at_origin.value) {
    result.step = best_b;
    result.at_step = std::move(best);
    return result;
  }
  std::ostringstream msg;
  msg << "line search failed: " << options.max_line_iterations
      << " iterations, g(0) = " << g0 << ", last b = " << b
      << ", g(b) = " << g << ", bracket [" << lo << ", " << hi << "]";
  throw ConvergenceError(msg.str());
}

// ---------------------------------------------------------------------------
// Nonlinear conjugate gradient

MinimizeResult minimize(const ChemicalPotentialFunctional& functional,
                        const RealVector& initial,
                        const EquilibriumOptions& options) {
  if (!(options.tolerance > 0.0)) {
    throw InvalidArgument("minimize: tolerance must be positive");
  }
  MinimizeReport report;
  const double dx = functional.grid().dx();
  const double grad_stop = options.gradient_tolerance *
                           functional.target_density().cwiseAbs().maxCoeff();

  auto current = functional.evaluate(initial);
  report.evaluations = 1;
  report.clamp_events += current.clamp_events;
  if (options.constant_shift_polish) {
    current =
        functional.shifted(current, functional.optimal_constant_shift(current));
  }
  report.objective_history.push_back(current.value);

  std::optional<ResponsePreconditioner> precond;
  if (options.preconditioned) precond.emplace(functional.preconditioner());
  auto precondition = [&](const RealVector& g) {
    return precond ? precond->apply(g) : g;
  };

  // Polak-Ribiere on the preconditioned gradient z = P^{-1} g.
  RealVector z = precondition(current.gradient);
  RealVector gradient = current.gradient;
  RealVector direction = -z;
  if (options.trace_log) {
    *options.trace_log << "iteration,J,gradient_norm,step\n";
  }

  for (int k = 0; k < options.max_iterations; ++k) {
    const double gnorm = current.gradient.cwiseAbs().maxCoeff();
    if (gnorm <= grad_stop || direction.cwiseAbs().maxCoeff() == 0.0) {
      report.converged = true;
      break;
    }
    LineSearchResult ls = line_search(functional, current, direction, options);
    ++report.line_search_calls;
    report.evaluations += ls.evaluations;
    report.clamp_events += ls.at_step.clamp_events;

    const double step_norm = (ls.at_step.point - current.point).norm();
    const double point_norm = ls.at_step.point.norm();
    report.final_relative_step =
        point_norm > 0.0 ? step_norm / point_norm
                         : std::numeric_limits<double>::infinity();
    current = std::move(ls.at_step);
    report.iterations = k + 1;
    report.objective_history.push_back(current.value);
    if (options.trace_log) {
      *options.trace_log << report.iterations << ',' << current.value << ','
                         << current.gradient.norm() * std::sqrt(dx) << ','
                         << ls.step << '\n';
    }
    if (report.final_relative_step <= options.tolerance || step_norm == 0.0) {
      report.converged = true;
      break;
    }

    const RealVector z_next = precondition(current.gradient);
    const double denom = gradient.dot(z);
    const double c_pr =
        denom > 0.0 ? current.gradient.dot(z_next - z) / denom : 0.0;
    direction = -z_next + std::max(0.0, c_pr) * direction;
    if (direction.dot(current.gradient) >= 0.0) direction = -z_next;
    z = z_next;
    gradient = current.gradient;
  }

  if (options.constant_shift_polish) {
    current =
        functional.shifted(current, functional.optimal_constant_shift(current));
  }
  report.final_gradient_norm = current.gradient.cwiseAbs().maxCoeff();
  if (!report.converged) {
    std::ostringstream msg;
    msg << "NLCG did not converge in " << options.max_iterations
        << " iterations (relative step " << report.final_relative_step
        << ", gradient " << report.final_gradient_norm << ")";
    throw ConvergenceError(msg.str());
  }
  MinimizeResult result;
  result.potential = current.point;
  result.report = std::move(report);
  result.final_evaluation = std::move(current);
  return result;
}

// ---------------------------------------------------------------------------
// Free functions

double eval_J(const RealVector& a, const RealVector& n, double beta,
              const Grid& grid) {
  return DensityConstraintFunctional(grid, beta, n).evaluate(a).value;
}

RealVector grad_J(const RealVector& a, const RealVector& n, double beta,
                  const Grid& grid) {
  return DensityConstraintFunctional(grid, beta, n).evaluate(a).gradient;
}

RealVector semiclassical_guess(const RealVector& n, double beta) {
  require_beta(beta);
  if (n.size() == 0 || !(n.minCoeff() > 0.0)) {
    throw InvalidArgument("semiclassical_guess: density must be positive");
  }
  const double c = std::sqrt(4.0 * std::numbers::pi) * beta;
  return -(c * n.array()).log().matrix();
}

double surrogate_line_value(const RealVector& a, const RealVector& s,
                            const RealVector& n, double b, double beta,
                            const Grid& grid) {
  require_beta(beta);
  if (a.size() != grid.size() || s.size() != a.size() ||
      n.size() != a.size()) {
    throw InvalidArgument("surrogate_line_value: length mismatch");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    sum += std::exp(std::min(kExponentCap, -(a(i) + b * s(i))));
  }
  return grid.dx() * semiclassical_prefactor(beta) * sum +
         b * grid.dx() * s.dot(n);
}

double line_search(const RealVector& a, const RealVector& s,
                   const RealVector& n, double beta, const Grid& grid,
                   double tol) {
  const DensityConstraintFunctional f(grid, beta, n);
  EquilibriumOptions opts;
  opts.line_tolerance = tol;
  return line_search(f, f.evaluate(a), s, opts).step;
}

std::pair<RealVector, MinimizeReport>
minimize_J(const RealVector& n, double beta, const Grid& grid,
           const EquilibriumOptions& options,
           const std::optional<RealVector>& initial) {
  const DensityConstraintFunctional f(grid, beta, n);
  MinimizeResult r =
      minimize(f, initial ? *initial : semiclassical_guess(n, beta), options);
  return {std::move(r.potential), std::move(r.report)};
}

namespace {

DensityOperator operator_from_spectrum(const SpectralDecomposition& spec,
                                       const Grid& grid, double threshold) {
  Eigen::Index kept = 0;
  RealVector w(spec.eigenvalues.size());
  for (Eigen::Index p = 0; p < w.size(); ++p) {
    w(p) = std::exp(-std::max(spec.eigenvalues(p), -kExponentCap));
  }
  // Eigenvalues ascend, so weights descend.
  while (kept < w.size() && w(kept) >= threshold && w(kept) > 0.0) ++kept;
  return DensityOperator(grid, w.head(kept),
                         spec.eigenvectors.leftCols(kept).cast<Complex>());
}

} // namespace

DensityOperator equilibrium_from_potential(const RealVector& a, double beta,
                                           const Grid& grid,
                                           double threshold) {
  const TridiagonalOperator h = free_hamiltonian(grid, beta).plus_diagonal(a);
  return operator_from_spectrum(eig_sym_tridiag(h, grid), grid, threshold);
}

RealVector equilibrium_density(const RealVector& a, double beta,
                               const Grid& grid) {
  return local_density(equilibrium_from_potential(a, beta, grid));
}

MaxwellianResult maxwellian(const RealVector& n, double beta,
                            const Grid& grid,
                            const EquilibriumOptions& options,
                            const std::optional<RealVector>& initial) {
  const DensityConstraintFunctional f(grid, beta, n);
  MinimizeResult r =
      minimize(f, initial ? *initial : semiclassical_guess(n, beta), options);
  return {operator_from_spectrum(r.final_evaluation.spectrum, grid,
                                 options.truncation_threshold),
          std::move(r.potential), std::move(r.report)};
}

} // namespace qlbgk
