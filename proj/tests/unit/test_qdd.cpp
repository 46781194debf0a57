#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qlbgk/equilibrium.hpp"
#include "qlbgk/qdd.hpp"
#include "support.hpp"

using namespace qlbgk;
using qlbgk::testing::random_vector;
using qlbgk::testing::smooth_profile;

namespace {

/// J_QDD from hand-built dense matrices.
double dense_J_qdd(const RealVector& a, const RealVector& n,
                   const RealVector& w, double h, double beta, int size) {
  const double dx = 1.0 / (size + 1);
  Eigen::MatrixXd dp = Eigen::MatrixXd::Zero(size, size);
  Eigen::MatrixXd dm = Eigen::MatrixXd::Zero(size, size);
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(size, size);
  for (int i = 0; i < size; ++i) {
    if (i + 1 < size) {
      dp(i, i) = -1.0 / dx;
      dp(i, i + 1) = 1.0 / dx;
      lap(i, i + 1) = lap(i + 1, i) = 1.0 / (dx * dx);
    }
    if (i > 0) {
      dm(i, i - 1) = -1.0 / dx;
      dm(i, i) = 1.0 / dx;
    }
    lap(i, i) = (i == 0 || i + 1 == size ? -1.0 : -2.0) / (dx * dx);
  }
  Eigen::MatrixXd ham = -beta * beta * lap;
  ham.diagonal() += a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ham);
  const RealVector u = a + w;
  const RealVector fp = dp * u;
  const RealVector fm = dm * u;
  double quad = 0.0;
  for (int i = 0; i < size; ++i) {
    quad += n(i) * (fp(i) * fp(i) + fm(i) * fm(i));
  }
  return 0.25 * h * dx * quad + (-es.eigenvalues().array()).exp().sum() +
         dx * n.dot(a);
}

struct Stationary {
  Grid grid{50};
  RealVector a, n, v_ext;
};

/// n = n[exp(-H_A)] and V_ext chosen so that A + V[n] + V_ext = const.
Stationary stationary_state(double beta, double alpha) {
  std::mt19937 rng(21);
  Stationary s;
  s.a = smooth_profile(s.grid, rng);
  s.n = equilibrium_density(s.a, beta, s.grid);
  s.v_ext = (0.3 - s.a.array()).matrix() - solve_poisson(s.n, alpha, s.grid);
  return s;
}

QddConfig small_config(double h) {
  QddConfig c;
  c.time_step = h;
  c.beta = 0.05;
  c.alpha = 1.0;
  return c;
}

} // namespace

TEST(EvalJQdd, ReducesToJ) {
  std::mt19937 rng(1);
  const Grid g(20);
  const RealVector a = random_vector(20, rng);
  const RealVector n = random_vector(20, rng, 0.5, 1.5);
  const RealVector w = random_vector(20, rng);
  EXPECT_NEAR(eval_J_qdd(a, n, w, 0.0, 0.05, g), eval_J(a, n, 0.05, g), 1e-13);
  // A + W constant: the quadratic terms vanish for any h.
  const RealVector w_const = (1.7 - a.array()).matrix();
  EXPECT_NEAR(eval_J_qdd(a, n, w_const, 0.3, 0.05, g), eval_J(a, n, 0.05, g),
              1e-12);
}

TEST(EvalJQdd, IndependentImplementationN4) {
  std::mt19937 rng(2);
  const Grid g(4);
  for (int trial = 0; trial < 10; ++trial) {
    const RealVector a = random_vector(4, rng);
    const RealVector n = random_vector(4, rng, 0.1, 2.0);
    const RealVector w = random_vector(4, rng);
    const double h = 0.01 * (trial + 1);
    const double expected = dense_J_qdd(a, n, w, h, 0.1, 4);
    EXPECT_NEAR(eval_J_qdd(a, n, w, h, 0.1, g), expected,
                1e-12 * std::abs(expected));
  }
}

TEST(GradJQdd, CentralDifferences) {
  std::mt19937 rng(3);
  const Grid g(16);
  const double delta = 1e-5;
  for (int trial = 0; trial < 5; ++trial) {
    const RealVector a = smooth_profile(g, rng);
    const RealVector s = smooth_profile(g, rng);
    const RealVector n = random_vector(16, rng, 0.5, 1.5);
    const RealVector w = smooth_profile(g, rng);
    const double h = 1e-3;
    const double fd = (eval_J_qdd(a + delta * s, n, w, h, 0.1, g) -
                       eval_J_qdd(a - delta * s, n, w, h, 0.1, g)) /
                      (2 * delta);
    const double analytic = grad_J_qdd(a, n, w, h, 0.1, g).dot(s);
    EXPECT_LT(std::abs(fd - analytic), 1e-6 * std::abs(analytic));
  }
}

TEST(GradJQdd, ReductionsAndFixedPoint) {
  std::mt19937 rng(4);
  const Grid g(30);
  const RealVector a = random_vector(30, rng);
  const RealVector n = random_vector(30, rng, 0.5, 1.5);
  const RealVector w = random_vector(30, rng);
  EXPECT_LT((grad_J_qdd(a, n, w, 0.0, 0.05, g) - g.dx() * grad_J(a, n, 0.05, g))
                .cwiseAbs()
                .maxCoeff(),
            1e-15);
  const RealVector ne = equilibrium_density(a, 0.05, g);
  const RealVector w_const = (-2.0 - a.array()).matrix();
  EXPECT_LT(grad_J_qdd(a, ne, w_const, 0.1, 0.05, g).cwiseAbs().maxCoeff(),
            1e-14);
}

TEST(DriftStiffness, MatchesDenseHessianOfQuadraticPart) {
  std::mt19937 rng(5);
  const Grid g(7);
  const RealVector n = random_vector(7, rng, 0.5, 1.5);
  const double h = 0.02;
  const DifferenceMatrices d = build_difference_matrices(g);
  const Eigen::MatrixXd dp = d.plus.to_dense();
  const Eigen::MatrixXd dm = d.minus.to_dense();
  const Eigen::MatrixXd expected =
      0.5 * h *
      (dp.transpose() * n.asDiagonal() * dp + dm.transpose() * n.asDiagonal() * dm);
  EXPECT_LT((drift_stiffness(g, n, h).to_dense() - expected).cwiseAbs().maxCoeff(),
            1e-10 * expected.cwiseAbs().maxCoeff());
}

TEST(QddStep, StationaryStateIsFixed) {
  const double beta = 0.05;
  const Stationary s = stationary_state(beta, 1.0);
  const QddSolver solver(s.grid, small_config(1e-3), s.v_ext);
  QddState state = solver.initial_state(s.n);
  EXPECT_LT((state.chemical_potential - s.a).cwiseAbs().maxCoeff(), 1e-5);
  for (int k = 0; k < 3; ++k) state = solver.step(state);
  EXPECT_LT((state.density - s.n).cwiseAbs().maxCoeff(),
            1e-6 * s.n.cwiseAbs().maxCoeff());
}

TEST(QddStep, MassConservedAndSchemeSatisfied) {
  std::mt19937 rng(6);
  const Grid g(60);
  const double h = 1e-3;
  const QddConfig c = small_config(h);
  const RealVector v_ext = smooth_profile(g, rng, 3.0);
  const RealVector n0 = equilibrium_density(smooth_profile(g, rng), c.beta, g);
  const QddSolver solver(g, c, v_ext);
  const QddState s0 = solver.initial_state(n0);
  const QddState s1 = qdd_step(s0, c, v_ext, g);
  const double m0 = g.dx() * n0.sum();
  EXPECT_LT(std::abs(g.dx() * s1.density.sum() - m0), 1e-10 * m0);
  EXPECT_EQ(s1.step, 1);

  const RealVector w = solve_poisson(n0, c.alpha, g) + v_ext;
  const RealVector r =
      qdd_scheme_residual(s1.density, n0, s1.chemical_potential, w, h, g);
  // h * residual is minus the functional gradient at the minimizer.
  const DriftDiffusionFunctional f(g, c.beta, n0, w, h);
  const auto e = f.evaluate(s1.chemical_potential);
  EXPECT_LT((h * r + e.gradient).cwiseAbs().maxCoeff(),
            1e-10 * n0.cwiseAbs().maxCoeff());
  EXPECT_LT(h * r.cwiseAbs().maxCoeff(), 1e-5 * n0.cwiseAbs().maxCoeff());
  // The step actually moved the density.
  EXPECT_GT((s1.density - n0).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(QddStep, MinimizerIndependentOfStart) {
  std::mt19937 rng(7);
  const Grid g(60);
  const double h = 1e-3;
  const QddConfig c = small_config(h);
  const RealVector n = equilibrium_density(smooth_profile(g, rng), c.beta, g);
  const RealVector w = smooth_profile(g, rng, 3.0);
  const DriftDiffusionFunctional f(g, c.beta, n, w, h);
  const RealVector from_guess =
      minimize(f, semiclassical_guess(n, c.beta)).potential;
  const RealVector from_zero = minimize(f, RealVector::Zero(60)).potential;
  EXPECT_LT((from_guess - from_zero).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(QddRun, FirstOrderInTime) {
  std::mt19937 rng(8);
  const Grid g(40);
  const RealVector v_ext = smooth_profile(g, rng, 3.0);
  const RealVector n0 = equilibrium_density(smooth_profile(g, rng), 0.05, g);
  const double t_end = 0.02;
  auto final_density = [&](double h) {
    const Trajectory t =
        QddSolver(g, small_config(h), v_ext).run(n0, t_end, 1000000);
    EXPECT_FALSE(t.failed) << t.failure;
    return t.snapshots.back().density;
  };
  const RealVector ref = final_density(1.25e-4);
  std::vector<double> errors;
  for (double h : {4e-3, 2e-3, 1e-3}) {
    errors.push_back((final_density(h) - ref).norm() / ref.norm());
  }
  for (std::size_t k = 1; k < errors.size(); ++k) {
    const double order = std::log2(errors[k - 1] / errors[k]);
    EXPECT_GT(order, 0.8);
    EXPECT_LT(order, 1.3);
  }
}

TEST(QddRun, TrajectoryBookkeeping) {
  std::mt19937 rng(9);
  const Grid g(40);
  const RealVector v_ext = smooth_profile(g, rng, 3.0);
  const RealVector n0 = equilibrium_density(smooth_profile(g, rng), 0.05, g);
  const Trajectory t = QddSolver(g, small_config(1e-3), v_ext).run(n0, 0.01, 4);
  ASSERT_FALSE(t.failed);
  ASSERT_EQ(t.snapshots.size(), 4u); // steps 0, 4, 8, 10
  EXPECT_EQ(t.snapshots[3].step, 10);
  EXPECT_EQ(t.snapshots[0].density, n0);
  EXPECT_EQ(t.snapshots[1].chemical_potential.size(), 40);
  EXPECT_LT(t.max_step_mass_change, 1e-10);

  QddConfig c = small_config(1e-3);
  c.equilibrium.max_iterations = 1;
  const Trajectory bad = QddSolver(g, c, v_ext).run(n0, 0.01, 1);
  EXPECT_TRUE(bad.failed);
  EXPECT_THROW(std::rethrow_exception(bad.error), ConvergenceError);
}
