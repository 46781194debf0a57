#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qlbgk/equilibrium.hpp"
#include "qlbgk/qle.hpp"
#include "qlbgk/scenarios.hpp"
#include "support.hpp"

using namespace qlbgk;
using qlbgk::testing::random_complex;
using qlbgk::testing::smooth_profile;

namespace {

QleConfig small_config() {
  QleConfig c;
  c.time_step = 1e-3;
  c.epsilon = 0.1;
  c.beta = 0.05;
  c.alpha = 1.0;
  return c;
}

struct Fixture {
  Grid grid{60};
  RealVector v_ext;
  DensityOperator rho0{Grid(1), RealVector(0), Eigen::MatrixXcd(1, 0)};
};

Fixture small_setup(unsigned seed = 1) {
  std::mt19937 rng(seed);
  Fixture s;
  s.v_ext = smooth_profile(s.grid, rng, 2.0);
  s.rho0 = ic_maxwellian(s.grid, 0.05, smooth_profile(s.grid, rng, 2.0));
  return s;
}

/// exp(-i t H) from a dense eigendecomposition of the real symmetric H.
Eigen::MatrixXcd dense_propagator(const TridiagonalOperator& h, double t) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.to_dense());
  ComplexVector phase(es.eigenvalues().size());
  for (Eigen::Index k = 0; k < phase.size(); ++k) {
    phase(k) = std::polar(1.0, -t * es.eigenvalues()(k));
  }
  const Eigen::MatrixXcd v = es.eigenvectors().cast<Complex>();
  return v * phase.asDiagonal() * v.adjoint();
}

double max_norm_defect(const DensityOperator& rho) {
  const RealVector norms =
      rho.grid().dx() * rho.modes().cwiseAbs2().colwise().sum().transpose();
  return (norms.array() - 1.0).abs().maxCoeff();
}

} // namespace

TEST(KineticStep, MatchesDenseExponentialToThirdOrder) {
  const Grid g(8);
  std::mt19937 rng(2);
  QleConfig c = small_config();
  c.epsilon = 0.5;
  const QleSolver solver(g, c, smooth_profile(g, rng));
  ComplexVector psi = random_complex(8, rng);
  psi /= std::sqrt(g.dx()) * psi.norm();
  const DensityOperator rho(g, RealVector::Ones(1), psi);
  double prev = 0.0;
  for (double t : {4e-3, 2e-3, 1e-3}) {
    const ComplexVector exact =
        dense_propagator(solver.kinetic_generator(), t) * psi;
    const double err =
        (solver.kinetic_half_step(rho, t).modes().col(0) - exact).norm() *
        std::sqrt(g.dx());
    if (prev > 0.0) EXPECT_NEAR(std::log2(prev / err), 3.0, 0.2);
    prev = err;
  }
}

TEST(KineticStep, UnitaryAndFixesConstantMode) {
  const Fixture s = small_setup();
  const QleSolver solver(s.grid, small_config(), s.v_ext);
  DensityOperator rho = s.rho0;
  for (int k = 0; k < 100; ++k) rho = solver.kinetic_half_step(rho, 1e-3);
  EXPECT_LT(max_norm_defect(rho), 1e-12);

  const QleSolver free(s.grid, small_config(), RealVector::Zero(60));
  const Eigen::MatrixXcd flat =
      Eigen::MatrixXcd::Constant(60, 1, 1.0 / std::sqrt(60 * s.grid.dx()));
  const DensityOperator c(s.grid, RealVector::Ones(1), flat);
  EXPECT_LT((free.kinetic_half_step(c, 0.01).modes() - flat).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(PhaseStep, IdentityDensityAndGlobalPhase) {
  const Fixture s = small_setup();
  const QleSolver solver(s.grid, small_config(), s.v_ext);
  EXPECT_EQ(solver.poisson_phase_step(s.rho0, 0.0).modes(), s.rho0.modes());
  const DensityOperator out = solver.poisson_phase_step(s.rho0, 0.05);
  EXPECT_LT((local_density(out) - local_density(s.rho0)).cwiseAbs().maxCoeff(),
            1e-14 * local_density(s.rho0).maxCoeff());
  const DensityOperator one(s.grid, RealVector::Ones(1),
                            s.rho0.modes().leftCols(1));
  const DensityOperator rotated =
      solver.phase_step(one, RealVector::Constant(60, 0.3), 0.05);
  EXPECT_LT(kernel_distance(rotated, one), 1e-13);
}

TEST(TransportStep, ReducesToKineticWithoutPoisson) {
  const Fixture s = small_setup();
  QleConfig c = small_config();
  c.disable_poisson = true;
  const QleSolver solver(s.grid, c, s.v_ext);
  const DensityOperator a = solver.transport_step(s.rho0, 2e-3);
  const DensityOperator b =
      solver.kinetic_half_step(solver.kinetic_half_step(s.rho0, 1e-3), 1e-3);
  EXPECT_LT((a.modes() - b.modes()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(TransportStep, PreservesTraceAndNorms) {
  const Fixture s = small_setup();
  const QleSolver solver(s.grid, small_config(), s.v_ext);
  DensityOperator rho = s.rho0;
  const double t0 = trace(rho);
  for (int k = 0; k < 100; ++k) rho = solver.transport_step(rho, 1e-3);
  EXPECT_LT(std::abs(trace(rho) - t0), 1e-12 * t0);
  EXPECT_LT(std::abs(s.grid.dx() * local_density(rho).sum() - t0), 1e-12 * t0);
  EXPECT_LT(max_norm_defect(rho), 1e-12);
}

TEST(CollisionStep, ZeroDurationIsIdentity) {
  const Fixture s = small_setup();
  const QleSolver solver(s.grid, small_config(), s.v_ext);
  const CollisionResult r = solver.collision_step(s.rho0, 0.0);
  EXPECT_LT(kernel_distance(r.rho, s.rho0), 1e-10);
}

TEST(CollisionStep, LongDurationGivesMaxwellian) {
  const Fixture s = small_setup();
  QleConfig c = small_config();
  const QleSolver solver(s.grid, c, s.v_ext);
  // A non-equilibrium state: the kinetic flow moves rho0 off equilibrium.
  DensityOperator rho = s.rho0;
  for (int k = 0; k < 20; ++k) rho = solver.transport_step(rho, 1e-3);
  const CollisionResult r =
      solver.collision_step(rho, 50.0 * c.epsilon * c.epsilon);
  const MaxwellianResult m = maxwellian(local_density(rho), c.beta, s.grid);
  EXPECT_LT(kernel_distance(r.rho, m.rho), 1e-6);
}

TEST(CollisionStep, PreservesLocalDensityAndTrace) {
  const Fixture s = small_setup();
  const QleConfig c = small_config();
  const QleSolver solver(s.grid, c, s.v_ext);
  DensityOperator rho = s.rho0;
  for (int k = 0; k < 20; ++k) rho = solver.transport_step(rho, 1e-3);
  const RealVector n = local_density(rho);
  const CollisionResult r = solver.collision_step(rho, 5e-3);
  EXPECT_LE((local_density(r.rho) - n).norm() / n.norm(), 1e-4);
  EXPECT_LT(std::abs(trace(r.rho) - trace(rho)), 1e-6 * trace(rho));
  const Eigen::MatrixXcd k = assemble_matrix(r.rho);
  EXPECT_LT((k - k.adjoint()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(QleStep, TraceConservedAndHermitian) {
  const Fixture s = small_setup();
  const QleConfig c = small_config();
  const DensityOperator out = qle_step(s.rho0, c, s.v_ext);
  EXPECT_LE(std::abs(trace(out) - trace(s.rho0)),
            1e-10 * trace(s.rho0) + out.discarded_mass());
  const Eigen::MatrixXcd k = assemble_matrix(out);
  EXPECT_LT((k - k.adjoint()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_GE(out.weights().minCoeff(), 0.0);
}

TEST(QleStep, LargeEpsilonIsNearlyPureTransport) {
  const Fixture s = small_setup();
  QleConfig c = small_config();
  c.epsilon = 10.0;
  c.time_step = 1e-3;
  const QleSolver solver(s.grid, c, s.v_ext);
  const DensityOperator stepped = solver.step({s.rho0, std::nullopt, 0.0, 0}).rho;
  const DensityOperator transported = solver.transport_step(s.rho0, 1e-3);
  const double contraction = 1.0 - std::exp(-c.time_step / (c.epsilon * c.epsilon));
  const double scale = assemble_matrix(s.rho0).cwiseAbs().maxCoeff();
  EXPECT_LT(kernel_distance(stepped, transported), 10.0 * contraction * scale);
}

TEST(QleRun, ZeroTimeAndMassSeries) {
  const Fixture s = small_setup();
  const QleSolver solver(s.grid, small_config(), s.v_ext);
  const Trajectory zero = solver.run(s.rho0, 0.0, 1);
  ASSERT_EQ(zero.snapshots.size(), 1u);
  EXPECT_EQ(zero.snapshots[0].time, 0.0);

  int observed = 0;
  const Trajectory t =
      solver.run(s.rho0, 0.02, 5, [&](const Snapshot&) { ++observed; });
  ASSERT_FALSE(t.failed) << t.failure;
  EXPECT_EQ(t.snapshots.size(), 5u);
  EXPECT_EQ(observed, 5);
  EXPECT_NEAR(t.snapshots.back().time, 0.02, 1e-15);
  const double m0 = t.snapshots.front().trace;
  for (const Snapshot& snap : t.snapshots) {
    EXPECT_LT(std::abs(snap.trace - m0), 1e-8 * m0);
  }
  EXPECT_LT(t.max_step_mass_change, 1e-12);
}

TEST(QleRun, FailureIsRecorded) {
  const Fixture s = small_setup();
  QleConfig c = small_config();
  c.equilibrium.max_iterations = 1;
  const QleSolver solver(s.grid, c, s.v_ext);
  const Trajectory t = solver.run(s.rho0, 0.01, 1);
  EXPECT_TRUE(t.failed);
  EXPECT_EQ(t.snapshots.size(), 1u);
  EXPECT_THROW(std::rethrow_exception(t.error), ConvergenceError);
}

TEST(QleConfig, Validation) {
  QleConfig c = small_config();
  c.epsilon = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  const Grid g(10);
  EXPECT_THROW(QleSolver(g, small_config(), RealVector::Zero(9)),
               InvalidArgument);
}
