#include "qlbgk/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qlbgk/tridiagonal_solve.hpp"

namespace qlbgk {

Grid::Grid(int points) : points_(points), dx_(0.0) {
  if (points < 1) {
    throw InvalidArgument("grid needs at least one interior point, got " +
                          std::to_string(points));
  }
  dx_ = 1.0 / (points + 1);
}

RealVector Grid::nodes() const {
  RealVector x(points_);
  for (int i = 0; i < points_; ++i) x(i) = node(i);
  return x;
}

SnappedBreakpoint snap_to_midpoint(const Grid& grid, double x) {
  const double k = std::round(x / grid.dx() - 0.5);
  const int index = static_cast<int>(std::clamp(k, 0.0, double(grid.size())));
  return {x, grid.midpoint(index), index};
}

TridiagonalOperator TridiagonalOperator::symmetric(RealVector diag,
                                                   RealVector off) {
  TridiagonalOperator op;
  op.lower = off;
  op.upper = std::move(off);
  op.diag = std::move(diag);
  op.kind = Kind::symmetric;
  return op;
}

TridiagonalOperator TridiagonalOperator::transposed() const {
  TridiagonalOperator t = *this;
  std::swap(t.lower, t.upper);
  return t;
}

TridiagonalOperator TridiagonalOperator::scaled(double factor) const {
  TridiagonalOperator t = *this;
  t.lower *= factor;
  t.diag *= factor;
  t.upper *= factor;
  return t;
}

TridiagonalOperator
TridiagonalOperator::plus_diagonal(const RealVector& shift) const {
  if (shift.size() != diag.size()) {
    throw InvalidArgument("plus_diagonal: length mismatch");
  }
  TridiagonalOperator t = *this;
  t.diag += shift;
  return t;
}

Eigen::MatrixXd TridiagonalOperator::to_dense() const {
  const Eigen::Index n = diag.size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = diag(i);
    if (i + 1 < n) {
      m(i + 1, i) = lower(i);
      m(i, i + 1) = upper(i);
    }
  }
  return m;
}

namespace {

void require_laplacian_grid(const Grid& grid) {
  if (grid.size() < 2) {
    throw InvalidArgument("invalid grid: difference operators need N >= 2");
  }
}

} // namespace

TridiagonalOperator build_neumann_laplacian(const Grid& grid) {
  require_laplacian_grid(grid);
  const int n = grid.size();
  const double s = 1.0 / (grid.dx() * grid.dx());
  RealVector diag = RealVector::Constant(n, -2.0 * s);
  diag(0) = -s;
  diag(n - 1) = -s;
  return TridiagonalOperator::symmetric(std::move(diag),
                                        RealVector::Constant(n - 1, s));
}

TridiagonalOperator build_dirichlet_laplacian(const Grid& grid) {
  require_laplacian_grid(grid);
  const int n = grid.size();
  const double s = 1.0 / (grid.dx() * grid.dx());
  return TridiagonalOperator::symmetric(RealVector::Constant(n, -2.0 * s),
                                        RealVector::Constant(n - 1, s));
}

DifferenceMatrices build_difference_matrices(const Grid& grid) {
  require_laplacian_grid(grid);
  const int n = grid.size();
  const double s = 1.0 / grid.dx();
  auto general = [n](double lower, double diag, double upper) {
    TridiagonalOperator op;
    op.lower = RealVector::Constant(n - 1, lower);
    op.diag = RealVector::Constant(n, diag);
    op.upper = RealVector::Constant(n - 1, upper);
    op.kind = TridiagonalOperator::Kind::general;
    return op;
  };

  DifferenceMatrices d;
  d.plus = general(0.0, -s, s);
  d.plus.diag(n - 1) = 0.0;
  d.minus = general(-s, s, 0.0);
  d.minus.diag(0) = 0.0;
  d.plus_tilde = general(0.0, -s, s);
  d.minus_tilde = general(-s, s, 0.0);
  return d;
}

RealVector solve_poisson(const RealVector& density, double alpha,
                         const Grid& grid) {
  if (!(alpha > 0.0)) {
    throw InvalidArgument("solve_poisson: alpha must be positive");
  }
  if (density.size() != grid.size()) {
    throw InvalidArgument("solve_poisson: density length does not match grid");
  }
  if (!density.allFinite()) {
    throw InvalidArgument("solve_poisson: non-finite density");
  }
  const TridiagonalOperator lap =
      build_dirichlet_laplacian(grid).scaled(alpha * alpha);
  const TridiagonalFactorization<double> lu(lap.lower, lap.diag, lap.upper);
  RealVector v = lu.solve(density);
  if (density.cwiseAbs().maxCoeff() > 0.0 &&
      tridiagonal_relative_residual<double>(lap.lower, lap.diag, lap.upper, v,
                                            density) > 1e-10) {
    throw SingularSystemError("solve_poisson: residual check failed");
  }
  return v;
}

} // namespace qlbgk
