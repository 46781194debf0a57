#include "qlbgk/linalg.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace qlbgk {

namespace {

template <typename Derived>
void fix_phase(Eigen::MatrixBase<Derived>& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Eigen::Index imax = 0;
    vectors.col(j).cwiseAbs().maxCoeff(&imax);
    const auto pivot = vectors(imax, j);
    if (std::abs(pivot) == 0.0) continue;
    vectors.col(j) *= std::abs(pivot) / pivot;
  }
}

} // namespace

SpectralDecomposition eig_sym_tridiag(const TridiagonalOperator& op,
                                      const Grid& grid) {
  if (!op.is_symmetric()) {
    throw InvalidArgument("eig_sym_tridiag: operator is not symmetric");
  }
  const lapack_int n = op.size();
  if (n != grid.size()) {
    throw InvalidArgument("eig_sym_tridiag: operator size does not match grid");
  }
  std::vector<double> d(op.diag.data(), op.diag.data() + n);
  std::vector<double> e(static_cast<std::size_t>(n), 0.0);
  std::copy(op.lower.data(), op.lower.data() + (n - 1), e.begin());

  SpectralDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
  lapack_int found = 0;
  lapack_logical tryrac = 1;
  const lapack_int info = LAPACKE_dstemr(
      LAPACK_COL_MAJOR, 'V', 'A', n, d.data(), e.data(), 0.0, 0.0, 0, 0,
      &found, out.eigenvalues.data(), out.eigenvectors.data(), n, n,
      support.data(), &tryrac);
  if (info != 0 || found != n) {
    throw ConvergenceError("eig_sym_tridiag: LAPACK dstemr failed (info=" +
                           std::to_string(info) + ") at eigenvalue index " +
                           std::to_string(info > 0 ? info - 1 : found));
  }
  fix_phase(out.eigenvectors);
  out.eigenvectors /= std::sqrt(grid.dx());
  return out;
}

RealVector eigvals_sym_tridiag(const TridiagonalOperator& op) {
  if (!op.is_symmetric()) {
    throw InvalidArgument("eigvals_sym_tridiag: operator is not symmetric");
  }
  const lapack_int n = op.size();
  RealVector d = op.diag;
  std::vector<double> e(static_cast<std::size_t>(n), 0.0);
  std::copy(op.lower.data(), op.lower.data() + (n - 1), e.begin());
  const lapack_int info = LAPACKE_dsterf(n, d.data(), e.data());
  if (info != 0) {
    throw ConvergenceError("eigvals_sym_tridiag: dsterf failed to converge, " +
                           std::to_string(info) + " off-diagonals remain");
  }
  return d;
}

HermitianDecomposition eig_hermitian(const Eigen::MatrixXcd& kernel,
                                     const Grid& grid) {
  const lapack_int n = static_cast<lapack_int>(kernel.rows());
  if (kernel.cols() != n || n != grid.size()) {
    throw InvalidArgument("eig_hermitian: matrix shape does not match grid");
  }
  const double scale = std::max(1.0, kernel.cwiseAbs().maxCoeff());
  if ((kernel - kernel.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw InvalidArgument("eig_hermitian: matrix is not Hermitian");
  }
  Eigen::MatrixXcd a = 0.5 * (kernel + kernel.adjoint());

  RealVector values(n);
  Eigen::MatrixXcd vectors(n, n);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_zheevr(
      LAPACK_COL_MAJOR, 'V', 'A', 'L', n,
      reinterpret_cast<lapack_complex_double*>(a.data()), n, 0.0, 0.0, 0, 0,
      0.0, &found, values.data(),
      reinterpret_cast<lapack_complex_double*>(vectors.data()), n,
      support.data());
  if (info != 0 || found != n) {
    throw ConvergenceError("eig_hermitian: LAPACK zheevr failed (info=" +
                           std::to_string(info) + ")");
  }

  // LAPACK returns ascending Euclidean eigenpairs (mu, u). As a density
  // kernel, M = sum (mu dx) (u/sqrt(dx)) (u/sqrt(dx))^dagger.
  HermitianDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  const double dx = grid.dx();
  const double inv_sqrt_dx = 1.0 / std::sqrt(dx);
  for (lapack_int j = 0; j < n; ++j) {
    out.eigenvalues(j) = values(n - 1 - j) * dx;
    out.eigenvectors.col(j) = vectors.col(n - 1 - j) * inv_sqrt_dx;
  }
  fix_phase(out.eigenvectors);
  return out;
}

ComplexVector solve_complex_tridiag(const ComplexTridiagonal& a,
                                    const ComplexVector& b) {
  const TridiagonalFactorization<Complex> lu(a.lower, a.diag, a.upper);
  ComplexVector x = lu.solve(b);
  if (b.size() > 0 && b.cwiseAbs().maxCoeff() > 0.0 &&
      tridiagonal_relative_residual<Complex>(a.lower, a.diag, a.upper, x, b) >
          1e-12) {
    throw SingularSystemError("solve_complex_tridiag: residual check failed");
  }
  return x;
}

void BandedLU::factorize() {
  pivots_.assign(static_cast<std::size_t>(n_), 0);
  const lapack_int info =
      LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n_, n_, kl_, ku_, ab_.data(),
                     2 * kl_ + ku_ + 1, pivots_.data());
  if (info != 0) {
    throw SingularSystemError("banded LU: zero pivot at row " +
                              std::to_string(info));
  }
}

RealVector BandedLU::solve(const RealVector& rhs) const {
  if (rhs.size() != n_) throw InvalidArgument("banded solve: length mismatch");
  RealVector x = rhs;
  const lapack_int info = LAPACKE_dgbtrs(
      LAPACK_COL_MAJOR, 'N', n_, kl_, ku_, 1, ab_.data(), 2 * kl_ + ku_ + 1,
      pivots_.data(), x.data(), n_);
  if (info != 0) throw SingularSystemError("banded solve failed");
  return x;
}

} // namespace qlbgk
