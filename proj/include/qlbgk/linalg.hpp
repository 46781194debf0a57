#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <vector>

#include "qlbgk/grid.hpp"
#include "qlbgk/tridiagonal_solve.hpp"

namespace qlbgk {

/// Spectrum of a real symmetric operator. Eigenvalues ascending; columns of
/// `eigenvectors` normalized in the dx-weighted inner product.
struct SpectralDecomposition {
  RealVector eigenvalues;
  Eigen::MatrixXd eigenvectors;
};

/// Spectrum of a dense Hermitian matrix read as a density kernel: eigenvalues
/// are weights (descending), eigenvectors are dx-normalized, and
/// sum_p w_p phi_p phi_p^dagger reproduces the matrix.
struct HermitianDecomposition {
  RealVector eigenvalues;
  Eigen::MatrixXcd eigenvectors;
};

/// Full spectrum of a symmetric tridiagonal operator (LAPACK MRRR).
/// Eigenvector signs are fixed so the largest-magnitude entry is positive.
SpectralDecomposition eig_sym_tridiag(const TridiagonalOperator& op,
                                      const Grid& grid);

/// Eigenvalues only, ascending.
RealVector eigvals_sym_tridiag(const TridiagonalOperator& op);

/// Diagonalizes a Hermitian kernel M (diagonal = density). M is symmetrized
/// as (M + M^dagger)/2 first; an asymmetry above 1e-10 is rejected.
HermitianDecomposition eig_hermitian(const Eigen::MatrixXcd& kernel,
                                     const Grid& grid);

/// Complex tridiagonal system stored by diagonals.
struct ComplexTridiagonal {
  ComplexVector lower;
  ComplexVector diag;
  ComplexVector upper;
};

/// Thomas solve of a complex tridiagonal system. Throws SingularSystemError
/// on a zero pivot or a relative residual above 1e-12.
ComplexVector solve_complex_tridiag(const ComplexTridiagonal& a,
                                    const ComplexVector& b);

/// LU factorization (partial pivoting) of a general banded matrix with `kl`
/// sub- and `ku` super-diagonals. O(n) per solve for fixed bandwidth.
class BandedLU {
public:
  /// `entry(i, j)` is queried for |i - j| within the band only.
  template <typename F>
  BandedLU(int n, int kl, int ku, F entry) : n_(n), kl_(kl), ku_(ku) {
    const int ldab = 2 * kl_ + ku_ + 1;
    ab_.assign(static_cast<std::size_t>(ldab) * n_, 0.0);
    for (int j = 0; j < n_; ++j) {
      for (int i = std::max(0, j - ku_); i <= std::min(n_ - 1, j + kl_); ++i) {
        ab_[static_cast<std::size_t>(j) * ldab + kl_ + ku_ + i - j] =
            entry(i, j);
      }
    }
    factorize();
  }

  RealVector solve(const RealVector& rhs) const;
  int size() const noexcept { return n_; }

private:
  void factorize();

  int n_;
  int kl_;
  int ku_;
  std::vector<double> ab_;
  std::vector<int> pivots_;
};

/// Largest |<phi_i, phi_j> - delta_ij| over all pairs of columns.
template <typename Derived>
double orthonormality_defect(const Eigen::MatrixBase<Derived>& vectors,
                             const Grid& grid) {
  const auto gram = (grid.dx() * (vectors.adjoint() * vectors)).eval();
  using GramType = std::decay_t<decltype(gram)>;
  return (gram - GramType::Identity(gram.rows(), gram.cols()))
      .cwiseAbs()
      .maxCoeff();
}

} // namespace qlbgk
