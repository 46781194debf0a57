#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

#include "qlbgk/error.hpp"

namespace qlbgk {

using RealVector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using Complex = std::complex<double>;

/// Uniform mesh of [0,1] with N interior nodes x_p = p*dx, p = 1..N and
/// dx = 1/(N+1). Index i = 0..N-1 in code refers to node x_{i+1}.
class Grid {
public:
  explicit Grid(int points);

  int size() const noexcept { return points_; }
  double dx() const noexcept { return dx_; }

  /// Coordinate of the 0-based node i.
  double node(int i) const noexcept { return (i + 1) * dx_; }
  RealVector nodes() const;

  /// Cell interface (i + 1/2) dx, i = 0..N. It lies between 0-based nodes
  /// i-1 and i; midpoint(0) and midpoint(N) are the boundary half cells.
  double midpoint(int i) const noexcept { return (i + 0.5) * dx_; }

  friend bool operator==(const Grid& a, const Grid& b) noexcept {
    return a.points_ == b.points_;
  }

private:
  int points_;
  double dx_;
};

/// A breakpoint moved onto the nearest cell interface.
struct SnappedBreakpoint {
  double requested;
  double snapped;
  int index; ///< midpoint index k, snapped = (k + 1/2) dx
};

/// Snaps x to the nearest midpoint (k + 1/2) dx, k = 0..N, so that a jump of
/// a piecewise-constant potential never falls inside a quadrature cell.
SnappedBreakpoint snap_to_midpoint(const Grid& grid, double x);

/// N x N tridiagonal matrix stored by diagonals. `lower(i)` is entry
/// (i+1, i) and `upper(i)` is entry (i, i+1).
struct TridiagonalOperator {
  enum class Kind { symmetric, general };

  RealVector lower;
  RealVector diag;
  RealVector upper;
  Kind kind = Kind::symmetric;

  static TridiagonalOperator symmetric(RealVector diag, RealVector off);

  int size() const noexcept { return static_cast<int>(diag.size()); }
  bool is_symmetric() const noexcept { return kind == Kind::symmetric; }

  template <typename Derived>
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>
  apply(const Eigen::MatrixBase<Derived>& v) const {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = diag.size();
    if (v.size() != n) {
      throw InvalidArgument("tridiagonal apply: length mismatch");
    }
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Scalar acc = diag(i) * v(i);
      if (i > 0) acc += lower(i - 1) * v(i - 1);
      if (i + 1 < n) acc += upper(i) * v(i + 1);
      out(i) = acc;
    }
    return out;
  }

  /// Applies the transpose.
  template <typename Derived>
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>
  apply_transpose(const Eigen::MatrixBase<Derived>& v) const {
    return transposed().apply(v);
  }

  TridiagonalOperator transposed() const;
  TridiagonalOperator scaled(double factor) const;
  /// this + diag(shift)
  TridiagonalOperator plus_diagonal(const RealVector& shift) const;
  Eigen::MatrixXd to_dense() const;
};

/// Neumann Laplacian (1/dx^2) tridiag(1, [-1, -2, ..., -2, -1], 1).
TridiagonalOperator build_neumann_laplacian(const Grid& grid);

/// Dirichlet Laplacian (1/dx^2) tridiag(1, -2, 1).
TridiagonalOperator build_dirichlet_laplacian(const Grid& grid);

/// Forward/backward difference matrices of the drift-diffusion scheme,
/// including their boundary rows. All scaled by 1/dx.
struct DifferenceMatrices {
  TridiagonalOperator plus;        ///< D+, last row zero
  TridiagonalOperator minus;       ///< D-, first row zero
  TridiagonalOperator plus_tilde;  ///< D~+, last row (0..0,-1)
  TridiagonalOperator minus_tilde; ///< D~-, first row (1,0..0)
};

DifferenceMatrices build_difference_matrices(const Grid& grid);

/// Discrete inner product dx * sum conj(u_p) v_p.
template <typename DerivedU, typename DerivedV>
auto inner_product(const Eigen::MatrixBase<DerivedU>& u,
                   const Eigen::MatrixBase<DerivedV>& v, const Grid& grid) {
  if (u.size() != v.size()) {
    throw InvalidArgument("inner_product: length mismatch");
  }
  return grid.dx() * u.dot(v); // Eigen's dot conjugates the first argument
}

/// Solves alpha^2 * Delta_Dir * V = n for the Poisson potential.
RealVector solve_poisson(const RealVector& density, double alpha,
                         const Grid& grid);

} // namespace qlbgk
