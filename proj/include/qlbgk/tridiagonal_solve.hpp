#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "qlbgk/error.hpp"

namespace qlbgk {

/// LU factors of a tridiagonal matrix without pivoting (Thomas recurrence).
/// Factor once, solve many right-hand sides in O(N) each.
template <typename Scalar>
class TridiagonalFactorization {
public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  TridiagonalFactorization() = default;

  /// lower(i) = A(i+1,i), diag(i) = A(i,i), upper(i) = A(i,i+1).
  TridiagonalFactorization(const Vector& lower, const Vector& diag,
                           const Vector& upper)
      : lower_(lower), upper_(upper), pivot_(diag.size()) {
    const Eigen::Index n = diag.size();
    if (n == 0 || lower.size() != n - 1 || upper.size() != n - 1) {
      throw InvalidArgument("tridiagonal factorization: inconsistent sizes");
    }
    const double scale = diag.cwiseAbs().maxCoeff() + 1e-300;
    pivot_(0) = diag(0);
    for (Eigen::Index i = 1; i < n; ++i) {
      if (std::abs(pivot_(i - 1)) <= 1e-14 * scale) {
        throw SingularSystemError("tridiagonal factorization: zero pivot at row " +
                                  std::to_string(i - 1));
      }
      pivot_(i) = diag(i) - lower(i - 1) / pivot_(i - 1) * upper(i - 1);
    }
    if (std::abs(pivot_(n - 1)) <= 1e-14 * scale) {
      throw SingularSystemError("tridiagonal factorization: zero pivot at row " +
                                std::to_string(n - 1));
    }
  }

  Eigen::Index size() const noexcept { return pivot_.size(); }

  template <typename Derived>
  Vector solve(const Eigen::MatrixBase<Derived>& rhs) const {
    const Eigen::Index n = pivot_.size();
    if (rhs.size() != n) {
      throw InvalidArgument("tridiagonal solve: length mismatch");
    }
    Vector y(n);
    y(0) = rhs(0);
    for (Eigen::Index i = 1; i < n; ++i) {
      y(i) = rhs(i) - lower_(i - 1) / pivot_(i - 1) * y(i - 1);
    }
    Vector x(n);
    x(n - 1) = y(n - 1) / pivot_(n - 1);
    for (Eigen::Index i = n - 2; i >= 0; --i) {
      x(i) = (y(i) - upper_(i) * x(i + 1)) / pivot_(i);
    }
    return x;
  }

private:
  Vector lower_;
  Vector upper_;
  Vector pivot_;
};

/// Residual of a tridiagonal system, max-norm relative to the right-hand side.
template <typename Scalar>
double tridiagonal_relative_residual(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& lower,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& diag,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& upper,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& rhs) {
  const Eigen::Index n = diag.size();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar ax = diag(i) * x(i);
    if (i > 0) ax += lower(i - 1) * x(i - 1);
    if (i + 1 < n) ax += upper(i) * x(i + 1);
    worst = std::max(worst, std::abs(ax - rhs(i)));
  }
  const double norm = rhs.cwiseAbs().maxCoeff();
  return norm > 0.0 ? worst / norm : worst;
}

} // namespace qlbgk
