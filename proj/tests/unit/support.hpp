#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "qlbgk/grid.hpp"

namespace qlbgk::testing {

inline RealVector random_vector(int n, std::mt19937& rng, double lo = -1.0,
                                double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  RealVector v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

inline ComplexVector random_complex(int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ComplexVector v(n);
  for (int i = 0; i < n; ++i) v(i) = Complex(u(rng), u(rng));
  return v;
}

/// Low-frequency trigonometric profile with random coefficients.
inline RealVector smooth_profile(const Grid& grid, std::mt19937& rng,
                                 double amplitude = 1.0, int modes = 3) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RealVector v = RealVector::Zero(grid.size());
  for (int k = 1; k <= modes; ++k) {
    const double a = u(rng) / k;
    const double phase = 3.0 * u(rng);
    for (int i = 0; i < grid.size(); ++i) {
      v(i) += amplitude * a * std::cos(k * M_PI * grid.node(i) + phase);
    }
  }
  return v;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

} // namespace qlbgk::testing
