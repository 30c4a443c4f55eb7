#pragma once

#include "activecate/common.hpp"

namespace activecate {

inline constexpr double kJitterStart = 1e-8;
inline constexpr double kJitterMax = 1e-3;

/// Lower Cholesky factor of a symmetric matrix plus the diagonal jitter that
/// was needed to obtain it.
struct JitteredCholesky {
  Matrix lower;
  double jitter = 0.0;

  double log_det() const { return 2.0 * lower.diagonal().array().log().sum(); }
  Vector solve(const Vector& b) const;
  Matrix solve_lower(const Matrix& b) const;
};

/// Factorizes `a` as is, then with jitter 1e-8, 1e-7, ... up to 1e-3 (scaled
/// by the mean diagonal when `relative` is set). Throws NumericalError when
/// every attempt fails.
JitteredCholesky cholesky_with_jitter(const Matrix& a, double start = kJitterStart, bool relative = false);

/// log |a| for a symmetric PSD matrix; 0x0 gives 0. Returns -inf for singular
/// input that cannot be rescued by jitter.
double log_det_psd(const Matrix& a);

/// Unbiased sample covariance of the rows of `draws` (divisor n - 1).
Matrix sample_covariance(const Matrix& draws);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& a);

}  // namespace activecate
