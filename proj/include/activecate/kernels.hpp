#pragma once

#include "activecate/common.hpp"

#include <string>

namespace activecate {

enum class KernelFamily { rbf, matern52 };

KernelFamily parse_kernel_family(const std::string& name);
std::string to_string(KernelFamily family);

/// Stationary ARD kernel over covariates.
struct KernelConfig {
  KernelFamily family = KernelFamily::rbf;
  Vector lengthscales;  // one per covariate dimension
  double signal_variance = 1.0;

  /// Throws InputError unless every scale parameter is positive and finite.
  void validate() const;
  static KernelConfig isotropic(KernelFamily family, Index dim, double lengthscale, double variance);
};

/// 2x2 task covariance B of the coregionalized (CMGP) prior, cov(f_t(x), f_s(x')) = B[t,s] k(x,x').
struct CoregionalizationConfig {
  Eigen::Matrix2d task_covariance = Eigen::Matrix2d::Identity();

  /// B = L L^T with L = [[l00, 0], [l10, l11]]; PSD for any real entries.
  static CoregionalizationConfig from_cholesky(double l00, double l10, double l11);
  void validate() const;
};

using ConstVectorRef = Eigen::Ref<const Vector>;

double rbf_kernel(const ConstVectorRef& x1, const ConstVectorRef& x2, const KernelConfig& cfg);
double matern52_kernel(const ConstVectorRef& x1, const ConstVectorRef& x2, const KernelConfig& cfg);
/// Dispatches on cfg.family.
double base_kernel(const ConstVectorRef& x1, const ConstVectorRef& x2, const KernelConfig& cfg);

/// Matrix of k(a_i, b_j) over the rows of a and b.
Matrix kernel_matrix(const Matrix& a, const Matrix& b, const KernelConfig& cfg);

/// B[t1,t2] * k(x1,x2).
double cmgp_joint_kernel(const ConstVectorRef& x1, int t1, const ConstVectorRef& x2, int t2,
                         const KernelConfig& kernel, const CoregionalizationConfig& coreg);

/// Arm-structured kernel of the non-stationary GP over X x {0,1}:
/// f(x, t) = g(x) + t h(x) with g ~ GP(k0) and h ~ GP(k1), so
///   t = t' = 0 -> k0,  t = t' = 1 -> k0 + k1,  t != t' -> k0.
/// The CATE is h, whose prior kernel is k1.
double nsgp_joint_kernel(const ConstVectorRef& x1, int t1, const ConstVectorRef& x2, int t2,
                         const KernelConfig& k0, const KernelConfig& k1);

void check_treatment(int t);

}  // namespace activecate
