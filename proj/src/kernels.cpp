#include "activecate/kernels.hpp"

#include <cmath>

namespace activecate {

KernelFamily parse_kernel_family(const std::string& name) {
  if (name == "rbf") return KernelFamily::rbf;
  if (name == "matern52") return KernelFamily::matern52;
  throw InputError("unknown kernel family '" + name + "' (expected rbf or matern52)");
}

std::string to_string(KernelFamily family) {
  return family == KernelFamily::rbf ? "rbf" : "matern52";
}

void KernelConfig::validate() const {
  if (lengthscales.size() == 0) throw InputError("kernel: no lengthscales");
  if (!(lengthscales.array() > 0.0).all() || !lengthscales.allFinite())
    throw InputError("kernel: lengthscales must be positive and finite");
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
    throw InputError("kernel: signal variance must be positive and finite");
}

KernelConfig KernelConfig::isotropic(KernelFamily family, Index dim, double lengthscale, double variance) {
  KernelConfig cfg;
  cfg.family = family;
  cfg.lengthscales = Vector::Constant(dim, lengthscale);
  cfg.signal_variance = variance;
  return cfg;
}

CoregionalizationConfig CoregionalizationConfig::from_cholesky(double l00, double l10, double l11) {
  Eigen::Matrix2d l;
  l << l00, 0.0, l10, l11;
  CoregionalizationConfig c;
  c.task_covariance = l * l.transpose();
  return c;
}

void CoregionalizationConfig::validate() const {
  const auto& b = task_covariance;
  if (!b.allFinite()) throw InputError("coregionalization: non-finite entries");
  if (std::abs(b(0, 1) - b(1, 0)) > 1e-12 * (1.0 + b.cwiseAbs().maxCoeff()))
    throw InputError("coregionalization: task covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(b, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-12 * (1.0 + b.cwiseAbs().maxCoeff()))
    throw InputError("coregionalization: task covariance is not positive semidefinite");
}

namespace {

void check_dims(const ConstVectorRef& x1, const ConstVectorRef& x2, const KernelConfig& cfg) {
  if (x1.size() != cfg.lengthscales.size() || x2.size() != cfg.lengthscales.size())
    throw InputError("kernel: input dimension " + std::to_string(x1.size()) + "/" + std::to_string(x2.size()) +
                     " does not match " + std::to_string(cfg.lengthscales.size()) + " lengthscales");
}

double scaled_sq_dist(const ConstVectorRef& x1, const ConstVectorRef& x2, const Vector& ls) {
  return ((x1 - x2).array() / ls.array()).square().sum();
}

inline double matern52_of_r(double r) {
  const double s5r = std::sqrt(5.0) * r;
  return (1.0 + s5r + 5.0 * r * r / 3.0) * std::exp(-s5r);
}

}  // namespace

double rbf_kernel(const ConstVectorRef& x1, const ConstVectorRef& x2, const KernelConfig& cfg) {
  check_dims(x1, x2, cfg);
  return cfg.signal_variance * std::exp(-0.5 * scaled_sq_dist(x1, x2, cfg.lengthscales));
}

double matern52_kernel(const ConstVectorRef& x1, const ConstVectorRef& x2, const KernelConfig& cfg) {
  check_dims(x1, x2, cfg);
  return cfg.signal_variance * matern52_of_r(std::sqrt(scaled_sq_dist(x1, x2, cfg.lengthscales)));
}

double base_kernel(const ConstVectorRef& x1, const ConstVectorRef& x2, const KernelConfig& cfg) {
  return cfg.family == KernelFamily::rbf ? rbf_kernel(x1, x2, cfg) : matern52_kernel(x1, x2, cfg);
}

Matrix kernel_matrix(const Matrix& a, const Matrix& b, const KernelConfig& cfg) {
  const Index d = cfg.lengthscales.size();
  if (a.cols() != d || b.cols() != d)
    throw InputError("kernel_matrix: covariate dimension does not match lengthscales");
  const Vector inv = cfg.lengthscales.cwiseInverse();
  const Matrix as = a * inv.asDiagonal();
  const Matrix bs = b * inv.asDiagonal();
  const Vector an = as.rowwise().squaredNorm();
  const Vector bn = bs.rowwise().squaredNorm();
  Matrix sq = (-2.0 * as * bs.transpose()).colwise() + an;
  sq.rowwise() += bn.transpose();
  sq = sq.cwiseMax(0.0);
  if (cfg.family == KernelFamily::rbf) return cfg.signal_variance * (-0.5 * sq.array()).exp().matrix();
  return cfg.signal_variance * sq.unaryExpr([](double s) { return matern52_of_r(std::sqrt(s)); });
}

void check_treatment(int t) {
  if (t != 0 && t != 1) throw InputError("treatment must be 0 or 1, got " + std::to_string(t));
}

double cmgp_joint_kernel(const ConstVectorRef& x1, int t1, const ConstVectorRef& x2, int t2,
                         const KernelConfig& kernel, const CoregionalizationConfig& coreg) {
  check_treatment(t1);
  check_treatment(t2);
  return coreg.task_covariance(t1, t2) * base_kernel(x1, x2, kernel);
}

double nsgp_joint_kernel(const ConstVectorRef& x1, int t1, const ConstVectorRef& x2, int t2,
                         const KernelConfig& k0, const KernelConfig& k1) {
  check_treatment(t1);
  check_treatment(t2);
  const double shared = base_kernel(x1, x2, k0);
  if (t1 == 1 && t2 == 1) return shared + base_kernel(x1, x2, k1);
  return shared;
}

}  // namespace activecate
