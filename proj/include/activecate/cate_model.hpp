#pragma once

#include "activecate/belief.hpp"
#include "activecate/common.hpp"

#include <memory>
#include <string>

namespace activecate {

/// Labeled training data: covariate rows, binary treatments, factual outcomes.
struct LabeledData {
  Matrix x;
  IndexVector t;
  Vector y;

  Index size() const { return x.rows(); }
  Index dim() const { return x.cols(); }
  /// Throws InputError on shape mismatch, invalid treatments or non-finite values.
  void validate() const;
};

/// Set of latent potential-outcome values f_t(x), one per row.
struct LatentPoints {
  Matrix x;
  IndexVector t;

  Index size() const { return x.rows(); }
  static LatentPoints single(const Vector& x, int t);
  /// Every row of x paired with the same arm.
  static LatentPoints arm(const Matrix& x, int t);
};

/// Fitted CATE estimator with a joint Gaussian predictive posterior over the
/// latent surfaces f_0, f_1. Implementations are immutable once built, so all
/// queries are safe to run concurrently.
class CateModel {
 public:
  virtual ~CateModel() = default;

  virtual std::string name() const = 0;
  virtual Index dim() const = 0;
  /// Observation noise variance sigma_n^2 (Var[y] = Var[f] + sigma_n^2).
  virtual double noise_variance() const = 0;

  virtual Vector latent_mean(const LatentPoints& p) const = 0;
  /// Posterior covariance matrix between f at the rows of a and f at the rows of b.
  virtual Matrix latent_cov(const LatentPoints& a, const LatentPoints& b) const = 0;
  /// Row-wise cov(f_{ta_i}(x_i), f_{tb_i}(x_i)); a and b share covariates.
  virtual Vector latent_cov_paired(const Matrix& x, const IndexVector& ta, const IndexVector& tb) const = 0;

  Vector latent_var(const LatentPoints& p) const;
  Vector cate_mean(const Matrix& x) const;
  Vector cate_var(const Matrix& x) const;
};

using CateModelPtr = std::shared_ptr<const CateModel>;

/// 3-dimensional belief over (y at the candidate incl. noise, f0(target), f1(target)).
JointGaussianBelief joint_belief(const CateModel& model, const Vector& candidate_x, int candidate_t,
                                 const Vector& target_x);

/// Belief over y at the candidate followed by (f0, f1, tau) at every target row,
/// labeled "y", "f0@j", "f1@j", "tau@j".
JointGaussianBelief candidate_target_belief(const CateModel& model, const Vector& candidate_x, int candidate_t,
                                            const Matrix& targets);

}  // namespace activecate
