#pragma once

#include "activecate/belief.hpp"
#include "activecate/cate_model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace activecate {

/// Posterior draws: one row per draw, one column per labeled quantity.
struct SamplePosterior {
  std::vector<std::string> labels;
  Matrix draws;

  Index n_draws() const { return draws.rows(); }
};

/// Column means and unbiased (n-1) sample covariance of the draws.
/// Throws InputError for fewer than 2 draws or non-finite entries.
JointGaussianBelief empirical_gaussian_fit(const SamplePosterior& samples);

/// Bootstrap ensemble of ridge regressions with f(x,t) = mu(x) + t tau(x),
/// both heads linear in [1, x]. Stands in for sample-based Bayesian
/// posteriors: every member is one posterior draw.
class EnsembleLinearModel final : public CateModel {
 public:
  EnsembleLinearModel(Matrix mu_weights, Matrix tau_weights, double noise_variance, double ridge, std::uint64_t seed);

  std::string name() const override { return "ensemble"; }
  Index dim() const override { return mu_weights_.cols() - 1; }
  double noise_variance() const override { return noise_variance_; }
  Vector latent_mean(const LatentPoints& p) const override;
  Matrix latent_cov(const LatentPoints& a, const LatentPoints& b) const override;
  Vector latent_cov_paired(const Matrix& x, const IndexVector& ta, const IndexVector& tb) const override;

  /// members x points matrix of f_t(x).
  Matrix draws(const LatentPoints& p) const;
  Index members() const { return mu_weights_.rows(); }
  const Matrix& mu_weights() const { return mu_weights_; }
  const Matrix& tau_weights() const { return tau_weights_; }
  double ridge() const { return ridge_; }
  std::uint64_t seed() const { return seed_; }

 private:
  Matrix mu_weights_;   // members x (1 + d)
  Matrix tau_weights_;  // members x (1 + d)
  double noise_variance_;
  double ridge_;
  std::uint64_t seed_;
};

/// Each member is a ridge solution on a bootstrap resample of the design
/// [1, x, t, t x]; the mu intercept is unpenalized. Noise variance is the mean
/// squared residual of the ensemble-mean prediction on the training set.
EnsembleLinearModel fit_ensemble(const LabeledData& data, int n_members, double ridge, std::uint64_t seed);

/// One row per member: y at the candidate, then (f0, f1, tau) per target.
/// The y column carries epistemic spread only.
SamplePosterior posterior_draws(const EnsembleLinearModel& model, const Vector& candidate_x, int candidate_t,
                                const Matrix& targets);

/// empirical_gaussian_fit of posterior_draws with the noise variance added to Var[y].
JointGaussianBelief sample_belief(const EnsembleLinearModel& model, const Vector& candidate_x, int candidate_t,
                                  const Matrix& targets);

}  // namespace activecate
