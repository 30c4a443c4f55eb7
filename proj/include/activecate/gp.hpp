#pragma once

#include "activecate/cate_model.hpp"
#include "activecate/kernels.hpp"
#include "activecate/linalg.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace activecate {

enum class GpKind { cmgp, nsgp };

std::string to_string(GpKind kind);

/// Hyperparameters of either GP estimator.
///  CMGP: cov(f_t(x), f_s(x')) = B[t,s] k_base(x,x'); base.signal_variance is
///        kept at 1 and B carries the scale.
///  NSGP: f(x,t) = g(x) + t h(x), g ~ GP(base), h ~ GP(arm).
struct GpHyperparameters {
  GpKind kind = GpKind::cmgp;
  KernelConfig base;
  KernelConfig arm;
  CoregionalizationConfig coregionalization;
  double noise_variance = 1.0;

  void validate() const;
  /// Data-scaled starting point used by the hyperparameter search.
  static GpHyperparameters initial_guess(GpKind kind, KernelFamily family, const LabeledData& data);
};

/// Prior covariance between latent values at the rows of a and b.
Matrix gp_prior_cov(const GpHyperparameters& h, const LatentPoints& a, const LatentPoints& b);

/// Exact GP posterior conditioned on centered outcomes. Immutable after fit.
class GpPosterior final : public CateModel {
 public:
  /// Cholesky of K + sigma_n^2 I with jitter escalation from 1e-8 to 1e-3.
  /// Throws InputError for fewer than 2 points, NumericalError when
  /// factorization fails at maximum jitter.
  static GpPosterior fit(const LabeledData& data, const GpHyperparameters& hyper);

  std::string name() const override { return to_string(hyper_.kind); }
  Index dim() const override { return x_.cols(); }
  double noise_variance() const override { return hyper_.noise_variance; }
  Vector latent_mean(const LatentPoints& p) const override;
  Matrix latent_cov(const LatentPoints& a, const LatentPoints& b) const override;
  Vector latent_cov_paired(const Matrix& x, const IndexVector& ta, const IndexVector& tb) const override;

  double log_marginal_likelihood() const { return log_marginal_likelihood_; }
  const GpHyperparameters& hyperparameters() const { return hyper_; }
  const JitteredCholesky& cholesky() const { return chol_; }
  const Vector& alpha() const { return alpha_; }
  double outcome_mean() const { return y_mean_; }

 private:
  GpPosterior() = default;
  Matrix whitened(const LatentPoints& p) const;  // L^{-1} K(train, p)

  LatentPoints train_;
  Matrix x_;
  GpHyperparameters hyper_;
  JitteredCholesky chol_;
  Vector alpha_;
  double y_mean_ = 0.0;
  double log_marginal_likelihood_ = 0.0;
};

/// Log marginal likelihood of the centered outcomes; -inf when the Gram
/// matrix cannot be factorized.
double gp_log_marginal_likelihood(const LabeledData& data, const GpHyperparameters& hyper);

struct HyperSearchConfig {
  KernelFamily family = KernelFamily::rbf;
  int restarts = 3;
  int evaluations_per_restart = 50;
  bool ard = true;  // one lengthscale per covariate; false ties them
  std::uint64_t seed = 0;
  /// First restart begins here (defaults to GpHyperparameters::initial_guess).
  std::optional<GpHyperparameters> initial;
};

/// Multi-start coordinate search over log-parameters maximizing the log
/// marginal likelihood. Deterministic given the seed.
GpHyperparameters optimize_hyperparams(const LabeledData& data, GpKind kind, const HyperSearchConfig& cfg);

}  // namespace activecate
