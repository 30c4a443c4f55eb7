#pragma once

#include "activecate/belief.hpp"
#include "activecate/cate_model.hpp"
#include "activecate/propensity.hpp"

#include <string>
#include <vector>

namespace activecate {

enum class AcquisitionMethod {
  random,
  causal_epig_tau,
  causal_epig_mu,
  causal_epig_mu_additive,
  causal_epig_tau_global,
  causal_epig_mu_global,
  epig_factual,
  mu_bald,
  tau_bald,
  mu_pi_bald,
  mu_rho_bald,
  sundin,
  coreset_qhte,
  causal_eig,
};

std::string to_string(AcquisitionMethod m);
AcquisitionMethod parse_acquisition_method(const std::string& name);
const std::vector<AcquisitionMethod>& all_acquisition_methods();
/// Causal-BALD family; these default to softmax batch selection.
bool is_bald_family(AcquisitionMethod m);

/// Per-candidate utility, aligned with pool order.
using ScoreVector = Vector;

inline constexpr double kVarianceFloor = 1e-12;

// ---- Gaussian mutual information ------------------------------------------

/// 1/2 log(va vb / (va vb - cov^2)); 0 when a variance is at or below the
/// floor or cov = 0. Throws NumericalError when |cov| exceeds
/// sqrt(va vb)(1 + 1e-6).
double gaussian_mi_scalar(double var_a, double var_b, double cov_ab);

/// I(a; b) = 1/2 log(|S_aa||S_bb| / |S|) for disjoint label blocks of a
/// belief. Degenerate directions (eigenvalues at the variance floor or below
/// 1e-10 of the largest) are projected out, so zero-variance blocks give 0 and
/// duplicated quantities do not change the value. Symmetric in (a, b).
double gaussian_mi_block(const JointGaussianBelief& belief, const std::vector<std::string>& block_a,
                         const std::vector<std::string>& block_b);

/// Same quantity directly on covariance blocks.
double gaussian_mi_block(const Matrix& cov_aa, const Matrix& cov_ab, const Matrix& cov_bb);

// ---- single-candidate utilities ---------------------------------------------

struct Candidate {
  Vector x;
  int t = 0;
};

double causal_epig_tau(const CateModel& model, const Candidate& c, const Matrix& targets);
double causal_epig_mu(const CateModel& model, const Candidate& c, const Matrix& targets);
double causal_epig_mu_additive(const CateModel& model, const Candidate& c, const Matrix& targets);

enum class GlobalEstimand { tau, potential_outcomes };
double causal_epig_global(const CateModel& model, const Candidate& c, const Matrix& targets, GlobalEstimand e);

/// Mean over (x*, t*) pairs of I(y; y*), y* including observation noise.
double epig_factual(const CateModel& model, const Candidate& c, const Matrix& target_x, const IndexVector& target_t);

double mu_bald(const CateModel& model, const Candidate& c);
double tau_bald(const CateModel& model, const Candidate& c);

enum class CombinedBald { mu_pi, mu_rho };
/// mu_pi weights mu-BALD by the probability of the other arm; mu_rho by
/// sd[tau(x)] / max_pool_tau_sd.
double combined_bald(const CateModel& model, const Candidate& c, CombinedBald variant,
                     const PropensityModel& propensity, double max_pool_tau_sd);

/// H(Bern(mean gamma)) - mean H(Bern(gamma_k)) with gamma_k = Phi(-|tau_k| / sd),
/// sd the population sd of the draws; 0 when sd = 0.
double sundin_from_draws(const Vector& tau_draws);

/// Sign-ambiguity BALD from `samples` draws of the marginal tau posterior.
double sundin_gamma(const CateModel& model, const Candidate& c, int samples, Rng& rng);

/// Minimum posterior-covariance distance from each pool point to the labeled
/// points of its own arm; arms with no labels get (max finite score + 1).
ScoreVector coreset_qhte(const CateModel& model, const Matrix& pool_x, const IndexVector& pool_t,
                         const Matrix& labeled_x, const IndexVector& labeled_t);

/// I(y; tau on the reference grid).
double causal_eig(const CateModel& model, const Candidate& c, const Matrix& reference_grid);

/// i.i.d. Uniform(0, 1) scores, never exactly 0.
ScoreVector random_acq(Index pool_size, Rng& rng);

// ---- pool scoring -----------------------------------------------------------

struct AcquisitionParams {
  int sundin_samples = 100;
  Index eig_grid_size = 100;
  Index max_targets = 0;  // 0 keeps the full target set
  double propensity_ridge = 1e-3;
  int threads = 1;
};

/// Everything a utility may look at during one round. Target treatments are
/// only used by factual EPIG; outcomes of pool points never appear here.
struct AcquisitionContext {
  const CateModel* model = nullptr;
  Matrix pool_x;
  IndexVector pool_t;
  Matrix target_x;
  IndexVector target_t;
  Matrix labeled_x;
  IndexVector labeled_t;
  /// Covariates/treatments used to fit the propensity model for mu_pi-BALD.
  Matrix propensity_x;
  IndexVector propensity_t;
};

/// Scores every pool candidate. Equivalent to calling the single-candidate
/// utility per pool row, but shares the target-side work across candidates.
ScoreVector score_pool(AcquisitionMethod method, const AcquisitionContext& ctx, const AcquisitionParams& params,
                       Rng& rng);

}  // namespace activecate
