#include "activecate/acquisition.hpp"

#include "activecate/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace activecate {

namespace {

struct MethodName {
  AcquisitionMethod method;
  const char* name;
};

constexpr std::array<MethodName, 14> kMethodNames{{
    {AcquisitionMethod::random, "random"},
    {AcquisitionMethod::causal_epig_tau, "causal_epig_tau"},
    {AcquisitionMethod::causal_epig_mu, "causal_epig_mu"},
    {AcquisitionMethod::causal_epig_mu_additive, "causal_epig_mu_additive"},
    {AcquisitionMethod::causal_epig_tau_global, "causal_epig_tau_global"},
    {AcquisitionMethod::causal_epig_mu_global, "causal_epig_mu_global"},
    {AcquisitionMethod::epig_factual, "epig_factual"},
    {AcquisitionMethod::mu_bald, "mu_bald"},
    {AcquisitionMethod::tau_bald, "tau_bald"},
    {AcquisitionMethod::mu_pi_bald, "mu_pi_bald"},
    {AcquisitionMethod::mu_rho_bald, "mu_rho_bald"},
    {AcquisitionMethod::sundin, "sundin"},
    {AcquisitionMethod::coreset_qhte, "coreset_qhte"},
    {AcquisitionMethod::causal_eig, "causal_eig"},
}};

}  // namespace

std::string to_string(AcquisitionMethod m) {
  for (const auto& e : kMethodNames)
    if (e.method == m) return e.name;
  return "unknown";
}

AcquisitionMethod parse_acquisition_method(const std::string& name) {
  for (const auto& e : kMethodNames)
    if (name == e.name) return e.method;
  throw InputError("unknown acquisition method '" + name + "'");
}

const std::vector<AcquisitionMethod>& all_acquisition_methods() {
  static const std::vector<AcquisitionMethod> all = [] {
    std::vector<AcquisitionMethod> v;
    for (const auto& e : kMethodNames) v.push_back(e.method);
    return v;
  }();
  return all;
}

bool is_bald_family(AcquisitionMethod m) {
  return m == AcquisitionMethod::mu_bald || m == AcquisitionMethod::tau_bald || m == AcquisitionMethod::mu_pi_bald ||
         m == AcquisitionMethod::mu_rho_bald;
}

// ---- Gaussian mutual information ------------------------------------------

namespace {

// -1/2 log(1 - rho^2) for a squared canonical correlation.
double mi_from_rho2(double rho2) {
  if (!(rho2 > 0.0)) return 0.0;
  return -0.5 * std::log(std::max(1.0 - rho2, 1e-300));
}

// Rows span the numerical support of cov, scaled so that W cov W^T = I.
Matrix pseudo_whitener(const Matrix& cov) {
  if (cov.rows() == 0) return Matrix(0, 0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (cov + cov.transpose()));
  const Vector& lam = es.eigenvalues();
  const double threshold = std::max(kVarianceFloor, 1e-10 * lam.maxCoeff());
  std::vector<Index> keep;
  for (Index k = 0; k < lam.size(); ++k)
    if (lam(k) > threshold) keep.push_back(k);
  Matrix w(static_cast<Index>(keep.size()), cov.rows());
  for (Index r = 0; r < static_cast<Index>(keep.size()); ++r)
    w.row(r) = es.eigenvectors().col(keep[r]).transpose() / std::sqrt(lam(keep[r]));
  return w;
}

// y (scalar, variance var_a) against a whitened block: MI from z = W c.
double mi_scalar_whitened(double var_a, const Vector& z) {
  if (var_a <= kVarianceFloor || z.size() == 0) return 0.0;
  return mi_from_rho2(z.squaredNorm() / var_a);
}

// c^T S^+ c for a 2x2 block S = [[a, b], [b, d]] with the same support rule
// as pseudo_whitener.
double quad_form_2x2(double a, double b, double d, double c0, double c1) {
  const double mean = 0.5 * (a + d);
  const double disc = std::hypot(0.5 * (a - d), b);
  const double l1 = mean + disc;
  const double l2 = mean - disc;
  const double threshold = std::max(kVarianceFloor, 1e-10 * l1);
  if (l1 <= threshold) return 0.0;
  if (l2 > threshold) {
    const double det = a * d - b * b;
    return (c0 * c0 * d - 2.0 * c0 * c1 * b + c1 * c1 * a) / det;
  }
  // rank one: eigenvector of l1
  double u0, u1;
  if (std::abs(b) > 0.0) {
    u0 = b;
    u1 = l1 - a;
  } else if (a >= d) {
    u0 = 1.0;
    u1 = 0.0;
  } else {
    u0 = 0.0;
    u1 = 1.0;
  }
  const double norm = std::hypot(u0, u1);
  const double proj = (u0 * c0 + u1 * c1) / norm;
  return proj * proj / l1;
}

double mi_scalar_pair(double var_y, double v00, double v01, double v11, double c0, double c1) {
  if (var_y <= kVarianceFloor) return 0.0;
  return mi_from_rho2(quad_form_2x2(v00, v01, v11, c0, c1) / var_y);
}

}  // namespace

double gaussian_mi_scalar(double var_a, double var_b, double cov_ab) {
  if (var_a <= kVarianceFloor || var_b <= kVarianceFloor || cov_ab == 0.0) return 0.0;
  const double prod = var_a * var_b;
  if (std::abs(cov_ab) > std::sqrt(prod) * (1.0 + 1e-6))
    throw NumericalError("gaussian MI: covariance exceeds the Cauchy-Schwarz bound");
  const double det = std::max(prod - cov_ab * cov_ab, 1e-300);
  return std::max(0.0, 0.5 * std::log(prod / det));
}

double gaussian_mi_block(const Matrix& cov_aa, const Matrix& cov_ab, const Matrix& cov_bb) {
  if (cov_ab.rows() != cov_aa.rows() || cov_ab.cols() != cov_bb.rows())
    throw InputError("gaussian MI: block shapes disagree");
  const Matrix wa = pseudo_whitener(cov_aa);
  const Matrix wb = pseudo_whitener(cov_bb);
  if (wa.rows() == 0 || wb.rows() == 0) return 0.0;
  const Matrix r = wa * cov_ab * wb.transpose();
  if (r.rows() == 1 || r.cols() == 1) return mi_from_rho2(r.squaredNorm());
  Eigen::JacobiSVD<Matrix> svd(r);
  double mi = 0.0;
  for (Index k = 0; k < svd.singularValues().size(); ++k) {
    const double s = svd.singularValues()(k);
    mi += mi_from_rho2(s * s);
  }
  return mi;
}

double gaussian_mi_block(const JointGaussianBelief& belief, const std::vector<std::string>& block_a,
                         const std::vector<std::string>& block_b) {
  if (block_a.empty() || block_b.empty()) throw InputError("gaussian MI: blocks must be non-empty");
  for (const auto& a : block_a)
    if (std::find(block_b.begin(), block_b.end(), a) != block_b.end())
      throw InputError("gaussian MI: blocks overlap on '" + a + "'");
  // Canonical order so that I(a; b) and I(b; a) run the same arithmetic.
  const bool swap = block_a.size() > block_b.size() || (block_a.size() == block_b.size() && block_b < block_a);
  const auto& first = swap ? block_b : block_a;
  const auto& second = swap ? block_a : block_b;
  std::vector<Index> ia, ib;
  for (const auto& n : first) ia.push_back(belief.index_of(n));
  for (const auto& n : second) ib.push_back(belief.index_of(n));
  return gaussian_mi_block(belief.cov(ia, ia), belief.cov(ia, ib), belief.cov(ib, ib));
}

// ---- pool-level kernels -----------------------------------------------------

namespace {

LatentPoints stacked_arms(const Matrix& x) {
  LatentPoints p;
  p.x.resize(2 * x.rows(), x.cols());
  p.x << x, x;
  p.t.resize(2 * x.rows());
  p.t.head(x.rows()).setZero();
  p.t.tail(x.rows()).setOnes();
  return p;
}

Vector observation_variance(const CateModel& model, const LatentPoints& pool) {
  return model.latent_var(pool).array() + model.noise_variance();
}

struct TargetMoments {
  Vector v00, v01, v11;
  Vector var_tau() const { return (v00 + v11 - 2.0 * v01).cwiseMax(0.0); }
};

TargetMoments target_moments(const CateModel& model, const Matrix& targets) {
  const IndexVector zeros = IndexVector::Zero(targets.rows());
  const IndexVector ones = IndexVector::Ones(targets.rows());
  TargetMoments tm;
  tm.v00 = model.latent_cov_paired(targets, zeros, zeros).cwiseMax(0.0);
  tm.v11 = model.latent_cov_paired(targets, ones, ones).cwiseMax(0.0);
  tm.v01 = model.latent_cov_paired(targets, zeros, ones);
  return tm;
}

enum class MarginalKind { tau, mu_joint, mu_additive };

ScoreVector score_marginal(const CateModel& model, const LatentPoints& pool, const Matrix& targets,
                           MarginalKind kind, int threads) {
  const Index p = pool.size();
  const Index m = targets.rows();
  if (m == 0) throw InputError("acquisition: empty target set");
  const Vector var_y = observation_variance(model, pool);
  const Matrix cross = model.latent_cov(pool, stacked_arms(targets));  // p x 2m: [f0 | f1]
  const TargetMoments tm = target_moments(model, targets);
  const Vector var_tau = tm.var_tau();
  ScoreVector out(p);
  parallel_for(p, threads, [&](Index i) {
    double s = 0.0;
    for (Index j = 0; j < m; ++j) {
      const double c0 = cross(i, j);
      const double c1 = cross(i, m + j);
      switch (kind) {
        case MarginalKind::tau:
          s += gaussian_mi_scalar(var_y(i), var_tau(j), c1 - c0);
          break;
        case MarginalKind::mu_joint:
          s += mi_scalar_pair(var_y(i), tm.v00(j), tm.v01(j), tm.v11(j), c0, c1);
          break;
        case MarginalKind::mu_additive:
          s += gaussian_mi_scalar(var_y(i), tm.v00(j), c0) + gaussian_mi_scalar(var_y(i), tm.v11(j), c1);
          break;
      }
    }
    out(i) = s / static_cast<double>(m);
  });
  return out;
}

ScoreVector score_global(const CateModel& model, const LatentPoints& pool, const Matrix& targets, GlobalEstimand e) {
  const Index m = targets.rows();
  if (m == 0) throw InputError("acquisition: empty target set");
  const LatentPoints tgt = stacked_arms(targets);
  const Vector var_y = observation_variance(model, pool);
  const Matrix cross = model.latent_cov(pool, tgt);  // p x 2m
  const Matrix joint = model.latent_cov(tgt, tgt);   // 2m x 2m
  Matrix c_block;
  Matrix s_block;
  if (e == GlobalEstimand::tau) {
    c_block = cross.rightCols(m) - cross.leftCols(m);
    s_block = joint.bottomRightCorner(m, m) + joint.topLeftCorner(m, m) - joint.topRightCorner(m, m) -
              joint.bottomLeftCorner(m, m);
  } else {
    c_block = cross;
    s_block = joint;
  }
  const Matrix w = pseudo_whitener(s_block);
  const Matrix z = w * c_block.transpose();  // k x p
  ScoreVector out(pool.size());
  for (Index i = 0; i < pool.size(); ++i) out(i) = mi_scalar_whitened(var_y(i), z.col(i));
  return out;
}

ScoreVector score_epig_factual(const CateModel& model, const LatentPoints& pool, const LatentPoints& targets,
                               int threads) {
  if (targets.size() == 0) throw InputError("factual EPIG: empty target sample");
  const Vector var_y = observation_variance(model, pool);
  const Vector var_star = observation_variance(model, targets);
  const Matrix cross = model.latent_cov(pool, targets);
  ScoreVector out(pool.size());
  parallel_for(pool.size(), threads, [&](Index i) {
    double s = 0.0;
    for (Index j = 0; j < targets.size(); ++j) s += gaussian_mi_scalar(var_y(i), var_star(j), cross(i, j));
    out(i) = s / static_cast<double>(targets.size());
  });
  return out;
}

ScoreVector score_mu_bald(const CateModel& model, const LatentPoints& pool) {
  const double noise = model.noise_variance();
  return model.latent_var(pool).unaryExpr([noise](double v) { return 0.5 * std::log1p(v / noise); });
}

ScoreVector score_tau_bald(const CateModel& model, const Matrix& pool_x) {
  const double noise = model.noise_variance();
  return model.cate_var(pool_x).unaryExpr([noise](double v) { return 0.5 * std::log1p(v / (2.0 * noise)); });
}

double bernoulli_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  return h;
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

double sundin_from_draws(const Vector& tau) {
  const Index k = tau.size();
  if (k < 2) throw InputError("sundin: need at least 2 samples");
  const double mean = tau.mean();
  const double sd = std::sqrt((tau.array() - mean).square().sum() / static_cast<double>(k));
  if (!(sd > 0.0)) return 0.0;
  double gbar = 0.0;
  double h_each = 0.0;
  for (Index i = 0; i < k; ++i) {
    const double g = std_normal_cdf(-std::abs(tau(i)) / sd);
    gbar += g;
    h_each += bernoulli_entropy(g);
  }
  gbar /= static_cast<double>(k);
  return std::max(0.0, bernoulli_entropy(gbar) - h_each / static_cast<double>(k));
}

namespace {

Vector sundin_draws(double mean, double var, int samples, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const double sd = std::sqrt(std::max(var, 0.0));
  Vector d(samples);
  for (int k = 0; k < samples; ++k) d(k) = mean + sd * n01(rng);
  return d;
}

ScoreVector score_sundin(const CateModel& model, const Matrix& pool_x, int samples, Rng& rng, int threads) {
  if (samples < 2) throw InputError("sundin: need at least 2 samples");
  const Vector mean = model.cate_mean(pool_x);
  const Vector var = model.cate_var(pool_x);
  const std::uint64_t base = rng();
  ScoreVector out(pool_x.rows());
  parallel_for(pool_x.rows(), threads, [&](Index i) {
    Rng local(stream_seed_n(base, static_cast<std::uint64_t>(i)));
    out(i) = var(i) <= 0.0 ? 0.0 : sundin_from_draws(sundin_draws(mean(i), var(i), samples, local));
  });
  return out;
}

Matrix subsample_rows(const Matrix& x, Index cap, Rng& rng) {
  if (cap <= 0 || x.rows() <= cap) return x;
  std::vector<Index> idx(x.rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return x(idx, Eigen::all);
}

}  // namespace

// ---- single-candidate utilities ---------------------------------------------

namespace {

LatentPoints as_pool(const Candidate& c) {
  check_treatment(c.t);
  return LatentPoints::single(c.x, c.t);
}

}  // namespace

double causal_epig_tau(const CateModel& model, const Candidate& c, const Matrix& targets) {
  return score_marginal(model, as_pool(c), targets, MarginalKind::tau, 1)(0);
}

double causal_epig_mu(const CateModel& model, const Candidate& c, const Matrix& targets) {
  return score_marginal(model, as_pool(c), targets, MarginalKind::mu_joint, 1)(0);
}

double causal_epig_mu_additive(const CateModel& model, const Candidate& c, const Matrix& targets) {
  return score_marginal(model, as_pool(c), targets, MarginalKind::mu_additive, 1)(0);
}

double causal_epig_global(const CateModel& model, const Candidate& c, const Matrix& targets, GlobalEstimand e) {
  return score_global(model, as_pool(c), targets, e)(0);
}

double epig_factual(const CateModel& model, const Candidate& c, const Matrix& target_x, const IndexVector& target_t) {
  if (target_x.rows() != target_t.size()) throw InputError("factual EPIG: targets and arms differ in length");
  return score_epig_factual(model, as_pool(c), LatentPoints{target_x, target_t}, 1)(0);
}

double mu_bald(const CateModel& model, const Candidate& c) { return score_mu_bald(model, as_pool(c))(0); }

double tau_bald(const CateModel& model, const Candidate& c) {
  return score_tau_bald(model, as_pool(c).x)(0);
}

double combined_bald(const CateModel& model, const Candidate& c, CombinedBald variant,
                     const PropensityModel& propensity, double max_pool_tau_sd) {
  const double base = mu_bald(model, c);
  if (variant == CombinedBald::mu_pi) {
    if (!propensity.fitted()) throw InputError("mu_pi-BALD needs a fitted propensity model");
    const double pi = propensity.predict(c.x);
    return base * (c.t == 1 ? 1.0 - pi : pi);
  }
  if (!(max_pool_tau_sd > 0.0)) return base;
  const double sd = std::sqrt(model.cate_var(as_pool(c).x)(0));
  return base * std::min(1.0, sd / max_pool_tau_sd);
}

double sundin_gamma(const CateModel& model, const Candidate& c, int samples, Rng& rng) {
  if (samples < 2) throw InputError("sundin: need at least 2 samples");
  const Matrix x = as_pool(c).x;
  const double var = model.cate_var(x)(0);
  if (var <= 0.0) return 0.0;
  return sundin_from_draws(sundin_draws(model.cate_mean(x)(0), var, samples, rng));
}

ScoreVector coreset_qhte(const CateModel& model, const Matrix& pool_x, const IndexVector& pool_t,
                         const Matrix& labeled_x, const IndexVector& labeled_t) {
  const Index p = pool_x.rows();
  ScoreVector out = ScoreVector::Constant(p, std::numeric_limits<double>::infinity());
  for (int arm = 0; arm <= 1; ++arm) {
    std::vector<Index> cand, lab;
    for (Index i = 0; i < p; ++i)
      if (pool_t(i) == arm) cand.push_back(i);
    for (Index i = 0; i < labeled_t.size(); ++i)
      if (labeled_t(i) == arm) lab.push_back(i);
    if (cand.empty() || lab.empty()) continue;
    const LatentPoints cp = LatentPoints::arm(pool_x(cand, Eigen::all), arm);
    const LatentPoints lp = LatentPoints::arm(labeled_x(lab, Eigen::all), arm);
    const Vector vc = model.latent_var(cp);
    const Vector vl = model.latent_var(lp);
    const Matrix cross = model.latent_cov(cp, lp);
    for (Index a = 0; a < static_cast<Index>(cand.size()); ++a) {
      double best = std::numeric_limits<double>::infinity();
      for (Index b = 0; b < static_cast<Index>(lab.size()); ++b)
        best = std::min(best, std::max(0.0, vc(a) + vl(b) - 2.0 * cross(a, b)));
      out(cand[a]) = std::sqrt(best);
    }
  }
  double finite_max = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < p; ++i)
    if (std::isfinite(out(i))) finite_max = std::max(finite_max, out(i));
  const double sentinel = std::isfinite(finite_max) ? finite_max + 1.0 : 1.0;
  for (Index i = 0; i < p; ++i)
    if (!std::isfinite(out(i))) out(i) = sentinel;
  return out;
}

double causal_eig(const CateModel& model, const Candidate& c, const Matrix& reference_grid) {
  return score_global(model, as_pool(c), reference_grid, GlobalEstimand::tau)(0);
}

ScoreVector random_acq(Index pool_size, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScoreVector out(pool_size);
  for (Index i = 0; i < pool_size; ++i) {
    double v = 0.0;
    while (v <= 0.0) v = u(rng);
    out(i) = v;
  }
  return out;
}

// ---- pool scoring -----------------------------------------------------------

ScoreVector score_pool(AcquisitionMethod method, const AcquisitionContext& ctx, const AcquisitionParams& params,
                       Rng& rng) {
  const Index p = ctx.pool_x.rows();
  if (ctx.pool_t.size() != p) throw InputError("acquisition: pool covariates and treatments differ in length");
  if (method == AcquisitionMethod::random) return random_acq(p, rng);
  if (ctx.model == nullptr) throw InputError("acquisition: no fitted model");
  const CateModel& model = *ctx.model;
  const LatentPoints pool{ctx.pool_x, ctx.pool_t};

  switch (method) {
    case AcquisitionMethod::causal_epig_tau:
      return score_marginal(model, pool, subsample_rows(ctx.target_x, params.max_targets, rng), MarginalKind::tau,
                            params.threads);
    case AcquisitionMethod::causal_epig_mu:
      return score_marginal(model, pool, subsample_rows(ctx.target_x, params.max_targets, rng),
                            MarginalKind::mu_joint, params.threads);
    case AcquisitionMethod::causal_epig_mu_additive:
      return score_marginal(model, pool, subsample_rows(ctx.target_x, params.max_targets, rng),
                            MarginalKind::mu_additive, params.threads);
    case AcquisitionMethod::causal_epig_tau_global:
      return score_global(model, pool, subsample_rows(ctx.target_x, params.max_targets, rng), GlobalEstimand::tau);
    case AcquisitionMethod::causal_epig_mu_global:
      return score_global(model, pool, subsample_rows(ctx.target_x, params.max_targets, rng),
                          GlobalEstimand::potential_outcomes);
    case AcquisitionMethod::epig_factual: {
      if (ctx.target_t.size() != ctx.target_x.rows())
        throw InputError("factual EPIG: target treatments are required");
      LatentPoints targets{ctx.target_x, ctx.target_t};
      if (params.max_targets > 0 && targets.size() > params.max_targets) {
        std::vector<Index> idx(targets.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(params.max_targets);
        std::sort(idx.begin(), idx.end());
        targets = LatentPoints{ctx.target_x(idx, Eigen::all), ctx.target_t(idx)};
      }
      return score_epig_factual(model, pool, targets, params.threads);
    }
    case AcquisitionMethod::mu_bald:
      return score_mu_bald(model, pool);
    case AcquisitionMethod::tau_bald:
      return score_tau_bald(model, ctx.pool_x);
    case AcquisitionMethod::mu_pi_bald: {
      const PropensityModel prop = fit_propensity(ctx.propensity_x, ctx.propensity_t, params.propensity_ridge);
      ScoreVector s = score_mu_bald(model, pool);
      const Vector pi = prop.predict(ctx.pool_x);
      for (Index i = 0; i < p; ++i) s(i) *= ctx.pool_t(i) == 1 ? 1.0 - pi(i) : pi(i);
      return s;
    }
    case AcquisitionMethod::mu_rho_bald: {
      ScoreVector s = score_mu_bald(model, pool);
      const Vector sd = model.cate_var(ctx.pool_x).cwiseSqrt();
      const double max_sd = p > 0 ? sd.maxCoeff() : 0.0;
      if (max_sd > 0.0) s.array() *= (sd.array() / max_sd).min(1.0);
      return s;
    }
    case AcquisitionMethod::sundin:
      return score_sundin(model, ctx.pool_x, params.sundin_samples, rng, params.threads);
    case AcquisitionMethod::coreset_qhte:
      return coreset_qhte(model, ctx.pool_x, ctx.pool_t, ctx.labeled_x, ctx.labeled_t);
    case AcquisitionMethod::causal_eig: {
      if (params.eig_grid_size < 1) throw InputError("causal EIG: grid size must be positive");
      const Index m = std::min(params.eig_grid_size, p);
      return score_global(model, pool, ctx.pool_x.topRows(m), GlobalEstimand::tau);
    }
    case AcquisitionMethod::random:
      break;
  }
  return random_acq(p, rng);
}

}  // namespace activecate
