#include "activecate/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace activecate {

std::string to_string(GpKind kind) { return kind == GpKind::cmgp ? "cmgp" : "nsgp"; }

void GpHyperparameters::validate() const {
  base.validate();
  if (kind == GpKind::nsgp) {
    arm.validate();
    if (arm.lengthscales.size() != base.lengthscales.size())
      throw InputError("nsgp: arm kernels disagree in dimension");
  } else {
    coregionalization.validate();
  }
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance))
    throw InputError("gp: noise variance must be positive and finite");
}

namespace {

double outcome_variance(const Vector& y) {
  if (y.size() < 2) return 1.0;
  const double v = (y.array() - y.mean()).square().sum() / static_cast<double>(y.size() - 1);
  return v > 1e-12 ? v : 1.0;
}

Vector column_scales(const Matrix& x) {
  Vector s(x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    const auto col = x.col(c).array();
    const double m = col.mean();
    const double sd = x.rows() > 1 ? std::sqrt((col - m).square().sum() / static_cast<double>(x.rows() - 1)) : 1.0;
    s(c) = sd > 1e-3 ? sd : 1.0;
  }
  return s;
}

}  // namespace

GpHyperparameters GpHyperparameters::initial_guess(GpKind kind, KernelFamily family, const LabeledData& data) {
  const double var_y = outcome_variance(data.y);
  const double sd_y = std::sqrt(var_y);
  GpHyperparameters h;
  h.kind = kind;
  h.base.family = family;
  h.base.lengthscales = column_scales(data.x);
  h.noise_variance = 0.1 * var_y;
  if (kind == GpKind::cmgp) {
    h.base.signal_variance = 1.0;
    h.coregionalization = CoregionalizationConfig::from_cholesky(sd_y, 0.7 * sd_y, 0.7 * sd_y);
  } else {
    h.base.signal_variance = var_y;
    h.arm = h.base;
    h.arm.signal_variance = 0.5 * var_y;
  }
  return h;
}

Matrix gp_prior_cov(const GpHyperparameters& h, const LatentPoints& a, const LatentPoints& b) {
  Matrix k = kernel_matrix(a.x, b.x, h.base);
  if (h.kind == GpKind::cmgp) {
    const auto& task = h.coregionalization.task_covariance;
    for (Index j = 0; j < k.cols(); ++j)
      for (Index i = 0; i < k.rows(); ++i) k(i, j) *= task(a.t(i), b.t(j));
    return k;
  }
  const bool any_a = (a.t.array() == 1).any();
  const bool any_b = (b.t.array() == 1).any();
  if (any_a && any_b) {
    const Matrix k1 = kernel_matrix(a.x, b.x, h.arm);
    for (Index j = 0; j < k.cols(); ++j) {
      if (b.t(j) != 1) continue;
      for (Index i = 0; i < k.rows(); ++i)
        if (a.t(i) == 1) k(i, j) += k1(i, j);
    }
  }
  return k;
}

namespace {

double prior_paired(const GpHyperparameters& h, int ta, int tb) {
  if (h.kind == GpKind::cmgp) return h.coregionalization.task_covariance(ta, tb) * h.base.signal_variance;
  return h.base.signal_variance + (ta == 1 && tb == 1 ? h.arm.signal_variance : 0.0);
}

void check_points(const LatentPoints& p, Index dim) {
  if (p.t.size() != p.x.rows()) throw InputError("latent points: covariates and arms differ in length");
  if (p.x.cols() != dim)
    throw InputError("latent points: expected " + std::to_string(dim) + " covariates, got " +
                     std::to_string(p.x.cols()));
  for (Index i = 0; i < p.t.size(); ++i) check_treatment(p.t(i));
}

}  // namespace

GpPosterior GpPosterior::fit(const LabeledData& data, const GpHyperparameters& hyper) {
  data.validate();
  if (data.size() < 2) throw InputError("gp fit needs at least 2 labeled points");
  hyper.validate();
  if (hyper.base.lengthscales.size() != data.dim())
    throw InputError("gp fit: kernel dimension does not match covariates");

  GpPosterior post;
  post.train_ = LatentPoints{data.x, data.t};
  post.x_ = data.x;
  post.hyper_ = hyper;
  post.y_mean_ = data.y.mean();
  const Vector centered = data.y.array() - post.y_mean_;

  Matrix k = gp_prior_cov(hyper, post.train_, post.train_);
  k.diagonal().array() += hyper.noise_variance;
  post.chol_ = cholesky_with_jitter(k);
  post.alpha_ = post.chol_.solve(centered);

  const double n = static_cast<double>(data.size());
  post.log_marginal_likelihood_ = -0.5 * centered.dot(post.alpha_) - 0.5 * post.chol_.log_det() -
                                  0.5 * n * std::log(2.0 * std::numbers::pi);
  return post;
}

Matrix GpPosterior::whitened(const LatentPoints& p) const {
  return chol_.solve_lower(gp_prior_cov(hyper_, train_, p));
}

Vector GpPosterior::latent_mean(const LatentPoints& p) const {
  check_points(p, dim());
  return (gp_prior_cov(hyper_, p, train_) * alpha_).array() + y_mean_;
}

Matrix GpPosterior::latent_cov(const LatentPoints& a, const LatentPoints& b) const {
  check_points(a, dim());
  check_points(b, dim());
  const Matrix va = whitened(a);
  if (&a == &b) return gp_prior_cov(hyper_, a, a) - va.transpose() * va;
  return gp_prior_cov(hyper_, a, b) - va.transpose() * whitened(b);
}

Vector GpPosterior::latent_cov_paired(const Matrix& x, const IndexVector& ta, const IndexVector& tb) const {
  check_points(LatentPoints{x, ta}, dim());
  check_points(LatentPoints{x, tb}, dim());
  const Matrix va = whitened(LatentPoints{x, ta});
  const Matrix vb = (ta == tb) ? va : whitened(LatentPoints{x, tb});
  Vector out(x.rows());
  for (Index i = 0; i < x.rows(); ++i)
    out(i) = prior_paired(hyper_, ta(i), tb(i)) - va.col(i).dot(vb.col(i));
  return out;
}

double gp_log_marginal_likelihood(const LabeledData& data, const GpHyperparameters& hyper) {
  try {
    return GpPosterior::fit(data, hyper).log_marginal_likelihood();
  } catch (const NumericalError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

namespace {

// Unconstrained search coordinates <-> hyperparameters.
struct SearchSpace {
  GpKind kind;
  KernelFamily family;
  Index dim;
  bool ard;
  Vector col_scale;
  double var_y;
  Vector lower, upper;

  Index n_ls() const { return ard ? dim : 1; }

  Index size() const { return kind == GpKind::cmgp ? n_ls() + 4 : 2 * n_ls() + 3; }

  Vector lengthscales(const Vector& theta, Index offset) const {
    Vector ls(dim);
    for (Index d = 0; d < dim; ++d) ls(d) = std::exp(theta(offset + (ard ? d : 0))) * (ard ? 1.0 : col_scale(d));
    return ls;
  }

  GpHyperparameters decode(const Vector& theta) const {
    GpHyperparameters h;
    h.kind = kind;
    h.base.family = family;
    const double sd_y = std::sqrt(var_y);
    if (kind == GpKind::cmgp) {
      h.base.lengthscales = lengthscales(theta, 0);
      h.base.signal_variance = 1.0;
      const Index o = n_ls();
      h.coregionalization =
          CoregionalizationConfig::from_cholesky(std::exp(theta(o)), theta(o + 1) * sd_y, std::exp(theta(o + 2)));
      h.noise_variance = std::exp(theta(o + 3));
    } else {
      h.base.lengthscales = lengthscales(theta, 0);
      h.base.signal_variance = std::exp(theta(n_ls()));
      h.arm.family = family;
      h.arm.lengthscales = lengthscales(theta, n_ls() + 1);
      h.arm.signal_variance = std::exp(theta(2 * n_ls() + 1));
      h.noise_variance = std::exp(theta(2 * n_ls() + 2));
    }
    return h;
  }

  double log_ls(const Vector& ls, Index d) const {
    return ard ? std::log(ls(d)) : std::log(ls.cwiseQuotient(col_scale).mean());
  }

  Vector encode(const GpHyperparameters& h) const {
    Vector theta(size());
    const double sd_y = std::sqrt(var_y);
    for (Index d = 0; d < n_ls(); ++d) theta(d) = log_ls(h.base.lengthscales, d);
    if (kind == GpKind::cmgp) {
      const Index o = n_ls();
      Eigen::LLT<Eigen::Matrix2d> llt(h.coregionalization.task_covariance +
                                      1e-12 * Eigen::Matrix2d::Identity());
      const Eigen::Matrix2d l = llt.matrixL();
      theta(o) = std::log(std::max(l(0, 0), 1e-300));
      theta(o + 1) = l(1, 0) / sd_y;
      theta(o + 2) = std::log(std::max(l(1, 1), 1e-300));
      theta(o + 3) = std::log(h.noise_variance);
    } else {
      theta(n_ls()) = std::log(h.base.signal_variance);
      for (Index d = 0; d < n_ls(); ++d) theta(n_ls() + 1 + d) = log_ls(h.arm.lengthscales, d);
      theta(2 * n_ls() + 1) = std::log(h.arm.signal_variance);
      theta(2 * n_ls() + 2) = std::log(h.noise_variance);
    }
    return clamp(theta);
  }

  Vector clamp(const Vector& theta) const { return theta.cwiseMax(lower).cwiseMin(upper); }

  static SearchSpace make(GpKind kind, const HyperSearchConfig& cfg, const LabeledData& data) {
    SearchSpace s{kind, cfg.family, data.dim(), cfg.ard, column_scales(data.x), outcome_variance(data.y), {}, {}};
    const Index n = s.size();
    s.lower.resize(n);
    s.upper.resize(n);
    const double lv = std::log(s.var_y);
    auto set_ls = [&](Index offset) {
      for (Index d = 0; d < s.n_ls(); ++d) {
        const double c = s.ard ? std::log(s.col_scale(d)) : 0.0;
        s.lower(offset + d) = c + std::log(1e-2);
        s.upper(offset + d) = c + std::log(1e2);
      }
    };
    set_ls(0);
    if (kind == GpKind::cmgp) {
      const Index o = s.n_ls();
      s.lower(o) = 0.5 * (lv + std::log(1e-6));
      s.upper(o) = 0.5 * (lv + std::log(1e2));
      s.lower(o + 1) = -10.0;
      s.upper(o + 1) = 10.0;
      s.lower(o + 2) = s.lower(o);
      s.upper(o + 2) = s.upper(o);
      s.lower(o + 3) = lv + std::log(1e-6);
      s.upper(o + 3) = lv + std::log(10.0);
    } else {
      const Index o = s.n_ls();
      s.lower(o) = lv + std::log(1e-6);
      s.upper(o) = lv + std::log(1e2);
      set_ls(o + 1);
      s.lower(2 * o + 1) = s.lower(o);
      s.upper(2 * o + 1) = s.upper(o);
      s.lower(2 * o + 2) = lv + std::log(1e-6);
      s.upper(2 * o + 2) = lv + std::log(10.0);
    }
    return s;
  }
};

}  // namespace

GpHyperparameters optimize_hyperparams(const LabeledData& data, GpKind kind, const HyperSearchConfig& cfg) {
  data.validate();
  if (data.size() < 5) throw InputError("hyperparameter search needs at least 5 labeled points");
  if (cfg.restarts < 1 || cfg.evaluations_per_restart < 1)
    throw InputError("hyperparameter search: restarts and evaluations must be positive");

  const SearchSpace space = SearchSpace::make(kind, cfg, data);
  const GpHyperparameters init = cfg.initial ? *cfg.initial : GpHyperparameters::initial_guess(kind, cfg.family, data);
  if (init.kind != kind) throw InputError("hyperparameter search: initial config is for the other GP kind");
  const Vector theta_init = space.encode(init);

  auto evaluate = [&](const Vector& theta) { return gp_log_marginal_likelihood(data, space.decode(theta)); };

  Rng rng(cfg.seed);
  std::normal_distribution<double> perturb(0.0, 0.5);

  // The caller's initial config competes as is, so the result never scores below it.
  GpHyperparameters best = init;
  double best_value = gp_log_marginal_likelihood(data, init);

  for (int r = 0; r < cfg.restarts; ++r) {
    Vector theta = theta_init;
    if (r > 0) {
      for (Index i = 0; i < theta.size(); ++i) theta(i) += perturb(rng);
      theta = space.clamp(theta);
    }
    double value = evaluate(theta);
    int evals = 1;
    double step = 1.0;
    while (evals < cfg.evaluations_per_restart && step > 1e-3) {
      bool improved = false;
      for (Index c = 0; c < theta.size() && evals < cfg.evaluations_per_restart; ++c) {
        for (double dir : {1.0, -1.0}) {
          if (evals >= cfg.evaluations_per_restart) break;
          Vector trial = theta;
          trial(c) += dir * step;
          trial = space.clamp(trial);
          if (trial(c) == theta(c)) continue;
          const double v = evaluate(trial);
          ++evals;
          if (v > value) {
            theta = trial;
            value = v;
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    if (value > best_value) {
      best_value = value;
      best = space.decode(theta);
    }
  }
  if (!std::isfinite(best_value)) throw NumericalError("hyperparameter search: every candidate failed to factorize");
  return best;
}

}  // namespace activecate
