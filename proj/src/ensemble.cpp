#include "activecate/ensemble.hpp"

#include "activecate/kernels.hpp"
#include "activecate/linalg.hpp"

namespace activecate {

JointGaussianBelief empirical_gaussian_fit(const SamplePosterior& samples) {
  if (samples.n_draws() < 2) throw InputError("empirical Gaussian fit needs at least 2 draws");
  if (static_cast<Index>(samples.labels.size()) != samples.draws.cols())
    throw InputError("empirical Gaussian fit: label count does not match draw columns");
  if (!samples.draws.allFinite()) throw InputError("empirical Gaussian fit: non-finite draws");
  JointGaussianBelief b;
  b.labels = samples.labels;
  b.mean = samples.draws.colwise().mean().transpose();
  b.cov = sample_covariance(samples.draws);
  return b;
}

EnsembleLinearModel::EnsembleLinearModel(Matrix mu_weights, Matrix tau_weights, double noise_variance, double ridge,
                                         std::uint64_t seed)
    : mu_weights_(std::move(mu_weights)),
      tau_weights_(std::move(tau_weights)),
      noise_variance_(noise_variance),
      ridge_(ridge),
      seed_(seed) {
  if (mu_weights_.rows() < 2) throw InputError("ensemble needs at least 2 members");
  if (mu_weights_.rows() != tau_weights_.rows() || mu_weights_.cols() != tau_weights_.cols())
    throw InputError("ensemble: head weight shapes differ");
}

Matrix EnsembleLinearModel::draws(const LatentPoints& p) const {
  if (p.x.cols() != dim()) throw InputError("ensemble: covariate dimension mismatch");
  Matrix design(p.size(), dim() + 1);
  design.col(0).setOnes();
  design.rightCols(dim()) = p.x;
  Matrix out = mu_weights_ * design.transpose();
  const Matrix tau = tau_weights_ * design.transpose();
  for (Index j = 0; j < p.size(); ++j) {
    check_treatment(p.t(j));
    if (p.t(j) == 1) out.col(j) += tau.col(j);
  }
  return out;
}

Vector EnsembleLinearModel::latent_mean(const LatentPoints& p) const {
  return draws(p).colwise().mean().transpose();
}

Matrix EnsembleLinearModel::latent_cov(const LatentPoints& a, const LatentPoints& b) const {
  const Matrix da = draws(a);
  const Matrix ca = da.rowwise() - da.colwise().mean();
  const double denom = static_cast<double>(members() - 1);
  if (&a == &b) return ca.transpose() * ca / denom;
  const Matrix db = draws(b);
  const Matrix cb = db.rowwise() - db.colwise().mean();
  return ca.transpose() * cb / denom;
}

Vector EnsembleLinearModel::latent_cov_paired(const Matrix& x, const IndexVector& ta, const IndexVector& tb) const {
  const Matrix da = draws(LatentPoints{x, ta});
  const Matrix db = draws(LatentPoints{x, tb});
  const Matrix ca = da.rowwise() - da.colwise().mean();
  const Matrix cb = db.rowwise() - db.colwise().mean();
  return (ca.array() * cb.array()).colwise().sum().transpose() / static_cast<double>(members() - 1);
}

EnsembleLinearModel fit_ensemble(const LabeledData& data, int n_members, double ridge, std::uint64_t seed) {
  data.validate();
  if (n_members < 2) throw InputError("ensemble needs at least 2 members");
  if (data.size() < 2) throw InputError("ensemble fit needs at least 2 labeled points");
  if (!(ridge >= 0.0)) throw InputError("ensemble ridge must be non-negative");

  const Index n = data.size();
  const Index d = data.dim();
  const Index p = 2 * (d + 1);
  Matrix design(n, p);
  for (Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design.row(i).segment(1, d) = data.x.row(i);
    design(i, d + 1) = data.t(i);
    design.row(i).segment(d + 2, d) = data.t(i) * data.x.row(i);
  }
  Vector penalty = Vector::Constant(p, ridge);
  penalty(0) = 0.0;

  Matrix mu_w(n_members, d + 1);
  Matrix tau_w(n_members, d + 1);
  Rng rng(seed);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  for (int m = 0; m < n_members; ++m) {
    Matrix xtx = Matrix::Zero(p, p);
    Vector xty = Vector::Zero(p);
    for (Index k = 0; k < n; ++k) {
      const Index i = pick(rng);
      xtx.noalias() += design.row(i).transpose() * design.row(i);
      xty.noalias() += design.row(i).transpose() * data.y(i);
    }
    xtx.diagonal() += penalty;
    Eigen::LDLT<Matrix> ldlt(xtx);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw NumericalError("ensemble: regularized normal equations are singular");
    const Vector w = ldlt.solve(xty);
    if (!w.allFinite()) throw NumericalError("ensemble: regularized normal equations are singular");
    mu_w.row(m) = w.head(d + 1).transpose();
    tau_w.row(m) = w.tail(d + 1).transpose();
  }

  const Eigen::RowVectorXd mean_mu = mu_w.colwise().mean();
  const Eigen::RowVectorXd mean_tau = tau_w.colwise().mean();
  double sse = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double pred = mean_mu.dot(design.row(i).head(d + 1)) + data.t(i) * mean_tau.dot(design.row(i).head(d + 1));
    sse += (data.y(i) - pred) * (data.y(i) - pred);
  }
  return EnsembleLinearModel(std::move(mu_w), std::move(tau_w), sse / static_cast<double>(n), ridge, seed);
}

SamplePosterior posterior_draws(const EnsembleLinearModel& model, const Vector& candidate_x, int candidate_t,
                                const Matrix& targets) {
  check_treatment(candidate_t);
  const Index m = targets.rows();
  SamplePosterior s;
  s.labels.reserve(1 + 3 * m);
  s.labels.emplace_back(label::kY);
  s.draws.resize(model.members(), 1 + 3 * m);
  s.draws.col(0) = model.draws(LatentPoints::single(candidate_x, candidate_t)).col(0);
  const Matrix f0 = model.draws(LatentPoints::arm(targets, 0));
  const Matrix f1 = model.draws(LatentPoints::arm(targets, 1));
  for (Index j = 0; j < m; ++j) {
    s.labels.push_back(label::f0(j));
    s.labels.push_back(label::f1(j));
    s.labels.push_back(label::tau(j));
    s.draws.col(1 + 3 * j) = f0.col(j);
    s.draws.col(2 + 3 * j) = f1.col(j);
    s.draws.col(3 + 3 * j) = f1.col(j) - f0.col(j);
  }
  return s;
}

JointGaussianBelief sample_belief(const EnsembleLinearModel& model, const Vector& candidate_x, int candidate_t,
                                  const Matrix& targets) {
  JointGaussianBelief b = empirical_gaussian_fit(posterior_draws(model, candidate_x, candidate_t, targets));
  b.cov(0, 0) += model.noise_variance();
  return b;
}

}  // namespace activecate
