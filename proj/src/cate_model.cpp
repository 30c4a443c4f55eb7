#include "activecate/cate_model.hpp"

#include "activecate/kernels.hpp"

namespace activecate {

void LabeledData::validate() const {
  if (t.size() != x.rows() || y.size() != x.rows())
    throw InputError("labeled data: covariates, treatments and outcomes differ in length");
  for (Index i = 0; i < t.size(); ++i) check_treatment(t(i));
  if (!x.allFinite()) throw InputError("labeled data: non-finite covariates");
  if (!y.allFinite()) throw InputError("labeled data: non-finite outcomes");
}

LatentPoints LatentPoints::single(const Vector& x, int t) {
  LatentPoints p;
  p.x = x.transpose();
  p.t = IndexVector::Constant(1, t);
  return p;
}

LatentPoints LatentPoints::arm(const Matrix& x, int t) {
  return LatentPoints{x, IndexVector::Constant(x.rows(), t)};
}

Vector CateModel::latent_var(const LatentPoints& p) const {
  return latent_cov_paired(p.x, p.t, p.t).cwiseMax(0.0);
}

Vector CateModel::cate_mean(const Matrix& x) const {
  return latent_mean(LatentPoints::arm(x, 1)) - latent_mean(LatentPoints::arm(x, 0));
}

Vector CateModel::cate_var(const Matrix& x) const {
  const IndexVector zeros = IndexVector::Zero(x.rows());
  const IndexVector ones = IndexVector::Ones(x.rows());
  const Vector v00 = latent_cov_paired(x, zeros, zeros);
  const Vector v11 = latent_cov_paired(x, ones, ones);
  const Vector v01 = latent_cov_paired(x, zeros, ones);
  return (v00 + v11 - 2.0 * v01).cwiseMax(0.0);
}

JointGaussianBelief joint_belief(const CateModel& model, const Vector& candidate_x, int candidate_t,
                                 const Vector& target_x) {
  check_treatment(candidate_t);
  LatentPoints pts;
  pts.x.resize(3, candidate_x.size());
  pts.x.row(0) = candidate_x.transpose();
  pts.x.row(1) = target_x.transpose();
  pts.x.row(2) = target_x.transpose();
  pts.t.resize(3);
  pts.t << candidate_t, 0, 1;

  JointGaussianBelief b;
  b.labels = {label::kY, label::f0(0), label::f1(0)};
  b.mean = model.latent_mean(pts);
  b.cov = model.latent_cov(pts, pts);
  b.cov = 0.5 * (b.cov + b.cov.transpose());
  b.cov.diagonal() = b.cov.diagonal().cwiseMax(0.0);
  b.cov(0, 0) += model.noise_variance();
  return b;
}

JointGaussianBelief candidate_target_belief(const CateModel& model, const Vector& candidate_x, int candidate_t,
                                            const Matrix& targets) {
  check_treatment(candidate_t);
  const Index m = targets.rows();
  LatentPoints pts;
  pts.x.resize(1 + 2 * m, candidate_x.size());
  pts.t.resize(1 + 2 * m);
  pts.x.row(0) = candidate_x.transpose();
  pts.t(0) = candidate_t;
  for (Index j = 0; j < m; ++j) {
    pts.x.row(1 + 2 * j) = targets.row(j);
    pts.t(1 + 2 * j) = 0;
    pts.x.row(2 + 2 * j) = targets.row(j);
    pts.t(2 + 2 * j) = 1;
  }
  const Vector latent_mean = model.latent_mean(pts);
  const Matrix latent_cov = model.latent_cov(pts, pts);

  // Linear map from latent values to (y, f0, f1, tau) per target.
  const Index q = 1 + 3 * m;
  Matrix map = Matrix::Zero(q, 1 + 2 * m);
  map(0, 0) = 1.0;
  JointGaussianBelief b;
  b.labels.reserve(q);
  b.labels.emplace_back(label::kY);
  for (Index j = 0; j < m; ++j) {
    const Index r = 1 + 3 * j;
    map(r, 1 + 2 * j) = 1.0;
    map(r + 1, 2 + 2 * j) = 1.0;
    map(r + 2, 1 + 2 * j) = -1.0;
    map(r + 2, 2 + 2 * j) = 1.0;
    b.labels.push_back(label::f0(j));
    b.labels.push_back(label::f1(j));
    b.labels.push_back(label::tau(j));
  }
  b.mean = map * latent_mean;
  b.cov = map * latent_cov * map.transpose();
  b.cov = 0.5 * (b.cov + b.cov.transpose());
  b.cov.diagonal() = b.cov.diagonal().cwiseMax(0.0);
  b.cov(0, 0) += model.noise_variance();
  return b;
}

}  // namespace activecate
