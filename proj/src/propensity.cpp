#include "activecate/propensity.hpp"

#include "activecate/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace activecate {

namespace {

Matrix with_intercept(const Matrix& x) {
  Matrix d(x.rows(), x.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(x.cols()) = x;
  return d;
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// log(1 + exp(z)) without overflow
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double penalized_loss(const Matrix& design, const Vector& t, const Vector& w, double ridge) {
  const Vector z = design * w;
  double loss = 0.0;
  for (Index i = 0; i < z.size(); ++i) loss += softplus(z(i)) - t(i) * z(i);
  return loss + 0.5 * ridge * w.squaredNorm();
}

}  // namespace

double PropensityModel::predict(const Vector& x) const {
  if (!fitted()) throw InputError("propensity model is not fitted");
  if (x.size() + 1 != weights_.size()) throw InputError("propensity: covariate dimension mismatch");
  const double z = weights_(0) + weights_.tail(x.size()).dot(x);
  return std::clamp(sigmoid(z), 0.01, 0.99);
}

Vector PropensityModel::predict(const Matrix& x) const {
  Vector out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out(i) = predict(Vector(x.row(i).transpose()));
  return out;
}

PropensityModel fit_propensity(const Matrix& x, const IndexVector& t, double ridge) {
  if (x.rows() != t.size() || x.rows() == 0) throw InputError("propensity: covariates and treatments differ in length");
  if (!(ridge > 0.0)) throw InputError("propensity: ridge must be positive");
  for (Index i = 0; i < t.size(); ++i) check_treatment(t(i));

  const Matrix design = with_intercept(x);
  const Vector tv = t.cast<double>();
  Vector w = Vector::Zero(design.cols());
  double loss = penalized_loss(design, tv, w, ridge);
  for (int iter = 0; iter < 100; ++iter) {
    const Vector z = design * w;
    Vector p(z.size());
    for (Index i = 0; i < z.size(); ++i) p(i) = sigmoid(z(i));
    const Vector grad = design.transpose() * (p - tv) + ridge * w;
    if (grad.norm() < 1e-8 * static_cast<double>(x.rows())) return PropensityModel(w);
    const Vector s = (p.array() * (1.0 - p.array())).matrix();
    Matrix hess = design.transpose() * s.asDiagonal() * design;
    hess.diagonal().array() += ridge;
    const Vector step = hess.ldlt().solve(grad);
    double scale = 1.0;
    Vector next = w - step;
    double next_loss = penalized_loss(design, tv, next, ridge);
    while (next_loss > loss && scale > 1e-10) {
      scale *= 0.5;
      next = w - scale * step;
      next_loss = penalized_loss(design, tv, next, ridge);
    }
    w = next;
    loss = next_loss;
  }
  throw NumericalError("propensity: Newton iterations did not converge");
}

}  // namespace activecate
