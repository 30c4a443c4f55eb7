#pragma once

#include "activecate/common.hpp"

namespace activecate {

/// Ridge-penalized logistic regression of treatment on [1, x].
class PropensityModel {
 public:
  PropensityModel() = default;
  explicit PropensityModel(Vector weights) : weights_(std::move(weights)) {}

  bool fitted() const { return weights_.size() > 0; }
  const Vector& weights() const { return weights_; }
  /// P(t = 1 | x), clamped to [0.01, 0.99]. Throws InputError when unfitted.
  double predict(const Vector& x) const;
  Vector predict(const Matrix& x) const;

 private:
  Vector weights_;
};

/// Damped Newton iterations (at most 100, stop when the gradient norm drops
/// below 1e-8 n). Throws NumericalError on non-convergence.
PropensityModel fit_propensity(const Matrix& x, const IndexVector& t, double ridge = 1e-3);

}  // namespace activecate
