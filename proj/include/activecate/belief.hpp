#pragma once

#include "activecate/common.hpp"

#include <string>
#include <vector>

namespace activecate {

/// Quantity labels. Acquisition code relies on the ordering
/// y, then (f0, f1, tau) per target.
namespace label {
inline constexpr const char* kY = "y";
std::string f0(Index target);
std::string f1(Index target);
std::string tau(Index target);
}  // namespace label

/// Gaussian over a labeled set of predictive quantities.
struct JointGaussianBelief {
  std::vector<std::string> labels;
  Vector mean;
  Matrix cov;

  Index size() const { return static_cast<Index>(labels.size()); }
  /// Position of a label; throws InputError when absent.
  Index index_of(const std::string& name) const;
  /// Throws InputError on shape mismatch, asymmetry beyond 1e-10 (relative),
  /// or a negative diagonal.
  void validate() const;
  /// Sub-belief over the given labels, in the given order.
  JointGaussianBelief marginal(const std::vector<std::string>& names) const;
};

}  // namespace activecate
