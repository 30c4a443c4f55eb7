#include "activecate/belief.hpp"

#include <algorithm>
#include <cmath>

namespace activecate {

namespace label {
std::string f0(Index target) { return "f0@" + std::to_string(target); }
std::string f1(Index target) { return "f1@" + std::to_string(target); }
std::string tau(Index target) { return "tau@" + std::to_string(target); }
}  // namespace label

Index JointGaussianBelief::index_of(const std::string& name) const {
  auto it = std::find(labels.begin(), labels.end(), name);
  if (it == labels.end()) throw InputError("belief has no quantity labeled '" + name + "'");
  return static_cast<Index>(it - labels.begin());
}

void JointGaussianBelief::validate() const {
  const Index n = size();
  if (mean.size() != n || cov.rows() != n || cov.cols() != n)
    throw InputError("belief: labels, mean and covariance disagree in size");
  const double scale = 1.0 + (n > 0 ? cov.cwiseAbs().maxCoeff() : 0.0);
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw InputError("belief: covariance is not symmetric");
  if (n > 0 && cov.diagonal().minCoeff() < 0.0) throw InputError("belief: negative variance");
}

JointGaussianBelief JointGaussianBelief::marginal(const std::vector<std::string>& names) const {
  std::vector<Index> idx;
  idx.reserve(names.size());
  for (const auto& nm : names) idx.push_back(index_of(nm));
  JointGaussianBelief out;
  out.labels = names;
  out.mean = mean(idx);
  out.cov = cov(idx, idx);
  return out;
}

}  // namespace activecate
