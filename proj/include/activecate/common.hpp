#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace activecate {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexVector = Eigen::VectorXi;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

/// Bad arguments, malformed files, violated preconditions.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Factorization failures and other floating-point breakdowns.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Stable across platforms, unlike std::hash.
constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and a list of tags.
template <typename... Tags>
std::uint64_t stream_seed(std::uint64_t master, const Tags&... tags) {
  std::uint64_t h = splitmix64(master);
  ((h = splitmix64(h ^ fnv1a(std::string_view(tags)))), ...);
  return h;
}

inline std::uint64_t stream_seed_n(std::uint64_t master, std::uint64_t k) {
  return splitmix64(splitmix64(master) ^ splitmix64(k + 0x5851f42d4c957f2dULL));
}

/// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
/// visited exactly once; the caller writes results by index so the outcome
/// does not depend on scheduling.
void parallel_for(Index n, int threads, const std::function<void(Index)>& body);

}  // namespace activecate
