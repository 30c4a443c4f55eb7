#include "activecate/linalg.hpp"

#include <cmath>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

namespace activecate {

Vector JitteredCholesky::solve(const Vector& b) const {
  Vector z = lower.triangularView<Eigen::Lower>().solve(b);
  return lower.transpose().triangularView<Eigen::Upper>().solve(z);
}

Matrix JitteredCholesky::solve_lower(const Matrix& b) const {
  return lower.triangularView<Eigen::Lower>().solve(b);
}

namespace {

bool try_factor(const Matrix& a, double jitter, Matrix& out) {
  Eigen::LLT<Matrix> llt;
  if (jitter > 0.0) {
    Matrix shifted = a;
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
  } else {
    llt.compute(a);
  }
  if (llt.info() != Eigen::Success) return false;
  out = llt.matrixL();
  return (out.diagonal().array() > 0.0).all() && out.allFinite();
}

}  // namespace

JitteredCholesky cholesky_with_jitter(const Matrix& a, double start, bool relative) {
  if (a.rows() != a.cols()) throw InputError("cholesky: matrix is not square");
  JitteredCholesky result;
  if (a.rows() == 0) return result;
  if (try_factor(a, 0.0, result.lower)) return result;
  const double scale = relative ? std::max(a.diagonal().mean(), 1e-300) : 1.0;
  for (double j = start; j <= kJitterMax * (1.0 + 1e-9); j *= 10.0) {
    if (try_factor(a, j * scale, result.lower)) {
      result.jitter = j * scale;
      return result;
    }
  }
  throw NumericalError("cholesky failed after jitter escalation to 1e-3");
}

double log_det_psd(const Matrix& a) {
  if (a.rows() == 0) return 0.0;
  try {
    return cholesky_with_jitter(a, 1e-12, true).log_det();
  } catch (const NumericalError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

Matrix sample_covariance(const Matrix& draws) {
  if (draws.rows() < 2) throw InputError("sample covariance needs at least 2 draws");
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  const Matrix centered = draws.rowwise() - mean;
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(draws.rows() - 1);
  return 0.5 * (cov + cov.transpose());
}

double min_eigenvalue(const Matrix& a) {
  if (a.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void parallel_for(Index n, int threads, const std::function<void(Index)>& body) {
  if (n <= 0) return;
  const int workers = static_cast<int>(std::min<Index>(std::max(threads, 1), n));
  if (workers == 1) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (Index i = w; i < n; i += workers) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace activecate
