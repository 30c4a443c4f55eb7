#pragma once

#include "activecate/common.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace activecate {

class CateModel;

/// One point on a learning curve. Step 0 is the warm start.
struct StepEntry {
  int step = 0;
  Index n_labeled = 0;
  double sqrt_pehe_pool = 0.0;
  double sqrt_pehe_test = 0.0;
  double acq_seconds = 0.0;
};

struct AcquisitionEvent {
  int step = 0;
  std::vector<Index> rows;  // dataset rows of the pool partition
  std::vector<double> scores;
};

struct RunRecord {
  std::string dataset;
  std::string variant;
  std::string estimator;
  std::string method;
  std::uint64_t seed = 0;
  std::vector<StepEntry> steps;
  std::vector<AcquisitionEvent> history;
  bool failed = false;
  std::string failure;

  /// Throws InputError when n_labeled is not strictly increasing or a PEHE is negative.
  void validate() const;
};

/// sqrt(mean((tau_hat - tau_true)^2)). Throws InputError on empty or mismatched input.
double sqrt_pehe(const Vector& tau_hat, const Vector& tau_true);

/// (random - method) / random per step; nullopt where random is 0.
std::vector<std::optional<double>> relative_improvement(const std::vector<double>& method_curve,
                                                        const std::vector<double>& random_curve);

/// Running count/mean/M2 with pooled merging.
struct Moments {
  Index count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v);
  static Moments merge(const Moments& a, const Moments& b);
  /// Sample sd (divisor n - 1); 0 when count < 2.
  double sd() const;
};

struct SummaryKey {
  std::string dataset, variant, estimator, method;
  int step = 0;
  auto operator<=>(const SummaryKey&) const = default;
};

struct SummaryRow {
  SummaryKey key;
  Index n_labeled = 0;
  std::string metric;
  Moments moments;
  Index failed_runs = 0;
};

/// Mean/sd/count per (dataset, variant, estimator, method, step) for each of
/// sqrt_pehe_pool, sqrt_pehe_test and acq_seconds. Failed runs are excluded
/// and counted. Output is sorted, so input order does not matter. Throws
/// InputError when runs of one group disagree on the n_labeled grid.
std::vector<SummaryRow> aggregate_runs(const std::vector<RunRecord>& records);

/// Row-wise merge of two aggregates over disjoint record sets.
std::vector<SummaryRow> merge_summaries(const std::vector<SummaryRow>& a, const std::vector<SummaryRow>& b);

/// Relative improvement over the "random" method of the same dataset,
/// variant and estimator. Metric names: rel_improvement_{pool,test} from
/// per-seed ratios, and rel_improvement_{pool,test}_of_means from the mean
/// curves. Step -1 rows average over steps (per seed first for the paired
/// metric). Undefined ratios are skipped and lower the count.
std::vector<SummaryRow> relative_improvement_rows(const std::vector<RunRecord>& records);

struct PeheScores {
  double pool = 0.0;
  double test = 0.0;
};

/// Ground-truth side of a partition. Every read is logged with the
/// reader's tag so that runs can be audited for leakage.
class GroundTruthOracle {
 public:
  struct Access {
    std::string tag;
    std::string field;
  };

  GroundTruthOracle(Matrix x, Vector mu0, Vector mu1, Vector tau_true);

  const Matrix& covariates() const { return x_; }
  const Vector& tau_true(const std::string& tag) const;
  const Vector& mu0(const std::string& tag) const;
  const Vector& mu1(const std::string& tag) const;
  std::vector<Access> accesses() const;

 private:
  void log(const std::string& tag, const char* field) const;

  Matrix x_;
  Vector mu0_, mu1_, tau_;
  mutable std::vector<Access> log_;
};

inline constexpr const char* kEvaluationTag = "evaluation";

/// sqrt PEHE of the model's CATE mean on both target sets.
PeheScores evaluate_model(const CateModel& model, const GroundTruthOracle& pool, const GroundTruthOracle& test);

}  // namespace activecate
