#pragma once

#include "activecate/acquisition.hpp"
#include "activecate/cate_model.hpp"
#include "activecate/evaluation.hpp"
#include "activecate/gp.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace activecate {

// ---- estimators -------------------------------------------------------------

enum class EstimatorKind { cmgp, nsgp, ensemble };

std::string to_string(EstimatorKind k);
EstimatorKind parse_estimator_kind(const std::string& s);

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::cmgp;
  KernelFamily family = KernelFamily::rbf;
  int restarts = 3;
  int evaluations = 50;
  bool ard = true;
  int members = 50;       // ensemble
  double ridge = 1e-2;    // ensemble

  void validate() const;
  bool operator==(const EstimatorConfig&) const = default;
};

/// Fits a model and carries GP hyperparameters between rounds.
class EstimatorFactory {
 public:
  explicit EstimatorFactory(EstimatorConfig cfg) : cfg_(std::move(cfg)) {}

  /// With optimize = false the last optimized hyperparameters are reused
  /// (the first call always optimizes).
  CateModelPtr fit(const LabeledData& data, bool optimize, std::uint64_t seed);
  const EstimatorConfig& config() const { return cfg_; }

 private:
  EstimatorConfig cfg_;
  std::optional<GpHyperparameters> last_;
};

// ---- oracles ----------------------------------------------------------------

/// The only view of the pool the loop gets: covariates, treatments and the
/// factual outcome of rows it asks for. Queries are logged.
class FactualOracle {
 public:
  FactualOracle(Matrix x, IndexVector t, Vector y);

  Index size() const { return x_.rows(); }
  const Matrix& covariates() const { return x_; }
  const IndexVector& treatments() const { return t_; }
  double query(Index row) const;
  const std::vector<Index>& queried() const { return queried_; }

 private:
  Matrix x_;
  IndexVector t_;
  Vector y_;
  mutable std::vector<Index> queried_;
};

// ---- loop -------------------------------------------------------------------

enum class TargetMode { pool, test };

struct LoopConfig {
  Index n_init = 50;
  Index batch_size = 20;
  Index budget = 850;
  /// Softmax temperature; BALD-family methods default to 1, others to 0.
  std::optional<double> temperature;
  bool refit_hyperparams = true;
  EstimatorConfig estimator;
  AcquisitionMethod method = AcquisitionMethod::random;
  AcquisitionParams acquisition;
  TargetMode target = TargetMode::pool;
  std::uint64_t seed = 0;

  double effective_temperature() const;
  void validate() const;
};

struct ActiveState {
  std::vector<Index> labeled;  // rows of the pool partition, acquisition order
  Vector labeled_y;
  std::vector<Index> pool;     // remaining rows, ascending
  Matrix target_x;
  IndexVector target_t;
  TargetMode target = TargetMode::pool;
  int step = 0;
  std::vector<AcquisitionEvent> history;

  LabeledData labeled_data(const FactualOracle& oracle) const;
};

/// n_init rows drawn uniformly without replacement; their outcomes are queried.
ActiveState warm_start(const FactualOracle& oracle, Index n_init, Rng& rng);

/// Positions into `scores`. T = 0 takes the n_b largest (ties to the lower
/// index); T > 0 draws n_b times without replacement with probabilities
/// proportional to exp(score / T), renormalized after each draw.
std::vector<Index> select_batch(const ScoreVector& scores, Index n_b, double temperature, Rng& rng);

/// Binds the acquisition targets: current pool covariates or the test
/// covariates (treatments ride along for factual EPIG).
void set_acquisition_target(ActiveState& state, TargetMode mode, const FactualOracle& oracle, const Matrix& test_x,
                            const IndexVector& test_t);

/// Scores model quality after every fit; supplied by the evaluation side.
using Evaluator = std::function<PeheScores(const CateModel&)>;

/// Warm start, then rounds of fit / score / select / query until the budget
/// or the pool is exhausted. A failing fit or acquisition ends the run with
/// the failure flag set and the rounds completed so far.
RunRecord run_active_learning(const LoopConfig& config, const FactualOracle& pool, const Matrix& test_x,
                              const IndexVector& test_t, const Evaluator& evaluate);

}  // namespace activecate
