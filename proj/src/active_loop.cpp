#include "activecate/active_loop.hpp"

#include "activecate/ensemble.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace activecate {

// ---- estimators -------------------------------------------------------------

std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::cmgp: return "cmgp";
    case EstimatorKind::nsgp: return "nsgp";
    case EstimatorKind::ensemble: return "ensemble";
  }
  return "unknown";
}

EstimatorKind parse_estimator_kind(const std::string& s) {
  for (EstimatorKind k : {EstimatorKind::cmgp, EstimatorKind::nsgp, EstimatorKind::ensemble})
    if (to_string(k) == s) return k;
  throw InputError("unknown estimator '" + s + "'");
}

void EstimatorConfig::validate() const {
  if (restarts < 1) throw InputError("estimator: restarts must be at least 1");
  if (evaluations < 1) throw InputError("estimator: evaluations must be at least 1");
  if (members < 2) throw InputError("estimator: members must be at least 2");
  if (!(ridge >= 0.0)) throw InputError("estimator: ridge must be non-negative");
}

CateModelPtr EstimatorFactory::fit(const LabeledData& data, bool optimize, std::uint64_t seed) {
  if (cfg_.kind == EstimatorKind::ensemble)
    return std::make_shared<EnsembleLinearModel>(fit_ensemble(data, cfg_.members, cfg_.ridge, seed));
  const GpKind kind = cfg_.kind == EstimatorKind::cmgp ? GpKind::cmgp : GpKind::nsgp;
  if (optimize || !last_) {
    HyperSearchConfig search;
    search.family = cfg_.family;
    search.restarts = cfg_.restarts;
    search.evaluations_per_restart = cfg_.evaluations;
    search.ard = cfg_.ard;
    search.seed = seed;
    search.initial = last_;
    last_ = optimize_hyperparams(data, kind, search);
  }
  return std::make_shared<GpPosterior>(GpPosterior::fit(data, *last_));
}

// ---- oracle -----------------------------------------------------------------

FactualOracle::FactualOracle(Matrix x, IndexVector t, Vector y) : x_(std::move(x)), t_(std::move(t)), y_(std::move(y)) {
  if (t_.size() != x_.rows() || y_.size() != x_.rows()) throw InputError("oracle: field lengths differ");
}

double FactualOracle::query(Index row) const {
  if (row < 0 || row >= size()) throw InputError("oracle: row out of range");
  queried_.push_back(row);
  return y_(row);
}

// ---- loop pieces ------------------------------------------------------------

double LoopConfig::effective_temperature() const {
  if (temperature) return *temperature;
  return is_bald_family(method) ? 1.0 : 0.0;
}

void LoopConfig::validate() const {
  if (n_init < 1) throw InputError("loop: n_init must be at least 1");
  if (batch_size < 1) throw InputError("loop: batch_size must be at least 1");
  if (budget < n_init) throw InputError("loop: budget must be at least n_init");
  if (temperature && !(*temperature >= 0.0)) throw InputError("loop: temperature must be non-negative");
  estimator.validate();
}

LabeledData ActiveState::labeled_data(const FactualOracle& oracle) const {
  LabeledData d;
  d.x = oracle.covariates()(labeled, Eigen::all);
  d.t = oracle.treatments()(labeled);
  d.y = labeled_y;
  return d;
}

ActiveState warm_start(const FactualOracle& oracle, Index n_init, Rng& rng) {
  if (n_init < 1 || n_init > oracle.size())
    throw InputError("warm start: n_init (" + std::to_string(n_init) + ") exceeds pool size (" +
                     std::to_string(oracle.size()) + ")");
  std::vector<Index> rows(oracle.size());
  std::iota(rows.begin(), rows.end(), 0);
  std::shuffle(rows.begin(), rows.end(), rng);
  ActiveState s;
  s.labeled.assign(rows.begin(), rows.begin() + n_init);
  s.pool.assign(rows.begin() + n_init, rows.end());
  std::sort(s.pool.begin(), s.pool.end());
  s.labeled_y.resize(n_init);
  for (Index i = 0; i < n_init; ++i) s.labeled_y(i) = oracle.query(s.labeled[i]);
  return s;
}

std::vector<Index> select_batch(const ScoreVector& scores, Index n_b, double temperature, Rng& rng) {
  const Index n = scores.size();
  if (n_b < 0 || n_b > n) throw InputError("select_batch: batch larger than the pool");
  if (!scores.allFinite()) throw InputError("select_batch: non-finite scores");
  if (!(temperature >= 0.0)) throw InputError("select_batch: temperature must be non-negative");
  std::vector<Index> picked;
  picked.reserve(n_b);
  if (temperature == 0.0) {
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) > scores(b); });
    picked.assign(order.begin(), order.begin() + n_b);
    return picked;
  }
  const double top = scores.maxCoeff();
  std::vector<double> w(n);
  for (Index i = 0; i < n; ++i) w[i] = std::exp((scores(i) - top) / temperature);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Index k = 0; k < n_b; ++k) {
    double total = 0.0;
    for (double v : w) total += v;
    Index choice = -1;
    if (total > 0.0) {
      double r = u(rng) * total;
      for (Index i = 0; i < n; ++i) {
        if (w[i] <= 0.0) continue;
        choice = i;
        r -= w[i];
        if (r < 0.0) break;
      }
    } else {
      // every remaining weight underflowed: fall back to the lowest unpicked index
      for (Index i = 0; i < n && choice < 0; ++i)
        if (std::find(picked.begin(), picked.end(), i) == picked.end()) choice = i;
    }
    picked.push_back(choice);
    w[choice] = 0.0;
  }
  return picked;
}

void set_acquisition_target(ActiveState& state, TargetMode mode, const FactualOracle& oracle, const Matrix& test_x,
                            const IndexVector& test_t) {
  state.target = mode;
  if (mode == TargetMode::test) {
    state.target_x = test_x;
    state.target_t = test_t;
    return;
  }
  if (state.pool.empty()) throw InputError("acquisition target: pool is empty");
  state.target_x = oracle.covariates()(state.pool, Eigen::all);
  state.target_t = oracle.treatments()(state.pool);
}

// ---- run --------------------------------------------------------------------

RunRecord run_active_learning(const LoopConfig& config, const FactualOracle& pool, const Matrix& test_x,
                              const IndexVector& test_t, const Evaluator& evaluate) {
  config.validate();
  if (config.target == TargetMode::test && test_x.rows() != test_t.size())
    throw InputError("loop: test covariates and treatments differ in length");
  RunRecord record;
  record.method = to_string(config.method);
  record.estimator = to_string(config.estimator.kind);
  record.seed = config.seed;

  Rng warm_rng(stream_seed(config.seed, "warm_start"));
  ActiveState state = warm_start(pool, config.n_init, warm_rng);
  EstimatorFactory factory(config.estimator);
  const std::uint64_t fit_base = stream_seed(config.seed, "fit");
  const std::uint64_t acq_base = stream_seed(config.seed, "acquire", to_string(config.method));
  const std::uint64_t select_base = stream_seed(config.seed, "select", to_string(config.method));
  const double temperature = config.effective_temperature();
  const Index budget = std::min(config.budget, pool.size());

  CateModelPtr model;
  double acq_seconds = 0.0;
  try {
    while (true) {
      const bool optimize = config.refit_hyperparams || state.step == 0;
      model = factory.fit(state.labeled_data(pool), optimize, stream_seed_n(fit_base, state.step));
      const PeheScores pehe = evaluate(*model);
      record.steps.push_back({state.step, static_cast<Index>(state.labeled.size()), pehe.pool, pehe.test, acq_seconds});

      const Index remaining = budget - static_cast<Index>(state.labeled.size());
      if (remaining <= 0 || state.pool.empty()) break;
      const Index k = std::min({config.batch_size, remaining, static_cast<Index>(state.pool.size())});

      const auto start = std::chrono::steady_clock::now();
      set_acquisition_target(state, config.target, pool, test_x, test_t);
      AcquisitionContext ctx;
      ctx.model = model.get();
      ctx.pool_x = pool.covariates()(state.pool, Eigen::all);
      ctx.pool_t = pool.treatments()(state.pool);
      ctx.target_x = state.target_x;
      ctx.target_t = state.target_t;
      ctx.labeled_x = pool.covariates()(state.labeled, Eigen::all);
      ctx.labeled_t = pool.treatments()(state.labeled);
      ctx.propensity_x = pool.covariates();
      ctx.propensity_t = pool.treatments();
      Rng acq_rng(stream_seed_n(acq_base, state.step));
      const ScoreVector scores = score_pool(config.method, ctx, config.acquisition, acq_rng);
      Rng select_rng(stream_seed_n(select_base, state.step));
      const std::vector<Index> chosen = select_batch(scores, k, temperature, select_rng);
      acq_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

      ++state.step;
      AcquisitionEvent event;
      event.step = state.step;
      std::vector<bool> taken(state.pool.size(), false);
      const Index old_n = static_cast<Index>(state.labeled.size());
      state.labeled_y.conservativeResize(old_n + k);
      for (Index j = 0; j < k; ++j) {
        const Index row = state.pool[chosen[j]];
        taken[chosen[j]] = true;
        event.rows.push_back(row);
        event.scores.push_back(scores(chosen[j]));
        state.labeled.push_back(row);
        state.labeled_y(old_n + j) = pool.query(row);
      }
      std::vector<Index> rest;
      rest.reserve(state.pool.size() - k);
      for (std::size_t i = 0; i < state.pool.size(); ++i)
        if (!taken[i]) rest.push_back(state.pool[i]);
      state.pool = std::move(rest);
      state.history.push_back(std::move(event));
    }
  } catch (const std::exception& e) {
    record.failed = true;
    record.failure = "step " + std::to_string(state.step) + ": " + e.what();
  }
  record.history = std::move(state.history);
  return record;
}

}  // namespace activecate
