#include "activecate/active_loop.hpp"
#include "activecate/dgp.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace activecate;

namespace {

struct Fixture {
  Dataset pool;
  Dataset test;
  FactualOracle oracle;
  GroundTruthOracle pool_truth, test_truth;

  explicit Fixture(Index n_pool, std::uint64_t seed = 1)
      : pool(make(n_pool, seed)),
        test(make(40, seed + 100)),
        oracle(pool.x, pool.t, pool.y),
        pool_truth(pool.x, pool.mu0, pool.mu1, pool.tau_true),
        test_truth(test.x, test.mu0, test.mu1, test.tau_true) {}

  static Dataset make(Index n, std::uint64_t seed) {
    Rng rng(seed);
    return gen_causalbald(n, false, rng);
  }

  Evaluator evaluator() const {
    return [this](const CateModel& m) { return evaluate_model(m, pool_truth, test_truth); };
  }
};

LoopConfig small_config(AcquisitionMethod method, std::uint64_t seed) {
  LoopConfig c;
  c.n_init = 4;
  c.batch_size = 2;
  c.budget = 8;
  c.method = method;
  c.seed = seed;
  c.estimator.kind = EstimatorKind::ensemble;
  c.estimator.members = 10;
  return c;
}

}  // namespace

TEST_SUITE("active_loop") {
  TEST_CASE("estimator names") {
    CHECK(parse_estimator_kind("nsgp") == EstimatorKind::nsgp);
    CHECK(to_string(EstimatorKind::ensemble) == "ensemble");
    CHECK_THROWS_AS(parse_estimator_kind("bart"), InputError);
    EstimatorConfig bad;
    bad.members = 1;
    CHECK_THROWS_AS(bad.validate(), InputError);
  }

  TEST_CASE("estimator factory reuses hyperparameters when frozen") {
    Fixture f(60);
    LabeledData d{f.pool.x.topRows(30), f.pool.t.head(30), f.pool.y.head(30)};
    EstimatorConfig cfg;
    cfg.restarts = 1;
    cfg.evaluations = 10;
    EstimatorFactory factory(cfg);
    const auto first = std::dynamic_pointer_cast<const GpPosterior>(factory.fit(d, false, 1));
    REQUIRE(first);
    LabeledData more{f.pool.x.topRows(40), f.pool.t.head(40), f.pool.y.head(40)};
    const auto frozen = std::dynamic_pointer_cast<const GpPosterior>(factory.fit(more, false, 2));
    CHECK(frozen->hyperparameters().noise_variance == first->hyperparameters().noise_variance);
    CHECK(frozen->hyperparameters().base.lengthscales == first->hyperparameters().base.lengthscales);

    EstimatorConfig ens;
    ens.kind = EstimatorKind::ensemble;
    ens.members = 10;
    EstimatorFactory ef(ens);
    CHECK(ef.fit(d, true, 3)->name() == "ensemble");
  }

  TEST_CASE("factual oracle logs queries") {
    const FactualOracle o(Matrix::Zero(3, 1), IndexVector::Zero(3), Vector::LinSpaced(3, 0.0, 2.0));
    CHECK(o.query(2) == 2.0);
    CHECK(o.query(0) == 0.0);
    CHECK(o.queried() == std::vector<Index>{2, 0});
    CHECK_THROWS_AS(o.query(3), InputError);
    CHECK_THROWS_AS(FactualOracle(Matrix::Zero(3, 1), IndexVector::Zero(2), Vector::Zero(3)), InputError);
  }

  TEST_CASE("warm start") {
    Fixture f(10);
    Rng a(4), b(4);
    const ActiveState s = warm_start(f.oracle, 4, a);
    const ActiveState s2 = warm_start(f.oracle, 4, b);
    CHECK(s.labeled == s2.labeled);
    CHECK(s.labeled.size() == 4);
    CHECK(s.pool.size() == 6);
    std::set<Index> all(s.labeled.begin(), s.labeled.end());
    CHECK(all.size() == 4);
    all.insert(s.pool.begin(), s.pool.end());
    CHECK(all.size() == 10);
    CHECK(std::is_sorted(s.pool.begin(), s.pool.end()));
    for (Index i = 0; i < 4; ++i) CHECK(s.labeled_y(i) == f.pool.y(s.labeled[i]));
    Rng c(4);
    CHECK(warm_start(f.oracle, 10, c).pool.empty());
    CHECK_THROWS_AS(warm_start(f.oracle, 11, c), InputError);
  }

  TEST_CASE("greedy batch selection") {
    Rng rng(0);
    const ScoreVector s = (ScoreVector(3) << 3.0, 1.0, 2.0).finished();
    CHECK(select_batch(s, 2, 0.0, rng) == std::vector<Index>{0, 2});
    CHECK(select_batch(ScoreVector::Constant(5, 0.7), 3, 0.0, rng) == std::vector<Index>{0, 1, 2});
    CHECK(select_batch(s, 0, 0.0, rng).empty());
    CHECK_THROWS_AS(select_batch(s, 4, 0.0, rng), InputError);
    ScoreVector bad = s;
    bad(1) = std::nan("");
    CHECK_THROWS_AS(select_batch(bad, 1, 0.0, rng), InputError);
    CHECK_THROWS_AS(select_batch(s, 1, -1.0, rng), InputError);
  }

  TEST_CASE("softmax batch selection") {
    Rng rng(1);
    const ScoreVector s = ScoreVector::LinSpaced(10, 0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
      const auto picked = select_batch(s, 6, 0.5, rng);
      CHECK(std::set<Index>(picked.begin(), picked.end()).size() == 6);
    }
    CHECK(select_batch(s, 10, 0.5, rng).size() == 10);
    // a huge score gap makes the top element certain
    ScoreVector gap = ScoreVector::Zero(5);
    gap(3) = 1e4;
    CHECK(select_batch(gap, 1, 1.0, rng)[0] == 3);
    // a tiny temperature leaves only the lowest remaining index once weights underflow
    CHECK(select_batch(gap, 2, 1e-6, rng) == std::vector<Index>{3, 0});
  }

  TEST_CASE("set acquisition target") {
    Fixture f(10);
    Rng rng(2);
    ActiveState s = warm_start(f.oracle, 4, rng);
    set_acquisition_target(s, TargetMode::pool, f.oracle, f.test.x, f.test.t);
    CHECK(s.target_x.rows() == 6);
    CHECK(s.target_x.row(0) == f.pool.x.row(s.pool[0]));
    set_acquisition_target(s, TargetMode::test, f.oracle, f.test.x, f.test.t);
    CHECK(s.target_x == f.test.x);
    s.pool.clear();
    CHECK_THROWS_AS(set_acquisition_target(s, TargetMode::pool, f.oracle, f.test.x, f.test.t), InputError);
  }

  TEST_CASE("round arithmetic") {
    Fixture f(10);
    const RunRecord r = run_active_learning(small_config(AcquisitionMethod::random, 0), f.oracle, f.test.x,
                                            f.test.t, f.evaluator());
    CHECK_FALSE(r.failed);
    REQUIRE(r.steps.size() == 3);
    CHECK(r.steps.back().n_labeled == 8);
    CHECK(r.history.size() == 2);
    CHECK_NOTHROW(r.validate());

    LoopConfig none = small_config(AcquisitionMethod::random, 0);
    none.budget = 4;
    CHECK(run_active_learning(none, f.oracle, f.test.x, f.test.t, f.evaluator()).steps.size() == 1);

    LoopConfig odd = small_config(AcquisitionMethod::random, 0);
    odd.budget = 7;
    const RunRecord t = run_active_learning(odd, f.oracle, f.test.x, f.test.t, f.evaluator());
    REQUIRE(t.steps.size() == 3);
    CHECK(t.steps.back().n_labeled == 7);
    CHECK(t.history.back().rows.size() == 1);

    LoopConfig exhaust = small_config(AcquisitionMethod::random, 0);
    exhaust.budget = 100;
    exhaust.batch_size = 4;
    const RunRecord e = run_active_learning(exhaust, f.oracle, f.test.x, f.test.t, f.evaluator());
    CHECK(e.steps.back().n_labeled == 10);
  }

  TEST_CASE("determinism and seeds") {
    Fixture f(30);
    LoopConfig c = small_config(AcquisitionMethod::random, 0);
    c.budget = 12;
    const RunRecord a = run_active_learning(c, f.oracle, f.test.x, f.test.t, f.evaluator());
    const RunRecord b = run_active_learning(c, f.oracle, f.test.x, f.test.t, f.evaluator());
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t k = 0; k < a.steps.size(); ++k) {
      CHECK(a.steps[k].sqrt_pehe_pool == b.steps[k].sqrt_pehe_pool);
      CHECK(a.steps[k].sqrt_pehe_test == b.steps[k].sqrt_pehe_test);
    }
    for (std::size_t k = 0; k < a.history.size(); ++k) CHECK(a.history[k].rows == b.history[k].rows);
    c.seed = 1;
    const RunRecord other = run_active_learning(c, f.oracle, f.test.x, f.test.t, f.evaluator());
    bool differs = false;
    for (std::size_t k = 0; k < a.history.size(); ++k) differs |= a.history[k].rows != other.history[k].rows;
    CHECK(differs);
  }

  TEST_CASE("only factual outcomes of labeled rows are read") {
    Fixture f(40);
    LoopConfig c = small_config(AcquisitionMethod::causal_epig_tau, 3);
    c.budget = 14;
    c.target = TargetMode::test;
    const RunRecord r = run_active_learning(c, f.oracle, f.test.x, f.test.t, f.evaluator());
    CHECK_FALSE(r.failed);
    const auto& q = f.oracle.queried();
    CHECK(q.size() == 14);
    CHECK(std::set<Index>(q.begin(), q.end()).size() == 14);
    // replaying the warm start and the history reproduces the labeled set
    Rng warm(stream_seed(3, "warm_start"));
    ActiveState s = warm_start(FactualOracle(f.pool.x, f.pool.t, f.pool.y), 4, warm);
    std::vector<Index> replay = s.labeled;
    for (const auto& ev : r.history) replay.insert(replay.end(), ev.rows.begin(), ev.rows.end());
    CHECK(replay == q);
    for (const auto& a : f.pool_truth.accesses()) CHECK(a.tag == kEvaluationTag);
    for (const auto& a : f.test_truth.accesses()) CHECK(a.tag == kEvaluationTag);
    CHECK(f.pool_truth.accesses().size() == r.steps.size());
  }

  TEST_CASE("failures end the run with a partial record") {
    Fixture f(20);
    int calls = 0;
    const Evaluator flaky = [&](const CateModel&) -> PeheScores {
      if (++calls == 2) throw NumericalError("boom");
      return {1.0, 1.0};
    };
    const RunRecord r =
        run_active_learning(small_config(AcquisitionMethod::random, 0), f.oracle, f.test.x, f.test.t, flaky);
    CHECK(r.failed);
    CHECK(r.steps.size() == 1);
    CHECK(r.failure.find("step 1") != std::string::npos);
    CHECK(r.failure.find("boom") != std::string::npos);

    LoopConfig bad = small_config(AcquisitionMethod::random, 0);
    bad.budget = 2;
    CHECK_THROWS_AS(run_active_learning(bad, f.oracle, f.test.x, f.test.t, flaky), InputError);
  }

  TEST_CASE("default temperatures") {
    LoopConfig c;
    c.method = AcquisitionMethod::tau_bald;
    CHECK(c.effective_temperature() == 1.0);
    c.method = AcquisitionMethod::causal_epig_tau;
    CHECK(c.effective_temperature() == 0.0);
    c.temperature = 0.25;
    CHECK(c.effective_temperature() == 0.25);
  }

  TEST_CASE("every method completes a short run") {
    Fixture f(40);
    for (AcquisitionMethod m : all_acquisition_methods()) {
      for (EstimatorKind k : {EstimatorKind::cmgp, EstimatorKind::nsgp, EstimatorKind::ensemble}) {
        CAPTURE(to_string(m));
        CAPTURE(to_string(k));
        LoopConfig c = small_config(m, 5);
        c.n_init = 10;
        c.budget = 16;
        c.batch_size = 3;
        c.estimator.kind = k;
        c.estimator.members = 8;
        c.estimator.restarts = 1;
        c.estimator.evaluations = 10;
        c.acquisition.sundin_samples = 20;
        const FactualOracle o(f.pool.x, f.pool.t, f.pool.y);
        const RunRecord r = run_active_learning(c, o, f.test.x, f.test.t, f.evaluator());
        CHECK_FALSE(r.failed);
        CHECK(r.failure == "");
        CHECK(r.steps.back().n_labeled == 16);
      }
    }
  }
}
