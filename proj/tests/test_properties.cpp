#include "activecate/active_loop.hpp"
#include "activecate/dgp.hpp"
#include "activecate/ensemble.hpp"
#include "mc_mi_oracle.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace activecate;
using activecate::testing::belief_from_cov;
using activecate::testing::random_spd;

namespace {

constexpr int kCases = 50;

std::vector<std::string> labels_of(const JointGaussianBelief& b, Index from, Index to) {
  return {b.labels.begin() + from, b.labels.begin() + to};
}

GpPosterior random_gp(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.3, 2.0);
  const Index d = 1 + static_cast<Index>(seed % 3);
  const Index n = 6 + static_cast<Index>(seed % 10);
  LabeledData data;
  data.x = Matrix::NullaryExpr(n, d, [&] { return std::normal_distribution<double>()(rng); });
  data.t = IndexVector::NullaryExpr(n, [&] { return static_cast<int>(rng() % 2); });
  data.y = Vector::NullaryExpr(n, [&] { return std::normal_distribution<double>()(rng); });
  GpHyperparameters h;
  h.kind = seed % 2 ? GpKind::cmgp : GpKind::nsgp;
  h.base = KernelConfig::isotropic(seed % 4 < 2 ? KernelFamily::rbf : KernelFamily::matern52, d, u(rng),
                                   h.kind == GpKind::cmgp ? 1.0 : u(rng));
  h.arm = KernelConfig::isotropic(KernelFamily::rbf, d, u(rng), u(rng));
  h.coregionalization = CoregionalizationConfig::from_cholesky(u(rng), u(rng) - 1.0, u(rng));
  h.noise_variance = 0.05 * u(rng);
  return GpPosterior::fit(data, h);
}

bool psd(const Matrix& cov) {
  const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (cov + cov.transpose()));
  const double top = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  return es.eigenvalues().minCoeff() >= -1e-9 * top;
}

RunRecord synthetic_run(const std::string& method, std::uint64_t seed, Rng& rng) {
  std::uniform_real_distribution<double> u(0.1, 3.0);
  RunRecord r;
  r.dataset = "causalbald";
  r.variant = "standard";
  r.estimator = "cmgp";
  r.method = method;
  r.seed = seed;
  for (int k = 0; k < 3; ++k) r.steps.push_back({k, 10 + 5 * k, u(rng), u(rng), 0.0});
  return r;
}

}  // namespace

TEST_SUITE("properties") {
  TEST_CASE("gaussian MI is symmetric, nonnegative and scale invariant") {
    for (int c = 0; c < kCases; ++c) {
      const Index n = 2 + c % 5;
      const Index split = 1 + c % (n - 1);
      const JointGaussianBelief b = belief_from_cov(random_spd(n, 1000 + c));
      const auto a = labels_of(b, 0, split), rest = labels_of(b, split, n);
      const double ab = gaussian_mi_block(b, a, rest);
      CHECK(ab >= 0.0);
      CHECK(gaussian_mi_block(b, rest, a) == doctest::Approx(ab).epsilon(1e-9));

      Rng rng(c);
      std::uniform_real_distribution<double> scale(0.1, 10.0);
      const Vector s = Vector::NullaryExpr(n, [&] { return scale(rng) * (rng() % 2 ? 1.0 : -1.0); });
      JointGaussianBelief scaled = b;
      scaled.cov = s.asDiagonal() * b.cov * s.asDiagonal();
      CHECK(gaussian_mi_block(scaled, a, rest) == doctest::Approx(ab).epsilon(1e-7).scale(1e-9));
    }
  }

  TEST_CASE("scalar and block MI agree") {
    for (int c = 0; c < kCases; ++c) {
      const Matrix cov = random_spd(2, 2000 + c);
      CHECK(gaussian_mi_scalar(cov(0, 0), cov(1, 1), cov(0, 1)) ==
            doctest::Approx(gaussian_mi_block(cov.topLeftCorner(1, 1), cov.topRightCorner(1, 1),
                                              cov.bottomRightCorner(1, 1)))
                .epsilon(1e-9));
    }
  }

  TEST_CASE("sqrt PEHE invariances") {
    for (int c = 0; c < kCases; ++c) {
      Rng rng(3000 + c);
      const Index n = 1 + c % 20;
      std::normal_distribution<double> z;
      const Vector a = Vector::NullaryExpr(n, [&] { return z(rng); });
      const Vector b = Vector::NullaryExpr(n, [&] { return z(rng); });
      const double base = sqrt_pehe(a, b);
      CHECK(base >= 0.0);
      CHECK(sqrt_pehe(b, a) == doctest::Approx(base));
      CHECK(sqrt_pehe(-a, -b) == doctest::Approx(base));
      std::vector<int> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      Vector pa(n), pb(n);
      for (Index i = 0; i < n; ++i) {
        pa(i) = a(perm[i]);
        pb(i) = b(perm[i]);
      }
      CHECK(sqrt_pehe(pa, pb) == doctest::Approx(base));
      CHECK(sqrt_pehe(a.array() + 7.0, b.array() + 7.0) == doctest::Approx(base));
    }
  }

  TEST_CASE("summary merging is associative and matches direct aggregation") {
    for (int c = 0; c < kCases; ++c) {
      Rng rng(4000 + c);
      std::vector<RunRecord> x, y, z, all;
      for (std::uint64_t s = 0; s < 6; ++s) {
        const RunRecord r = synthetic_run(s % 2 ? "random" : "mu_bald", s, rng);
        (s < 2 ? x : s < 4 ? y : z).push_back(r);
        all.push_back(r);
      }
      const auto ax = aggregate_runs(x), ay = aggregate_runs(y), az = aggregate_runs(z);
      const auto left = merge_summaries(merge_summaries(ax, ay), az);
      const auto right = merge_summaries(ax, merge_summaries(ay, az));
      const auto direct = aggregate_runs(all);
      REQUIRE(left.size() == direct.size());
      REQUIRE(right.size() == direct.size());
      for (std::size_t i = 0; i < direct.size(); ++i) {
        CHECK(left[i].key == direct[i].key);
        CHECK(right[i].key == direct[i].key);
        CHECK(left[i].moments.count == direct[i].moments.count);
        CHECK(left[i].moments.mean == doctest::Approx(right[i].moments.mean).epsilon(1e-12));
        CHECK(left[i].moments.mean == doctest::Approx(direct[i].moments.mean).epsilon(1e-12));
        CHECK(left[i].moments.m2 == doctest::Approx(direct[i].moments.m2).epsilon(1e-9).scale(1e-12));
      }
    }
  }

  TEST_CASE("batch selection returns distinct valid positions") {
    for (int c = 0; c < kCases; ++c) {
      Rng rng(5000 + c);
      const Index n = 1 + c % 30;
      const Index nb = std::min<Index>(n, 1 + c % 7);
      const ScoreVector s = random_acq(n, rng);
      for (double temp : {0.0, 0.01, 1.0, 100.0}) {
        const auto pick = select_batch(s, nb, temp, rng);
        CHECK(static_cast<Index>(pick.size()) == nb);
        const std::set<Index> uniq(pick.begin(), pick.end());
        CHECK(uniq.size() == pick.size());
        for (Index p : pick) CHECK((p >= 0 && p < n));
      }
      // greedy takes the largest scores
      const auto greedy = select_batch(s, nb, 0.0, rng);
      std::vector<double> sorted(s.data(), s.data() + n);
      std::sort(sorted.rbegin(), sorted.rend());
      for (Index p : greedy) CHECK(s(p) >= sorted[nb - 1]);
    }
  }

  TEST_CASE("batch selection is uniform at high temperature") {
    const Index n = 10;
    const ScoreVector s = ScoreVector::LinSpaced(n, 0.0, 1.0);
    for (int c = 0; c < kCases; ++c) {
      Rng rng(6000 + c);
      std::vector<int> counts(n, 0);
      const int draws = 2000;
      for (int i = 0; i < draws; ++i) ++counts[select_batch(s, 1, 1e6, rng)[0]];
      double chi2 = 0.0;
      const double expect = static_cast<double>(draws) / n;
      for (int k : counts) chi2 += (k - expect) * (k - expect) / expect;
      // 9 degrees of freedom, upper 0.1% point
      CHECK(chi2 < 27.88);
    }
  }

  TEST_CASE("datasets are internally consistent") {
    for (int c = 0; c < kCases; ++c) {
      Rng rng(7000 + c);
      const bool shift = c % 2;
      Dataset d;
      switch (c % 4) {
        case 0: d = gen_causalbald(30, shift, rng); break;
        case 1: d = gen_hahn(30, shift ? HahnPrognostic::linear : HahnPrognostic::nonlinear, shift, rng); break;
        case 2: {
          const CovariateTable cov = surrogate_covariates(CovariateSchema::ihdp, 30, rng);
          d = gen_ihdp_outcomes(cov.x, cov.t, shift, rng);
          break;
        }
        default: {
          const CovariateTable cov = surrogate_covariates(CovariateSchema::actg, 30, rng);
          d = gen_actg_outcomes(cov.x, cov.t, rng);
        }
      }
      CHECK_NOTHROW(d.validate());
      CHECK((d.tau_true - (d.mu1 - d.mu0)).cwiseAbs().maxCoeff() < 1e-12);
      for (Index i = 0; i < d.size(); ++i) CHECK((d.t(i) == 0 || d.t(i) == 1));
      CHECK(d.y.allFinite());

      Rng quiet(7000 + c);
      Dataset q;
      switch (c % 4) {
        case 0: q = gen_causalbald(30, shift, quiet, {true}); break;
        case 1: q = gen_hahn(30, shift ? HahnPrognostic::linear : HahnPrognostic::nonlinear, shift, quiet, {true}); break;
        case 2: {
          const CovariateTable cov = surrogate_covariates(CovariateSchema::ihdp, 30, quiet);
          q = gen_ihdp_outcomes(cov.x, cov.t, shift, quiet, {true});
          break;
        }
        default: {
          const CovariateTable cov = surrogate_covariates(CovariateSchema::actg, 30, quiet);
          q = gen_actg_outcomes(cov.x, cov.t, quiet, {true});
        }
      }
      CHECK(q.x == d.x);
      for (Index i = 0; i < q.size(); ++i) CHECK(q.y(i) == (q.t(i) ? q.mu1(i) : q.mu0(i)));
    }
  }

  TEST_CASE("joint beliefs are positive semidefinite") {
    for (int c = 0; c < kCases; ++c) {
      const GpPosterior gp = random_gp(8000 + c);
      Rng rng(c);
      std::normal_distribution<double> z;
      const Vector cx = Vector::NullaryExpr(gp.dim(), [&] { return z(rng); });
      const Matrix targets = Matrix::NullaryExpr(4, gp.dim(), [&] { return z(rng); });
      const JointGaussianBelief b = candidate_target_belief(gp, cx, c % 2, targets);
      CHECK_NOTHROW(b.validate());
      CHECK(psd(b.cov));
      CHECK(psd(joint_belief(gp, cx, c % 2, targets.row(0).transpose()).cov));
      const Candidate cand{cx, c % 2};
      CHECK(causal_epig_tau(gp, cand, targets) >= 0.0);
      CHECK(causal_epig_mu(gp, cand, targets) >= causal_epig_tau(gp, cand, targets) - 1e-9);
      CHECK(mu_bald(gp, cand) >= 0.0);
      CHECK(tau_bald(gp, cand) >= 0.0);
    }
  }

  TEST_CASE("ensemble beliefs are positive semidefinite") {
    for (int c = 0; c < kCases; ++c) {
      Rng rng(9000 + c);
      const Dataset d = gen_causalbald(12, false, rng);
      const auto model = fit_ensemble(LabeledData{d.x, d.t, d.y}, 5 + c % 10, 1e-2, c);
      const Matrix targets = d.x.topRows(3);
      CHECK(psd(candidate_target_belief(model, d.x.row(5).transpose(), d.t(5), targets).cov));
    }
  }

  TEST_CASE("a larger budget extends the same run") {
    for (int c = 0; c < kCases; ++c) {
      Rng rng(10000 + c);
      const Dataset pool = gen_causalbald(30, false, rng);
      const Dataset test = gen_causalbald(10, false, rng);
      const FactualOracle oracle(pool.x, pool.t, pool.y);
      const GroundTruthOracle pt(pool.x, pool.mu0, pool.mu1, pool.tau_true);
      const GroundTruthOracle tt(test.x, test.mu0, test.mu1, test.tau_true);
      const Evaluator eval = [&](const CateModel& m) { return evaluate_model(m, pt, tt); };
      LoopConfig cfg;
      cfg.n_init = 4;
      cfg.batch_size = 1 + c % 3;
      cfg.estimator.kind = EstimatorKind::ensemble;
      cfg.estimator.members = 6;
      cfg.method = c % 2 ? AcquisitionMethod::random : AcquisitionMethod::mu_bald;
      cfg.seed = c;
      cfg.budget = 4 + 2 * cfg.batch_size;
      const RunRecord small = run_active_learning(cfg, oracle, test.x, test.t, eval);
      cfg.budget = 4 + 4 * cfg.batch_size;
      const RunRecord large = run_active_learning(cfg, oracle, test.x, test.t, eval);
      REQUIRE(large.steps.size() >= small.steps.size());
      for (std::size_t k = 0; k < small.steps.size(); ++k) {
        CHECK(large.steps[k].n_labeled == small.steps[k].n_labeled);
        CHECK(large.steps[k].sqrt_pehe_pool == small.steps[k].sqrt_pehe_pool);
      }
      for (std::size_t k = 1; k < large.steps.size(); ++k)
        CHECK(large.steps[k].n_labeled > large.steps[k - 1].n_labeled);
      CHECK(large.steps.back().n_labeled == cfg.budget);
    }
  }
}
