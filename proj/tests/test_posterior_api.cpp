#include "activecate/cate_model.hpp"
#include "activecate/ensemble.hpp"
#include "activecate/gp.hpp"
#include "activecate/propensity.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace activecate;

namespace {

LabeledData make_data(Index n, Index d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  LabeledData data;
  data.x.resize(n, d);
  data.t.resize(n);
  data.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) data.x(i, j) = n01(rng);
    data.t(i) = coin(rng) ? 1 : 0;
    data.y(i) = data.x(i, 0) + data.t(i) * (2.0 - data.x(i, 0)) + 0.2 * n01(rng);
  }
  return data;
}

GpHyperparameters hyper(GpKind kind, Index d) {
  GpHyperparameters h;
  h.kind = kind;
  h.base = KernelConfig::isotropic(KernelFamily::rbf, d, 1.2, 1.0);
  h.arm = KernelConfig::isotropic(KernelFamily::rbf, d, 0.9, 0.7);
  h.coregionalization.task_covariance << 1.3, 0.7, 0.7, 1.1;
  h.noise_variance = 0.1;
  return h;
}

}  // namespace

TEST_SUITE("posterior_api") {
  TEST_CASE("belief labels and marginals") {
    JointGaussianBelief b;
    b.labels = {"a", "b", "c"};
    b.mean = Vector::LinSpaced(3, 1.0, 3.0);
    b.cov = Matrix::Identity(3, 3);
    b.cov(0, 2) = b.cov(2, 0) = 0.4;
    CHECK(b.index_of("c") == 2);
    CHECK_THROWS_AS(b.index_of("d"), InputError);
    const JointGaussianBelief m = b.marginal({"c", "a"});
    CHECK(m.mean(0) == 3.0);
    CHECK(m.cov(0, 1) == doctest::Approx(0.4));
    CHECK_NOTHROW(b.validate());
    b.cov(0, 1) = 0.3;
    CHECK_THROWS_AS(b.validate(), InputError);
    b.cov(0, 1) = 0.0;
    b.cov(1, 1) = -0.1;
    CHECK_THROWS_AS(b.validate(), InputError);
  }

  TEST_CASE("joint belief for a GP matches direct conditioning") {
    const LabeledData d = make_data(6, 1, 3);
    for (GpKind kind : {GpKind::cmgp, GpKind::nsgp}) {
      const GpHyperparameters h = hyper(kind, 1);
      const GpPosterior post = GpPosterior::fit(d, h);
      const Vector xc = Vector::Constant(1, 0.4), xt = Vector::Constant(1, -0.8);
      const JointGaussianBelief b = joint_belief(post, xc, 1, xt);
      CHECK(b.labels == std::vector<std::string>{"y", "f0@0", "f1@0"});

      const LatentPoints train{d.x, d.t};
      LatentPoints q;
      q.x.resize(3, 1);
      q.x << 0.4, -0.8, -0.8;
      q.t.resize(3);
      q.t << 1, 0, 1;
      Matrix ktt = gp_prior_cov(h, train, train);
      ktt.diagonal().array() += h.noise_variance;
      const Matrix ktq = gp_prior_cov(h, train, q);
      Matrix expect = gp_prior_cov(h, q, q) - ktq.transpose() * ktt.inverse() * ktq;
      expect(0, 0) += h.noise_variance;
      const Vector yc = d.y.array() - d.y.mean();
      const Vector mean_expect = (ktq.transpose() * ktt.inverse() * yc).array() + d.y.mean();
      CHECK((b.cov - expect).cwiseAbs().maxCoeff() < 1e-7);
      CHECK((b.mean - mean_expect).cwiseAbs().maxCoeff() < 1e-7);
    }
  }

  TEST_CASE("candidate-target belief is a linear map of the latent posterior") {
    const LabeledData d = make_data(20, 2, 9);
    const GpPosterior post = GpPosterior::fit(d, hyper(GpKind::cmgp, 2));
    const Matrix targets = make_data(4, 2, 10).x;
    const Vector xc = make_data(1, 2, 11).x.row(0).transpose();
    const JointGaussianBelief b = candidate_target_belief(post, xc, 0, targets);
    CHECK(b.size() == 13);
    CHECK_NOTHROW(b.validate());
    const Vector tau_var = post.cate_var(targets);
    const Vector tau_mean = post.cate_mean(targets);
    for (Index j = 0; j < 4; ++j) {
      const Index f0 = b.index_of(label::f0(j)), f1 = b.index_of(label::f1(j)), tau = b.index_of(label::tau(j));
      CHECK(b.mean(tau) == doctest::Approx(b.mean(f1) - b.mean(f0)).epsilon(1e-10));
      CHECK(b.cov(tau, tau) == doctest::Approx(tau_var(j)).epsilon(1e-8));
      CHECK(b.mean(tau) == doctest::Approx(tau_mean(j)).epsilon(1e-10));
      CHECK(b.cov(tau, 0) == doctest::Approx(b.cov(f1, 0) - b.cov(f0, 0)).epsilon(1e-9));
    }
    const JointGaussianBelief small = joint_belief(post, xc, 0, Vector(targets.row(2).transpose()));
    const auto sub = b.marginal({"y", label::f0(2), label::f1(2)});
    CHECK((sub.cov - small.cov).cwiseAbs().maxCoeff() < 1e-10);
    CHECK_THROWS_AS(candidate_target_belief(post, xc, 2, targets), InputError);
  }

  TEST_CASE("empirical Gaussian fit") {
    SamplePosterior s{{"a", "b"}, Matrix(2, 2)};
    s.draws << 1.0, 2.0, 3.0, 6.0;
    const JointGaussianBelief b = empirical_gaussian_fit(s);
    CHECK(b.mean(0) == doctest::Approx(2.0));
    CHECK(b.mean(1) == doctest::Approx(4.0));
    CHECK(b.cov(0, 0) == doctest::Approx(2.0));
    CHECK(b.cov(1, 1) == doctest::Approx(8.0));
    CHECK(b.cov(0, 1) == doctest::Approx(4.0));
    SamplePosterior one{{"a"}, Matrix::Ones(1, 1)};
    CHECK_THROWS_AS(empirical_gaussian_fit(one), InputError);
    s.draws(1, 1) = std::nan("");
    CHECK_THROWS_AS(empirical_gaussian_fit(s), InputError);
  }

  TEST_CASE("ensemble draws define its moments") {
    const LabeledData d = make_data(60, 2, 21);
    const EnsembleLinearModel m = fit_ensemble(d, 30, 1e-2, 5);
    CHECK(m.members() == 30);
    const Matrix targets = make_data(5, 2, 22).x;
    const Vector xc = targets.row(0).transpose();
    const SamplePosterior s = posterior_draws(m, xc, 1, targets);
    CHECK(s.n_draws() == 30);
    for (Index j = 0; j < 5; ++j)
      CHECK((s.draws.col(3 + 3 * j) - (s.draws.col(2 + 3 * j) - s.draws.col(1 + 3 * j))).norm() < 1e-12);
    const JointGaussianBelief b = sample_belief(m, xc, 1, targets);
    const JointGaussianBelief raw = empirical_gaussian_fit(s);
    CHECK(b.cov(0, 0) == doctest::Approx(raw.cov(0, 0) + m.noise_variance()));
    CHECK(b.cov(1, 1) == doctest::Approx(raw.cov(1, 1)));
    const Vector var = m.cate_var(targets);
    for (Index j = 0; j < 5; ++j) CHECK(b.cov(3 + 3 * j, 3 + 3 * j) == doctest::Approx(var(j)).epsilon(1e-9));
    const EnsembleLinearModel again = fit_ensemble(d, 30, 1e-2, 5);
    CHECK(again.mu_weights() == m.mu_weights());
    CHECK(again.tau_weights() == m.tau_weights());
    // the generating CATE is 2 - x1
    CHECK(m.tau_weights().colwise().mean()(0) == doctest::Approx(2.0).epsilon(0.15));
    CHECK(m.tau_weights().colwise().mean()(1) == doctest::Approx(-1.0).epsilon(0.15));
    CHECK_THROWS_AS(fit_ensemble(d, 1, 1e-2, 5), InputError);
  }

  TEST_CASE("propensity recovers logistic weights") {
    Rng rng(7);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Index n = 4000;
    Matrix x(n, 2);
    IndexVector t(n);
    for (Index i = 0; i < n; ++i) {
      x(i, 0) = n01(rng);
      x(i, 1) = n01(rng);
      const double p = 1.0 / (1.0 + std::exp(-(0.3 + 1.0 * x(i, 0) - 0.5 * x(i, 1))));
      t(i) = u(rng) < p ? 1 : 0;
    }
    const PropensityModel m = fit_propensity(x, t);
    CHECK(m.weights()(0) == doctest::Approx(0.3).epsilon(0.4));
    CHECK(m.weights()(1) == doctest::Approx(1.0).epsilon(0.15));
    CHECK(m.weights()(2) == doctest::Approx(-0.5).epsilon(0.2));
    const Vector far = Vector::Constant(2, 100.0);
    CHECK(m.predict(Vector(Vector::Constant(2, -100.0).cwiseProduct(Vector::Constant(2, 1.0)))) >= 0.01);
    CHECK(m.predict(Vector((Vector(2) << 100.0, -100.0).finished())) == doctest::Approx(0.99));
    CHECK_THROWS_AS(PropensityModel().predict(far), InputError);
    CHECK_THROWS_AS(fit_propensity(x, t, 0.0), InputError);
  }
}
