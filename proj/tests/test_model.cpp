#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "asvgp/model.hpp"
#include "instances.hpp"

using namespace asvgp;
using instances::rel;

namespace {

struct Case {
  Structure structure;
  Family family;
  std::vector<std::size_t> m;
};

const std::vector<Case> kCases = {
    {Structure::one_d, Family::matern12, {24}},
    {Structure::one_d, Family::matern32, {32}},
    {Structure::separable_2d, Family::matern32, {6, 7}},
    {Structure::additive, Family::matern32, {8, 6, 7}},
    {Structure::additive, Family::matern12, {5, 9, 6}},
};

}  // namespace

TEST_CASE("banded bound, moments and predictions match the dense oracle", "[model]") {
  std::mt19937_64 rng(314);
  for (const auto& c : kCases) {
    for (int rep = 0; rep < 3; ++rep) {
      const auto in = instances::make(c.structure, c.family, c.m, 150 + 50 * rep, rng);
      const auto d = instances::dense(in);
      const double kappa = in.kernel.prior_variance();

      std::vector<double> q;
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (int p = 0; p < 20; ++p)
        for (std::size_t dd = 0; dd < in.dims; ++dd) q.push_back(u(rng) * static_cast<double>(c.m[dd]));
      const oracle::Matrix kuq = oracle::dense_features(in.kernel.layout, in.knots, q, in.dims);
      const auto ref = oracle::dense_sgpr(d.kuu, d.kuf, d.y, in.hyper.noise(), kappa, kuq);

      INFO("structure " << to_string(c.structure) << " family " << to_string(c.family));
      const double elbo = collapsed_elbo(in.features, in.stats, in.hyper);
      CHECK(rel(elbo, ref.elbo) < 1e-8);

      const FitResult fit = finalize(in.features, in.stats, in.hyper);
      CHECK(fit.jitter == 0.0);
      const auto m = fit.optimal_mean();
      double merr = 0.0;
      for (std::size_t i = 0; i < m.size(); ++i) merr = std::max(merr, std::abs(m[i] - ref.opt_mean(i)));
      CHECK(merr < 1e-8 * ref.opt_mean.cwiseAbs().maxCoeff());

      const Predictions p = predict(fit, q);
      for (std::size_t i = 0; i < p.mean.size(); ++i) {
        CHECK(std::abs(p.mean[i] - ref.mean(i)) < 1e-8 * std::max(1.0, std::abs(ref.mean(i))));
        CHECK(rel(p.variance[i], ref.variance(i)) < 1e-8);
        CHECK(p.variance[i] > 0.0);
        CHECK(p.variance[i] <= kappa + 1e-10);
      }
      const auto inv = check_invariants(fit);
      CHECK(inv.reconstruction_error < 1e-10);
      CHECK(inv.residual < 1e-8);
    }
  }
}

TEST_CASE("literal and Woodbury oracle bounds agree", "[model][oracle]") {
  std::mt19937_64 rng(8);
  const auto in = instances::make(Structure::one_d, Family::matern32, {20}, 300, rng);
  const auto d = instances::dense(in);
  const double kappa = in.kernel.prior_variance();
  const auto a = oracle::dense_sgpr(d.kuu, d.kuf, d.y, in.hyper.noise(), kappa);
  const auto b = oracle::dense_sgpr(d.kuu, d.kuf, d.y, in.hyper.noise(), kappa, {}, true);
  CHECK(rel(a.elbo, b.elbo) < 1e-10);
}

TEST_CASE("bound never exceeds the exact log marginal likelihood", "[model]") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 20; ++rep) {
    const Family fam = rep % 2 ? Family::matern12 : Family::matern32;
    const auto in = instances::make(Structure::one_d, fam, {16}, 200, rng);
    const double elbo = collapsed_elbo(in.features, in.stats, in.hyper);
    const auto gp = oracle::exact_gp(in.kernel, in.x, Eigen::Map<const oracle::Vector>(in.y.data(), in.y.size()), 1);
    CHECK(elbo <= gp.log_marginal + 1e-8);
  }
}

TEST_CASE("empty data gives a zero bound and the prior", "[model]") {
  const Features f(FeatureSpace::one_d(make_uniform_basis(0.0, 10.0, 10, 2)), Family::matern32);
  const Stats s = Stats::zeros(f.space);
  const auto h = MaternHyper::one_d(Family::matern32, 2.0, 1.5, 0.1);
  CHECK(collapsed_elbo(f, s, h) == Catch::Approx(0.0).margin(1e-12));
  const FitResult fit = finalize(f, s, h);
  for (double v : fit.vhat) CHECK(v == 0.0);
  const std::vector<double> far{-5.0, 20.0};
  const Predictions p = predict(fit, far);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(p.mean[i] == 0.0);
    CHECK(p.variance[i] == Catch::Approx(1.5).epsilon(1e-15));
  }
}

TEST_CASE("queries outside the domain revert to the prior", "[model]") {
  std::mt19937_64 rng(1);
  const auto in = instances::make(Structure::one_d, Family::matern12, {12}, 100, rng);
  const FitResult fit = finalize(in.features, in.stats, in.hyper);
  const std::vector<double> q{-1.0, 12.5, 1e6};
  const Predictions p = predict(fit, q);
  for (std::size_t i = 0; i < q.size(); ++i) {
    CHECK(p.mean[i] == 0.0);
    CHECK(p.variance[i] == in.hyper.prior_variance());
  }
  CHECK_THROWS_AS(predict(fit, std::vector<double>{NAN}), InvalidData);
}

TEST_CASE("refining the basis never lowers the bound", "[model]") {
  // Dyadic refinement of linear splines on [0, 1]: the coarse space is contained in the fine one.
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;
  std::vector<double> x(300), y(300);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = u(rng);
    y[i] = std::sin(6.0 * x[i]) + 0.2 * g(rng);
  }
  for (Family fam : {Family::matern12, Family::matern32}) {
    const int k = spline_order(fam);
    double prev = -1e300;
    for (std::size_t intervals : {4, 8, 16, 32, 64}) {
      const Features f(FeatureSpace::one_d(make_uniform_basis(0.0, 1.0, intervals + k, k)), fam);
      const Stats s = precompute(f.space, DataView{x, 1, y});
      const double l = collapsed_elbo(f, s, MaternHyper::one_d(fam, 0.2, 1.0, 0.05));
      CHECK(l >= prev - 1e-8);
      prev = l;
    }
  }
}

TEST_CASE("metrics", "[model]") {
  const std::vector<double> y{1.0, 2.0, -3.0};
  const std::vector<double> v{0.1, 0.2, 0.3};
  CHECK(metrics(y, y, v, 0.1).mse == 0.0);
  const std::vector<double> zero{0.0};
  const std::vector<double> one{1.0};
  const Metrics m0 = metrics(zero, zero, std::vector<double>{1.0 - 1e-8}, 1e-8);
  CHECK(m0.nlpd == Catch::Approx(0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-12));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<double> yy(50), mu(50), var(50);
  for (std::size_t i = 0; i < 50; ++i) {
    yy[i] = g(rng);
    mu[i] = g(rng);
    var[i] = std::exp(g(rng));
  }
  double mse = 0.0, nlpd = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    const double s = var[i] + 0.3;
    mse += (yy[i] - mu[i]) * (yy[i] - mu[i]) / 50.0;
    nlpd -= std::log(std::exp(-(yy[i] - mu[i]) * (yy[i] - mu[i]) / (2 * s)) / std::sqrt(2 * std::numbers::pi * s)) / 50.0;
  }
  const Metrics m = metrics(yy, mu, var, 0.3);
  CHECK(m.mse == Catch::Approx(mse).epsilon(1e-13));
  CHECK(m.nlpd == Catch::Approx(nlpd).epsilon(1e-12));
  // tiny variances are clamped before the log
  CHECK(std::isfinite(metrics(one, zero, std::vector<double>{-1.0}, 0.0).nlpd));
}

TEST_CASE("hyperparameter validation", "[model]") {
  const Features f(FeatureSpace::one_d(make_uniform_basis(0.0, 10.0, 10, 2)), Family::matern32);
  const Stats s = Stats::zeros(f.space);
  CHECK_THROWS_AS(collapsed_elbo(f, s, MaternHyper::one_d(Family::matern12, 1.0, 1.0, 0.1)), InvalidConfiguration);
  MaternHyper h = MaternHyper::one_d(Family::matern32, 1.0, 1.0, 0.1);
  h.log_lengthscale.push_back(0.0);
  CHECK_THROWS_AS(collapsed_elbo(f, s, h), InvalidConfiguration);
  CHECK(MaternHyper::one_d(Family::matern32, 1.0, 1.0, 1e-20).noise() == kNoiseFloor);
  const Features other(FeatureSpace::one_d(make_uniform_basis(0.0, 10.0, 11, 2)), Family::matern32);
  CHECK_THROWS_AS(collapsed_elbo(other, s, MaternHyper::one_d(Family::matern32, 1.0, 1.0, 0.1)), DimensionMismatch);
}
