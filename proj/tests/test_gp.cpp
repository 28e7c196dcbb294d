#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "oracles.hpp"
#include "roa/errors.hpp"
#include "roa/gp.hpp"

using namespace roa;

namespace {

Eigen::MatrixXd random_points(std::mt19937_64& rng, int dim, int n, double spread = 2.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  Eigen::MatrixXd pts(dim, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < dim; ++i) pts(i, j) = u(rng);
  }
  return pts;
}

Eigen::VectorXd random_values(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

}  // namespace

TEST_CASE("kernel properties") {
  const Kernel se = Kernel::squared_exponential(1.0);
  const Eigen::Vector2d a(0.3, -1.0), b(1.1, 0.4);
  CHECK(se(a, a) == 1.0);
  CHECK(se(a, b) == se(b, a));
  CHECK(se(a, b) == doctest::Approx(oracle::se_kernel(a, b)));
  CHECK(se(a, b) > 0.0);
  CHECK(se(a, b) <= 1.0);
  const Kernel se2 = Kernel::squared_exponential(2.0);
  CHECK(se2(a, b) == doctest::Approx(oracle::se_kernel(a, b, 2.0)));
  const Kernel lin = Kernel::linear();
  CHECK(lin(a, b) == doctest::Approx(a.dot(b)));
  CHECK_THROWS_AS(Kernel::squared_exponential(0.0), ConfigError);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd pts = random_points(rng, 3, 25);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(se.gram(pts), Eigen::EigenvaluesOnly);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  }
  CHECK(Kernel::from_json(se2.to_json()).length_scale() == 2.0);
  CHECK(Kernel::from_json(lin.to_json()).kind() == Kernel::Kind::Linear);
}

TEST_CASE("posterior closed forms") {
  const Kernel se = Kernel::squared_exponential();
  SUBCASE("prior") {
    const GpModel empty(se, 0.1, 2);
    const Posterior p = empty.posterior(Eigen::Vector2d(4.0, -1.0));
    CHECK(p.mean == 0.0);
    CHECK(p.variance == 1.0);
  }
  SUBCASE("single observation at the query") {
    for (double sigma : {0.01, 0.1, 1.0}) {
      const Eigen::Vector2d x1(0.5, 0.2);
      const double v1 = 3.0;
      const GpModel m = GpModel(se, sigma, 2).add_observation(x1, v1);
      const Posterior p = m.posterior(x1);
      const double s2 = sigma * sigma;
      CHECK(p.mean == doctest::Approx(v1 / (1.0 + s2)).epsilon(1e-12));
      CHECK(p.variance == doctest::Approx(1.0 - 1.0 / (1.0 + s2)).epsilon(1e-9));
    }
  }
  SUBCASE("duplicate input lowers the variance further") {
    const Eigen::Vector2d x(0.0, 1.0);
    const double sigma = 0.5, s2 = 0.25;
    const GpModel one = GpModel(se, sigma, 2).add_observation(x, 1.0);
    const GpModel two = one.add_observation(x, 1.2);
    // 2x2 by hand: K + s2 I = [[1+s2, 1], [1, 1+s2]], k = (1, 1).
    const double det = (1.0 + s2) * (1.0 + s2) - 1.0;
    const double quad = 2.0 * ((1.0 + s2) - 1.0) / det;
    CHECK(two.posterior(x).variance == doctest::Approx(1.0 - quad).epsilon(1e-10));
    CHECK(two.posterior(x).variance < one.posterior(x).variance);
  }
  SUBCASE("non-finite observations are rejected") {
    const GpModel m(se, 0.1, 1);
    CHECK_THROWS_AS(m.add_observation(Eigen::VectorXd::Zero(1), std::nan("")), ConfigError);
    CHECK_THROWS_AS(m.add_observation(Eigen::VectorXd::Zero(1), INFINITY), ConfigError);
    CHECK_THROWS_AS(m.add_observation(Eigen::VectorXd::Zero(2), 1.0), DimensionError);
  }
  SUBCASE("interpolation as the noise vanishes") {
    std::mt19937_64 rng(11);
    const Eigen::MatrixXd pts = random_points(rng, 2, 8, 3.0);
    const Eigen::VectorXd y = random_values(rng, 8);
    const GpModel m = GpModel::fit(se, 1e-6, pts, y);
    for (int i = 0; i < 8; ++i) CHECK(std::abs(m.posterior(pts.col(i)).mean - y[i]) <= 1e-3);
  }
}

TEST_CASE("factorized posterior equals the dense-inverse oracle") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(1, 20);
  const double sigmas[] = {0.01, 0.1, 1.0};
  for (int trial = 0; trial < 50; ++trial) {
    const int n = size(rng);
    const double sigma = sigmas[trial % 3];
    const Eigen::MatrixXd pts = random_points(rng, 2, n);
    const Eigen::VectorXd y = random_values(rng, n);
    const GpModel fitted = GpModel::fit(Kernel::squared_exponential(), sigma, pts, y);
    GpModel grown(Kernel::squared_exponential(), sigma, 2);
    for (int i = 0; i < n; ++i) grown = grown.add_observation(pts.col(i), y[i]);
    REQUIRE(fitted.jitter() == 0.0);
    for (int q = 0; q < 5; ++q) {
      const Eigen::VectorXd x = random_points(rng, 2, 1).col(0);
      const auto truth = oracle::dense_posterior(pts, y, sigma, x);
      const Posterior a = fitted.posterior(x);
      const Posterior b = grown.posterior(x);
      CHECK(std::abs(a.mean - truth.mean) <= 1e-10);
      CHECK(std::abs(a.variance - std::max(truth.variance, 0.0)) <= 1e-10);
      // Rank-one growth agrees with refactorization.
      CHECK(std::abs(b.mean - a.mean) <= 1e-9);
      CHECK(std::abs(b.variance - a.variance) <= 1e-9);
    }
    // The stored factor reproduces K + sigma^2 I.
    Eigen::MatrixXd k = fitted.gram();
    k.diagonal().array() += sigma * sigma;
    const Eigen::MatrixXd& l = fitted.cholesky_factor();
    CHECK((l * l.transpose() - k).norm() <= 1e-8 * k.norm());
  }
}

TEST_CASE("jitter rescues a singular Gram matrix with tiny noise") {
  Eigen::MatrixXd pts(1, 3);
  pts << 0.0, 0.0, 1e-9;
  const GpModel m = GpModel::fit(Kernel::squared_exponential(), 1e-12, pts, Eigen::Vector3d(1.0, 1.0, 1.0));
  CHECK(m.jitter() > 0.0);
  CHECK(m.jitter() <= 1e-6);
  CHECK(std::isfinite(m.posterior(Eigen::VectorXd::Zero(1)).mean));
}

TEST_CASE("variance never increases when observations are added") {
  std::mt19937_64 rng(99);
  const Eigen::MatrixXd probes = random_points(rng, 2, 10);
  GpModel m(Kernel::squared_exponential(), 0.1, 2);
  Eigen::VectorXd previous(10);
  for (int i = 0; i < 10; ++i) previous[i] = m.posterior(probes.col(i)).variance;
  for (int step = 0; step < 200; ++step) {
    m = m.add_observation(random_points(rng, 2, 1).col(0), random_values(rng, 1)[0]);
    for (int i = 0; i < 10; ++i) {
      const double v = m.posterior(probes.col(i)).variance;
      CHECK(v <= previous[i] + 1e-9);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-10);
      previous[i] = v;
    }
  }
}

TEST_CASE("prefix models") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd pts = random_points(rng, 2, 6);
  const Eigen::VectorXd y = random_values(rng, 6);
  const GpModel full = GpModel::fit(Kernel::squared_exponential(), 0.1, pts, y);
  const GpModel head = full.prefix(4);
  const GpModel direct = GpModel::fit(Kernel::squared_exponential(), 0.1, pts.leftCols(4), y.head(4));
  CHECK(head.size() == 4);
  const Eigen::Vector2d x(0.1, 0.2);
  CHECK(head.posterior(x).mean == doctest::Approx(direct.posterior(x).mean));
  CHECK(full.prefix(0).size() == 0);
  CHECK_THROWS_AS(full.prefix(7), IndexError);
}

TEST_CASE("RKHS norm via kernel ridge regression") {
  const Kernel se = Kernel::squared_exponential();
  SUBCASE("single point") {
    for (double theta : {0.01, 0.1, 1.0}) {
      const GpModel m = GpModel(se, 0.1, 1).add_observation(Eigen::VectorXd::Zero(1), 2.0);
      CHECK(rkhs_norm_sq(m, theta) == doctest::Approx(4.0 / ((1.0 + theta) * (1.0 + theta))));
    }
  }
  SUBCASE("zero observations") {
    std::mt19937_64 rng(1);
    const GpModel m = GpModel::fit(se, 0.1, random_points(rng, 2, 5), Eigen::VectorXd::Zero(5));
    CHECK(rkhs_norm_sq(m, 0.1) == 0.0);
  }
  SUBCASE("eigen and solve paths agree; larger theta is smoother") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
      const GpModel m = GpModel::fit(se, 0.1, random_points(rng, 2, 15), random_values(rng, 15));
      double previous = INFINITY;
      for (double theta : {0.01, 0.1, 1.0}) {
        const double eig = rkhs_norm_sq(m, theta);
        const double sol = rkhs_norm_sq_solve(m, theta);
        CHECK(std::abs(eig - sol) <= 1e-8 * std::max(1.0, std::abs(sol)));
        CHECK(eig < previous);
        previous = eig;
      }
    }
  }
  SUBCASE("theta must be positive") {
    const GpModel m = GpModel(se, 0.1, 1).add_observation(Eigen::VectorXd::Zero(1), 2.0);
    CHECK_THROWS_AS(rkhs_norm_sq(m, 0.0), ConfigError);
  }
}

TEST_CASE("information gain and its bound") {
  const GpModel one = GpModel(Kernel::squared_exponential(), 1.0, 1).add_observation(Eigen::VectorXd::Zero(1), 0.0);
  CHECK(info_gain(one) == doctest::Approx(0.5 * std::log(2.0)));
  CHECK(info_gain(one) == doctest::Approx(0.3466).epsilon(1e-4));
  CHECK(info_gain(Eigen::MatrixXd::Zero(4, 4), 0.3) == 0.0);
  // Determinant form as an independent check.
  std::mt19937_64 rng(4);
  const GpModel m = GpModel::fit(Kernel::squared_exponential(), 0.5, random_points(rng, 2, 12), random_values(rng, 12));
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(12, 12) + m.gram() / 0.25;
  CHECK(info_gain(m) == doctest::Approx(0.5 * std::log(a.determinant())).epsilon(1e-10));

  CHECK(gamma_bound(100, 1.0) == 50.0);
  CHECK(gamma_bound(1, 0.1) == doctest::Approx(50.0));
  std::uniform_int_distribution<int> size(1, 100);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = size(rng);
    const GpModel g = GpModel::fit(Kernel::squared_exponential(), 1.0, random_points(rng, 3, n, 1.0 + trial * 0.1),
                                   random_values(rng, n));
    CHECK(info_gain(g) <= gamma_bound(n, 1.0));
  }
}

TEST_CASE("beta and its schedules") {
  CHECK(beta(10, 0.05, 0.0, 0.0) == 0.0);
  CHECK(beta(1, std::exp(-1.0), 1.0, 1.0) == doctest::Approx(302.0));
  double previous = 0.0;
  for (int n = 1; n <= 200; ++n) {
    const double b = beta(n, 0.05, 3.0, 2.0);
    CHECK(b >= previous);
    previous = b;
  }
  BetaSchedule fixed;
  CHECK(fixed.mode == BetaSchedule::Mode::Fixed);
  CHECK(fixed.evaluate(50, 0.05, 10.0, 0.1) == 4.0);
  BetaSchedule theo{BetaSchedule::Mode::Theoretical, 0.0};
  CHECK(theo.evaluate(50, 0.05, 10.0, 0.1) == doctest::Approx(beta(50, 0.05, 10.0, gamma_bound(50, 0.1))));
  BetaSchedule scaled{BetaSchedule::Mode::Scaled, 1e-3};
  CHECK(scaled.evaluate(50, 0.05, 10.0, 0.1) ==
        doctest::Approx(1e-3 * beta(50, 0.05, 10.0, gamma_bound(50, 0.1))));
  CHECK(BetaSchedule::from_json(scaled.to_json()).value == 1e-3);
  CHECK_THROWS_AS(BetaSchedule::from_json({{"mode", "wild"}}), ConfigError);
}

TEST_CASE("checkpoint round trip refits the same posterior") {
  std::mt19937_64 rng(21);
  const GpModel m = GpModel::fit(Kernel::squared_exponential(1.5), 0.2, random_points(rng, 2, 7), random_values(rng, 7));
  CheckpointMeta meta;
  meta.theta = 0.3;
  meta.beta = {BetaSchedule::Mode::Scaled, 0.01};
  CheckpointMeta back;
  const GpModel loaded = model_from_json(nlohmann::json::parse(model_to_json(m, meta).dump()), &back);
  CHECK(back.theta == 0.3);
  CHECK(back.beta.mode == BetaSchedule::Mode::Scaled);
  CHECK(loaded.size() == 7);
  const Eigen::Vector2d x(0.4, -0.9);
  CHECK(loaded.posterior(x).mean == m.posterior(x).mean);
  CHECK(loaded.posterior(x).variance == m.posterior(x).variance);
  CHECK_THROWS_AS(model_from_json(nlohmann::json::parse("{\"kernel\": 3}")), ParseError);
}

TEST_CASE("RKHS bound used by beta switches after refresh_min points") {
  CheckpointMeta meta;
  meta.rkhs_refresh_min = 3;
  meta.rkhs_prior_bound = 7.0;
  std::mt19937_64 rng(2);
  const GpModel m = GpModel::fit(Kernel::squared_exponential(), 0.1, random_points(rng, 2, 4), random_values(rng, 4));
  CHECK(rkhs_bound_for(m.prefix(2), meta) == 7.0);
  CHECK(rkhs_bound_for(m, meta) == doctest::Approx(rkhs_norm_sq(m, meta.theta)));
}
