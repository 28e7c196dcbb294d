#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "roa/dynamics.hpp"
#include "roa/errors.hpp"
#include "roa/integrator.hpp"
#include "roa/lyapunov.hpp"

using namespace roa;

namespace {

LinearSystem scalar_decay() { return LinearSystem(Eigen::MatrixXd::Constant(1, 1, -1.0)); }

SimConfig scalar_cfg() { return SimConfig{0.01, 20.0, 0.01, 1e6}; }

}  // namespace

TEST_CASE("alpha_square and its derivatives") {
  const auto zero = alpha_square(0.0);
  CHECK(zero.value == 0.0);
  const auto a = alpha_square(1.5);
  CHECK(a.value == 2.25);
  CHECK(a.first == 3.0);
  CHECK(a.second == 2.0);
  CHECK(a.growth_exponent == 2.0);
  for (double z : {0.0, 0.3, 1.0, 7.5}) CHECK(alpha_square(z).value == std::pow(z, 2.0));
}

TEST_CASE("class-Gamma spot checks") {
  std::vector<double> grid;
  for (int i = 0; i <= 200; ++i) grid.push_back(0.05 * i);
  CHECK(check_gamma(square_gamma(), grid).empty());

  GammaFunction shifted = square_gamma();
  shifted.value = [](double z) { return z * z + 1.0; };
  CHECK_FALSE(check_gamma(shifted, grid).empty());

  GammaFunction too_fast = square_gamma();
  too_fast.value = [](double z) { return 2.0 * z * z; };
  CHECK_FALSE(check_gamma(too_fast, grid).empty());

  GammaFunction flat = square_gamma();
  flat.value = [](double z) { return std::min(z * z, 1.0); };
  CHECK_FALSE(check_gamma(flat, grid).empty());
}

TEST_CASE("estimate_v against closed forms") {
  const GammaFunction alpha = square_gamma();
  SUBCASE("origin trajectory") {
    const Trajectory t = simulate(build_smib(), State::Zero(2), SimConfig{});
    CHECK(estimate_v(t, alpha) == 0.0);
  }
  SUBCASE("scalar decay from 1") {
    const Trajectory t = simulate(scalar_decay(), State::Constant(1, 1.0), scalar_cfg());
    REQUIRE(t.converged);
    CHECK(std::abs(estimate_v(t, alpha) - 0.5) <= 1e-3);
  }
  SUBCASE("trapezoid, not the left-endpoint sum") {
    // Hand-built three-sample trajectory with norms 2, 1, 0.
    Trajectory t;
    t.states = Eigen::MatrixXd(1, 3);
    t.states << 2.0, 1.0, 0.0;
    t.dt = 0.5;
    t.planned_length = 3;
    t.converged = true;
    CHECK(estimate_v(t, alpha) == doctest::Approx(0.5 * (0.5 * 4.0 + 1.0 + 0.0)));
  }
  SUBCASE("non-convergent trajectory is rejected") {
    const Trajectory t = simulate(build_smib(), Eigen::Vector2d(10.0, 10.0), SimConfig{});
    CHECK_THROWS_AS(estimate_v(t, alpha), NotConvergedError);
  }
  SUBCASE("longer horizon never decreases V_hat") {
    const PowerSystem smib = build_smib();
    double previous = 0.0;
    for (double horizon : {20.0, 40.0, 100.0}) {
      const Trajectory t = simulate(smib, Eigen::Vector2d(0.8, -0.5), SimConfig{0.01, horizon, 1.0, 1e6});
      REQUIRE(t.converged);
      const double v = estimate_v(t, alpha);
      CHECK(v >= previous);
      previous = v;
    }
  }
  SUBCASE("self-convergence under step halving on the SMIB") {
    const PowerSystem smib = build_smib();
    auto v_at = [&](double dt) {
      return estimate_v(simulate(smib, Eigen::Vector2d(0.5, 0.3), SimConfig{dt, 100.0, 0.01, 1e6}),
                        alpha);
    };
    const double v1 = v_at(0.04), v2 = v_at(0.02), v3 = v_at(0.01);
    const double ratio = std::abs(v1 - v2) / std::abs(v2 - v3);
    // Second-order quadrature: successive differences shrink by about 4. The
    // start has nonzero speed so the leading endpoint correction is present.
    CHECK(ratio > 3.5);
    CHECK(ratio < 4.5);
  }
}

TEST_CASE("error_bound formula") {
  CHECK(error_bound({0.0, 1.0, 1.0, 2.0}, 100, 0.01, 0.0) == 0.0);
  CHECK(error_bound({12.0, 1.0, 1.0, 2.0}, 100, 0.01, 0.01) == doctest::Approx(1.5e-4).epsilon(1e-12));
  CHECK(error_bound({0.0, 2.0, 0.5, 2.0}, 1, 0.1, 0.1) ==
        doctest::Approx(4.0 * 0.01 / (2.0 * 0.5)));
  CHECK_THROWS_AS(error_bound({1.0, 0.0, 1.0, 2.0}, 1, 0.1, 0.0), ConfigError);
  CHECK_THROWS_AS(error_bound({1.0, 1.0, -1.0, 2.0}, 1, 0.1, 0.0), ConfigError);
}

TEST_CASE("kappa matches closed-form second derivatives") {
  const GammaFunction alpha = square_gamma();
  const LinearSystem decay = scalar_decay();
  SUBCASE("scalar decay: d2/dt2 of e^{-2t} is 4 e^{-2t}") {
    const Trajectory t = simulate(decay, State::Constant(1, 1.0), scalar_cfg());
    CHECK(estimate_kappa(t, decay, alpha) == doctest::Approx(4.0).epsilon(1e-6));
    for (double x : {0.3, 0.7}) {
      CHECK(alpha_second_time_derivative(decay, alpha, Eigen::VectorXd::Constant(1, x)) ==
            doctest::Approx(4.0 * x * x).epsilon(1e-6));
    }
  }
  SUBCASE("degenerate trajectory") {
    const Trajectory t = simulate(decay, State::Constant(1, 1e-10), scalar_cfg());
    CHECK_THROWS_AS(estimate_kappa(t, decay, alpha), DegenerateTrajectoryError);
  }
  SUBCASE("SMIB: closed form agrees with second differences in time") {
    const PowerSystem smib = build_smib();
    const SimConfig cfg{0.001, 5.0, 10.0, 1e6};
    const Trajectory t = simulate(smib, Eigen::Vector2d(0.5, 0.0), cfg);
    const double kappa = estimate_kappa(t, smib, alpha);
    CHECK(std::isfinite(kappa));
    CHECK(kappa > 0.0);
    for (Eigen::Index i : {Eigen::Index{200}, Eigen::Index{1500}, Eigen::Index{3000}}) {
      const double a0 = t.state(i - 1).squaredNorm();
      const double a1 = t.state(i).squaredNorm();
      const double a2 = t.state(i + 1).squaredNorm();
      const double fd = (a2 - 2.0 * a1 + a0) / (cfg.dt * cfg.dt);
      const double closed = alpha_second_time_derivative(smib, alpha, t.state(i));
      CHECK(closed == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
    }
  }
}

TEST_CASE("decay envelope from the linearization") {
  SUBCASE("scalar decay") {
    const DecayEnvelope env = estimate_decay_envelope(scalar_decay());
    CHECK(env.lambda == doctest::Approx(0.9));
    CHECK(env.eta == doctest::Approx(1.0));
  }
  SUBCASE("SMIB slowest mode") {
    const double c = std::cos(std::asin(0.05));
    Eigen::Matrix2d j;
    j << 0.0, 1.0, -10.0 * c / 12.0, -20.0 / 12.0;
    // Characteristic polynomial s^2 + (20/12) s + 10c/12.
    const double tr = -20.0 / 12.0, det = 10.0 * c / 12.0;
    const double disc = tr * tr - 4.0 * det;
    const double slowest = disc >= 0.0 ? 0.5 * (tr + std::sqrt(disc)) : 0.5 * tr;
    const DecayEnvelope env = estimate_decay_envelope(build_smib());
    CHECK(env.lambda == doctest::Approx(0.9 * std::abs(slowest)).epsilon(1e-9));
    CHECK(env.eta >= 1.0);
  }
  SUBCASE("undamped SMIB is rejected") {
    const PowerSystem undamped({{12.0, 0.0, 0.5}, {0.0, 0.0, -0.5}}, {{0, 1, 0.1}},
                               {std::asin(0.05), 0.0}, 1);
    CHECK_THROWS_AS(estimate_decay_envelope(undamped), NotHurwitzError);
  }
}

TEST_CASE("the discretization bound dominates the true error on the scalar oracle") {
  const GammaFunction alpha = square_gamma();
  const LinearSystem decay = scalar_decay();
  for (double x0 : {0.1, 0.5, 1.0}) {
    const Trajectory t = simulate(decay, State::Constant(1, x0), SimConfig{0.01, 20.0, 1.0, 1e6});
    REQUIRE(t.converged);
    const double v_hat = estimate_v(t, alpha);
    const double truth = 0.5 * x0 * x0;
    const double err = std::abs(v_hat - truth);
    CHECK(err <= 1e-3);
    const ErrorBoundParams p{estimate_kappa(t, decay, alpha), 1.0, 0.9, 2.0};
    const double bound = error_bound(p, t.length(), t.dt, t.final_state().norm());
    CHECK(err <= bound);
    // Measured envelope gives the same constants for this system.
    const ErrorBoundParams measured = measure_error_bound(t, decay, alpha);
    CHECK(measured.eta == doctest::Approx(1.0));
    CHECK(measured.lambda == doctest::Approx(0.9));
  }
}
