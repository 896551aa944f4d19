#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "fdamon/error.hpp"
#include "fdamon/fpca.hpp"
#include "fdamon/simulate.hpp"

using namespace fdamon;

namespace {

// Residual curves sum_r xi_r phi_r(t) + noise on the hourly grid, with a
// fraction of hours deleted at random.
std::vector<DailyProfile> residual_curves(const Eigen::MatrixXd& phi, const std::vector<double>& nu2, double sigma2,
                                          int days, double drop, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u;
  std::vector<DailyProfile> out;
  for (int d = 1; d <= days; ++d) {
    Eigen::VectorXd curve = Eigen::VectorXd::Zero(24);
    for (Eigen::Index r = 0; r < phi.rows(); ++r)
      curve += std::sqrt(nu2[r]) * n01(rng) * phi.row(r).transpose();
    DailyProfile p;
    p.day_index = d;
    for (int h = 0; h < 24; ++h) {
      const double e = std::sqrt(sigma2) * n01(rng);
      if (u(rng) < drop) continue;
      p.times.push_back(h + 1.0);
      p.values.push_back(curve[h] + e);
    }
    out.push_back(p);
  }
  return out;
}

double off_diagonal_max(const Eigen::MatrixXd& m) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (i != j) worst = std::max(worst, std::abs(m(i, j)));
  return worst;
}

}  // namespace

TEST_SUITE("fpca") {
  TEST_CASE("trapezoid weights on the hourly grid") {
    const Eigen::VectorXd w = trapezoid_weights(hourly_grid());
    CHECK(w.sum() == doctest::Approx(23.0));
    CHECK(w[0] == 0.5);
    CHECK(w[5] == 1.0);
  }

  TEST_CASE("white noise: flat off-diagonal surface and unit noise variance") {
    const auto res = residual_curves(Eigen::MatrixXd(0, 24), {}, 1.0, 500, 0.0, 21);
    const auto cov = estimate_covariance(res, hourly_grid());
    CHECK(off_diagonal_max(cov.smoothed) < 0.05);
    CHECK(std::abs(estimate_noise_variance(cov) - 1.0) < 0.1);
    CHECK((cov.smoothed - cov.smoothed.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("random level curves: constant surface and noise at the floor") {
    std::mt19937_64 rng(22);
    std::normal_distribution<double> n(0.0, 2.0);
    std::vector<DailyProfile> res;
    double m2 = 0.0;
    for (int d = 1; d <= 500; ++d) {
      const double xi = n(rng);
      m2 += xi * xi;
      DailyProfile p{d, {}, {}};
      for (int h = 1; h <= 24; ++h) {
        p.times.push_back(h);
        p.values.push_back(xi);
      }
      res.push_back(p);
    }
    m2 /= 500.0;
    const auto cov = estimate_covariance(res, hourly_grid());
    CHECK((cov.diag_raw.array() - m2).abs().maxCoeff() < 1e-10 * m2);
    CHECK((cov.smoothed.array() - m2).abs().maxCoeff() < 1e-8 * m2);
    CHECK(m2 == doctest::Approx(4.0).epsilon(0.15));
    CHECK(estimate_noise_variance(cov) == doctest::Approx(1e-10 * m2).epsilon(1e-6));
  }

  TEST_CASE("a single day has no co-observed pairs") {
    std::vector<DailyProfile> one{{1, {1, 2, 3}, {0.1, 0.2, 0.3}}};
    try {
      estimate_covariance(one, hourly_grid());
      FAIL("expected InsufficientPairs");
    } catch (const Error& e) {
      CHECK(e.kind() == "InsufficientPairs");
    }
  }

  TEST_CASE("times off the hourly grid are rejected") {
    std::vector<DailyProfile> res{{1, {1.5}, {0.0}}, {2, {1.5}, {0.0}}};
    CHECK_THROWS_AS(estimate_covariance(res, hourly_grid()), Error);
  }

  TEST_CASE("local linear smoother reproduces symmetric planes and products of lines") {
    const Eigen::VectorXd g = hourly_grid();
    Eigen::MatrixXd w = Eigen::MatrixXd::Ones(24, 24);
    w.diagonal().setZero();
    Eigen::MatrixXd plane(24, 24), saddle(24, 24);
    for (int i = 0; i < 24; ++i)
      for (int j = 0; j < 24; ++j) {
        plane(i, j) = 1.0 + 0.2 * (g[i] + g[j]);
        saddle(i, j) = 0.3 * (g[i] - 12.5) * (g[j] - 12.5);
      }
    for (double h : {1.0, 2.5, 6.0}) {
      CHECK((local_linear_surface(g, plane, w, h) - plane).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((local_linear_surface(g, saddle, w, h) - saddle).cwiseAbs().maxCoeff() < 1e-9);
    }
  }

  TEST_CASE("two-point toy covariance") {
    Eigen::MatrixXd c(2, 2);
    c << 2, 1, 1, 2;
    Eigen::VectorXd grid(2), w(2);
    grid << 1, 2;
    w << 1, 1;
    const auto es = eigendecompose(c, grid, w, 0.99);
    REQUIRE(es.m == 2);
    CHECK(es.values[0] == doctest::Approx(3.0));
    CHECK(es.values[1] == doctest::Approx(1.0));
    const double s = 1.0 / std::sqrt(2.0);
    CHECK(es.functions(0, 0) == doctest::Approx(s));
    CHECK(es.functions(0, 1) == doctest::Approx(s));
    CHECK(es.functions(1, 0) == doctest::Approx(s));
    CHECK(es.functions(1, 1) == doctest::Approx(-s));
    CHECK(es.explained[0] == doctest::Approx(0.75));
    CHECK(eigendecompose(c, grid, w, 0.75).m == 1);
  }

  TEST_CASE("rank-one covariance keeps one component") {
    const Eigen::MatrixXd phi = planted_eigenfunctions(2);
    const Eigen::MatrixXd c = 3.0 * phi.row(1).transpose() * phi.row(1);
    const Eigen::VectorXd g = hourly_grid();
    const auto es = eigendecompose(c, g, trapezoid_weights(g), 0.99);
    CHECK(es.m == 1);
    CHECK(es.explained[0] == doctest::Approx(1.0));
    CHECK(es.values[0] == doctest::Approx(3.0));
  }

  TEST_CASE("all-zero covariance is an error") {
    const Eigen::VectorXd g = hourly_grid();
    CHECK_THROWS_AS(eigendecompose(Eigen::MatrixXd::Zero(24, 24), g, trapezoid_weights(g), 0.99), Error);
  }

  TEST_CASE("signal plus noise: orthonormality, signs, reconstruction and noise") {
    const Eigen::MatrixXd phi = planted_eigenfunctions(2);
    const auto res = residual_curves(phi, {4.0, 1.5}, 0.25, 500, 0.0, 23);
    const auto cov = estimate_covariance(res, hourly_grid());
    const double target = 0.99;
    const auto es = eigendecompose(cov, target);
    CHECK((es.gram() - Eigen::MatrixXd::Identity(es.m, es.m)).cwiseAbs().maxCoeff() < 1e-6);
    for (int r = 1; r < es.m; ++r) CHECK(es.values[r] <= es.values[r - 1]);
    CHECK(es.explained[es.m - 1] >= target);
    for (int r = 0; r < es.m; ++r) {
      const double integral = es.functions.row(r).dot(es.weights);
      if (std::abs(integral) > 1e-9) {
        CHECK(integral > 0.0);
      } else {
        for (Eigen::Index i = 0; i < es.functions.cols(); ++i)
          if (std::abs(es.functions(r, i)) > 1e-12) {
            CHECK(es.functions(r, i) > 0.0);
            break;
          }
      }
    }
    const Eigen::MatrixXd recon = es.functions.transpose() * es.values.asDiagonal() * es.functions;
    CHECK((cov.smoothed - recon).norm() / cov.smoothed.norm() <= 1.0 - target + 0.02);
    CHECK(std::abs(estimate_noise_variance(cov) - 0.25) < 0.05);
  }

  TEST_CASE("planted eigenfunctions are recovered under 47.5% missingness") {
    const Eigen::MatrixXd phi = planted_eigenfunctions(2);
    const auto res = residual_curves(phi, {4.0, 1.5}, 0.25, 200, 0.475, 24);
    const auto es = eigendecompose(estimate_covariance(res, hourly_grid()), 0.99);
    REQUIRE(es.m >= 2);
    for (int r = 0; r < 2; ++r) {
      const double ip = es.functions.row(r).cwiseProduct(es.weights.transpose()).dot(phi.row(r));
      CHECK(std::abs(ip) > 0.95);
    }
  }

  TEST_CASE("unsmoothed option keeps raw off-diagonal moments") {
    const auto res = residual_curves(planted_eigenfunctions(1), {2.0}, 0.5, 100, 0.2, 25);
    CovarianceOptions o;
    o.smooth = false;
    const auto cov = estimate_covariance(res, hourly_grid(), o);
    for (int i = 0; i < 24; ++i)
      for (int j = 0; j < 24; ++j)
        if (i != j && cov.counts(i, j) >= 2) CHECK(cov.smoothed(i, j) == doctest::Approx(cov.raw(i, j)));
  }

  TEST_CASE("linear interpolation off the grid with constant extension") {
    Eigen::MatrixXd c(2, 2);
    c << 2, 1, 1, 2;
    Eigen::VectorXd grid(2), w(2);
    grid << 1, 2;
    w << 1, 1;
    const auto es = eigendecompose(c, grid, w, 0.99);
    const Eigen::MatrixXd v = es.evaluate({0.5, 1.5, 3.0});
    CHECK(v(0, 1) == doctest::Approx(es.functions(1, 0)));
    CHECK(v(1, 1) == doctest::Approx(0.0));
    CHECK(v(2, 1) == doctest::Approx(es.functions(1, 1)));
  }
}
