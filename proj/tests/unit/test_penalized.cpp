#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "fdamon/error.hpp"
#include "fdamon/penalized.hpp"
#include "fdamon/spline.hpp"

using namespace fdamon;

namespace {

struct Problem {
  std::vector<double> x;
  Eigen::VectorXd y;
  SplineBasis basis;
  SmoothBlock block;
};

Problem sine_problem(int n, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> e(0.0, sd);
  Problem p;
  p.y.resize(n);
  for (int i = 0; i < n; ++i) {
    p.x.push_back(u(rng));
    p.y[i] = std::sin(2.0 * std::numbers::pi * p.x.back()) + e(rng);
  }
  p.basis = SplineBasis(0.0, 1.0, 12, false);
  p.block = SmoothBlock{p.basis.design(p.x), p.basis.penalty(), false};
  return p;
}

}  // namespace

TEST_SUITE("penalized") {
  TEST_CASE("unpenalized square system interpolates") {
    const SplineBasis b(0.0, 1.0, 4, false);
    const std::vector<double> x{0.0, 0.3, 0.6, 1.0};
    Eigen::VectorXd y(4);
    y << 1.0, -2.0, 0.5, 3.0;
    const auto fit = fit_penalized({{b.design(x), b.penalty(), false}}, y, {}, {0.0});
    CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("huge smoothing parameter gives the least squares line") {
    const Problem p = sine_problem(300, 0.1, 1);
    const auto fit = fit_penalized({p.block}, p.y, {}, {1e12});
    Eigen::MatrixXd A(p.x.size(), 2);
    for (std::size_t i = 0; i < p.x.size(); ++i) A.row(i) << 1.0, p.x[i];
    const Eigen::VectorXd beta = (A.transpose() * A).ldlt().solve(A.transpose() * p.y);
    for (double z = 0.0; z <= 1.0; z += 0.05) {
      const double f = p.basis.evaluate(z).dot(fit.coefficients[0]);
      CHECK(std::abs(f - (beta[0] + beta[1] * z)) < 1e-4);
    }
  }

  TEST_CASE("automatic smoothing recovers a sine curve") {
    const Problem p = sine_problem(500, 0.1, 2);
    const auto fit = fit_penalized({p.block}, p.y, {}, {std::nullopt});
    double se = 0.0;
    const int k = 201;
    for (int i = 0; i < k; ++i) {
      const double z = i / (k - 1.0);
      const double d = p.basis.evaluate(z).dot(fit.coefficients[0]) - std::sin(2.0 * std::numbers::pi * z);
      se += d * d;
    }
    CHECK(std::sqrt(se / k) < 0.05);
  }

  TEST_CASE("solution satisfies the penalized normal equations") {
    const Problem p = sine_problem(200, 0.2, 3);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    Eigen::VectorXd w(p.y.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = u(rng);
    for (double lambda : {0.0, 1e-4, 1.0, 1e3}) {
      const auto fit = fit_penalized({p.block}, p.y, w, {lambda});
      const Eigen::MatrixXd& X = p.block.design;
      const Eigen::MatrixXd A = X.transpose() * w.asDiagonal() * X + lambda * p.block.penalty;
      const Eigen::VectorXd rhs = X.transpose() * w.asDiagonal() * p.y;
      CHECK((A * fit.coefficients_all - rhs).norm() <= 1e-8 * rhs.norm());
    }
  }

  TEST_CASE("effective degrees of freedom fall as smoothing grows") {
    const Problem p = sine_problem(200, 0.2, 4);
    double prev = 1e300;
    for (double l10 = -6.0; l10 <= 6.0; l10 += 0.5) {
      const auto fit = fit_penalized({p.block}, p.y, {}, {std::pow(10.0, l10)});
      CHECK(fit.edf <= prev + 1e-9);
      prev = fit.edf;
    }
    CHECK(prev == doctest::Approx(2.0).epsilon(1e-3));
  }

  TEST_CASE("GCV choice agrees with a brute-force grid") {
    const Problem p = sine_problem(250, 0.3, 5);
    const auto fit = fit_penalized({p.block}, p.y, {}, {std::nullopt});
    double best = 1e300, best_l10 = 0.0;
    for (double l10 = -10.0; l10 <= 6.0; l10 += 0.05) {
      const double g = gcv_score({p.block}, p.y, {}, {std::pow(10.0, l10)});
      if (g < best) {
        best = g;
        best_l10 = l10;
      }
    }
    CHECK(fit.gcv <= best * (1.0 + 1e-6));
    CHECK(std::abs(std::log10(fit.smoothing[0]) - best_l10) <= 0.5);
    CHECK(gcv_score({p.block}, p.y, {}, fit.smoothing) == doctest::Approx(fit.gcv).epsilon(1e-10));
  }

  TEST_CASE("sum-to-zero constraint holds on the flagged block") {
    const Problem p = sine_problem(200, 0.1, 6);
    const SplineBasis t(0.0, 24.0, 8, true);
    std::vector<double> hours;
    for (std::size_t i = 0; i < p.x.size(); ++i) hours.push_back(1.0 + static_cast<double>(i % 24));
    const SmoothBlock a{t.design(hours), t.penalty(), false};
    SmoothBlock f = p.block;
    f.sum_to_zero = true;
    const auto fit = fit_penalized({a, f}, p.y, {}, {std::nullopt, std::nullopt});
    const Eigen::VectorXd term = f.design * fit.coefficients[1];
    CHECK(std::abs(term.sum()) < 1e-8);
  }

  TEST_CASE("rank-deficient design is a singular system") {
    const SplineBasis b(0.0, 1.0, 6, false);
    const std::vector<double> x{0.5, 0.5, 0.5};
    CHECK_THROWS_AS(fit_penalized({{b.design(x), b.penalty(), false}}, Eigen::VectorXd::Ones(3), {}, {0.0}), Error);
  }
}
