// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
// Usage: fdamon_acceptance [criterion ...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "fdamon/arl.hpp"
#include "fdamon/error.hpp"
#include "fdamon/fpca.hpp"
#include "fdamon/mewma.hpp"
#include "fdamon/phase1.hpp"
#include "fdamon/scores.hpp"
#include "fdamon/simulate.hpp"

using namespace fdamon;

namespace {

constexpr std::uint64_t kSeed = 20251015;
constexpr double kArl0 = 370.4;

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void note(const char* fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    details.emplace_back(buf);
  }
  void require(bool ok, const char* fmt, auto... args) {
    pass = pass && ok;
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + buf);
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Eigen::MatrixXd random_spd(int p, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd a(p, p);
  for (auto& v : a.reshaped()) v = z(rng);
  return a * a.transpose() / p + 0.5 * Eigen::MatrixXd::Identity(p, p);
}

// ---------------------------------------------------------------------------

Outcome thresholds() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const double h1 = calibrate_h4(1.0, 12, kArl0);
  const double h03 = calibrate_h4(0.3, 12, kArl0);
  const double secs = seconds_since(t0);
  const double q = boost::math::quantile(boost::math::chi_squared(12), 1.0 - 1.0 / kArl0);
  o.require(std::abs(h1 - 30.09) <= 0.05, "lambda=1.0 p=12: h4 = %.6f, reported 30.09 +- 0.05", h1);
  o.require(std::abs(h03 - 29.64) <= 0.3, "lambda=0.3 p=12: h4 = %.6f, reported 29.64 +- 0.3", h03);
  o.require(std::abs(h1 - q) < 1e-6, "lambda=1.0 vs chi2_12 quantile at 1-1/370.4 = %.9f: |diff| = %.2e", q,
            std::abs(h1 - q));
  o.require(secs < 60.0, "runtime %.2f s < 60 s", secs);
  return o;
}

Outcome arl_engine() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::uint64_t k = 0;
  double z2 = 0.0;
  for (double lambda : {0.3, 1.0})
    for (double delta : {0.0, 0.5, 1.0})
      for (double h : {25.0, 30.0}) {
        const double chain = arl(lambda, 12, h, delta);
        const auto mc = arl_monte_carlo(lambda, 12, h, delta, 100000, kSeed + k++);
        const double z = (chain - mc.mean) / mc.standard_error;
        z2 += z * z;
        o.require(std::abs(z) <= 2.0 && mc.censored == 0,
                  "lambda=%.1f delta=%.1f h=%4.1f: chain %9.3f  MC %9.3f +- %6.3f  (z = %+.2f)", lambda, delta, h,
                  chain, mc.mean, mc.standard_error, z);
      }
  const double secs = seconds_since(t0);
  o.note("informational: sum of z^2 = %.2f on %d df (p = %.3f)", z2, static_cast<int>(k),
         1.0 - boost::math::cdf(boost::math::chi_squared(static_cast<double>(k)), z2));
  o.require(secs < 600.0, "runtime %.1f s < 600 s", secs);
  return o;
}

Outcome score_oracle() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(kSeed);
  std::uniform_int_distribution<int> nd(1, 10), md(1, 4);
  std::uniform_real_distribution<double> u(0.05, 4.0);
  std::normal_distribution<double> z;
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const int n = nd(rng), m = md(rng);
    Eigen::MatrixXd phi(n, m);
    for (auto& v : phi.reshaped()) v = z(rng);
    Eigen::VectorXd nu2(m), e(n);
    for (auto& v : nu2) v = u(rng);
    for (auto& v : e) v = 2.0 * z(rng);
    const double s2 = u(rng);
    Eigen::MatrixXd sigma = phi * nu2.asDiagonal() * phi.transpose();
    sigma.diagonal().array() += s2;
    const Eigen::VectorXd oracle = nu2.asDiagonal() * phi.transpose() * sigma.inverse() * e;
    const Eigen::VectorXd got = conditional_scores(phi, nu2, s2, e).scores;
    worst = std::max(worst, (got - oracle).norm() / oracle.norm());
  }
  const double secs = seconds_since(t0);
  o.require(worst <= 1e-8, "200 instances (N <= 10, m <= 4): max relative error %.3e <= 1e-8", worst);
  o.require(secs < 10.0, "runtime %.3f s < 10 s", secs);
  return o;
}

struct Recovery {
  double rmse = 0.0;
  std::vector<double> alignment;
  double sigma2 = 0.0;
  int m = 0;
};

Recovery recover(std::uint64_t seed) {
  SimulationSpec spec;  // 200 days, f(z) = sin(z/3), two planted eigenfunctions, sigma2 = 0.25, 47.5% missing
  spec.seed = seed;
  const SimulatedData sim = simulate(spec);
  const auto b = ProfileBundle::from_records(sim.records);
  const auto days = usable_profiles(align_series(b.at("mode1"), b.at("temperature")));
  const Phase1Result res = fit_phase1(days, "mode1");
  const Phase1Model& m = res.model;
  const OutputTruth& truth = sim.truth[0];

  Recovery r;
  std::vector<double> fh, ft;
  for (const auto& d : days)
    for (double z : d.z_values) {
      fh.push_back(m.covariate.value(z));
      ft.push_back(truth.f(z));
    }
  double mh = 0.0, mt = 0.0;
  for (std::size_t i = 0; i < fh.size(); ++i) {
    mh += fh[i];
    mt += ft[i];
  }
  mh /= fh.size();
  mt /= ft.size();
  double se = 0.0;
  for (std::size_t i = 0; i < fh.size(); ++i) se += std::pow((fh[i] - mh) - (ft[i] - mt), 2);
  r.rmse = std::sqrt(se / fh.size());
  r.sigma2 = m.noise_variance;
  r.m = m.eigen.m;
  for (int k = 0; k < std::min(m.eigen.m, 2); ++k)
    r.alignment.push_back(std::abs(m.eigen.functions.row(k).cwiseProduct(m.eigen.weights.transpose()).dot(truth.phi.row(k))));
  return r;
}

Outcome pipeline_recovery() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const Recovery primary = recover(kSeed);
  o.note("primary data set (seed %llu):", static_cast<unsigned long long>(kSeed));
  o.require(primary.rmse < 0.05, "  f RMSE after centering %.4f < 0.05", primary.rmse);
  o.require(primary.alignment.size() == 2 && primary.alignment[0] > 0.95 && primary.alignment[1] > 0.95,
            "  |<phi_hat_r, phi_r>| = %.4f, %.4f > 0.95", primary.alignment.size() > 0 ? primary.alignment[0] : 0.0,
            primary.alignment.size() > 1 ? primary.alignment[1] : 0.0);
  o.require(primary.sigma2 >= 0.21 && primary.sigma2 <= 0.29, "  sigma2_hat %.4f in [0.21, 0.29]", primary.sigma2);

  int m2 = 0, rmse_ok = 0, align_ok = 0, sigma_ok = 0;
  double rmse_sum = 0.0, rmse_max = 0.0;
  for (int k = 1; k <= 50; ++k) {
    const Recovery r = recover(kSeed + k);
    m2 += r.m == 2;
    rmse_ok += r.rmse < 0.05;
    rmse_sum += r.rmse;
    rmse_max = std::max(rmse_max, r.rmse);
    align_ok += r.alignment.size() == 2 && r.alignment[0] > 0.95 && r.alignment[1] > 0.95;
    sigma_ok += r.sigma2 >= 0.21 && r.sigma2 <= 0.29;
  }
  o.require(m2 >= 45, "99%% rule selects m = 2 in %d/50 replications (>= 45 required)", m2);
  o.note("replications, informational: f RMSE mean %.4f, max %.4f, below 0.05 in %d/50; alignment > 0.95 in %d/50; "
         "sigma2 in range in %d/50",
         rmse_sum / 50.0, rmse_max, rmse_ok, align_ok, sigma_ok);
  const double secs = seconds_since(t0);
  o.require(secs < 900.0, "runtime %.1f s < 900 s", secs);
  return o;
}

// First alarm of a fresh chart fed by `draw`, capped at `cap` steps.
long first_passage(MewmaChart& chart, const std::function<Eigen::VectorXd()>& draw, long cap) {
  chart.reset();
  for (long g = 1; g <= cap; ++g)
    if (chart.update(draw()).alarm) return g;
  return cap;
}

Outcome operating_characteristics() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const int p = 12;
  const double lambda = 0.3;
  const double h4 = calibrate_h4(lambda, p, kArl0);
  std::mt19937_64 rng(kSeed);
  const Eigen::MatrixXd cov = random_spd(p, rng);
  const Eigen::MatrixXd L = cov.llt().matrixL();
  std::normal_distribution<double> z;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(p);
  const auto draw = [&] {
    Eigen::VectorXd e(p);
    for (auto& v : e) v = z(rng);
    return Eigen::VectorXd(L * e + mu);
  };
  ChartConfig c;
  c.lambda = lambda;
  c.p = p;
  c.h4 = h4;
  MewmaChart chart(c, cov);

  const int reps = 2000;
  double sum = 0.0;
  for (int k = 0; k < reps; ++k) sum += static_cast<double>(first_passage(chart, draw, 1000000));
  const double arl0 = sum / reps;
  o.require(std::abs(arl0 / kArl0 - 1.0) <= 0.05, "in control, h4 = %.4f: mean first passage %.2f in 370.4 +- 5%%", h4,
            arl0);

  // noncentrality 1: mu' Lambda^{-1} mu = 1 along a random direction
  Eigen::VectorXd dir(p);
  for (auto& v : dir) v = z(rng);
  mu = L * dir.normalized();
  sum = 0.0;
  for (int k = 0; k < reps; ++k) sum += static_cast<double>(first_passage(chart, draw, 1000000));
  const double arl1 = sum / reps;
  const double chain = arl(lambda, p, h4, 1.0);
  o.require(std::abs(arl1 / chain - 1.0) <= 0.05, "shift delta = 1 at tau = 1: mean delay %.3f vs arl() %.3f (+- 5%%)",
            arl1, chain);
  const double secs = seconds_since(t0);
  o.require(secs < 600.0, "runtime %.1f s < 600 s", secs);
  return o;
}

Outcome special_cases() {
  Outcome o;
  std::mt19937_64 rng(kSeed);
  std::normal_distribution<double> z;
  const int p = 6;
  const Eigen::MatrixXd cov = random_spd(p, rng);
  ChartConfig c;
  c.lambda = 1.0;
  c.p = p;
  c.h4 = 20.0;
  MewmaChart chart(c, cov);
  int equal = 0;
  for (int k = 0; k < 1000; ++k) {
    Eigen::VectorXd x(p);
    for (auto& v : x) v = z(rng);
    equal += chart.update(x).t2 == hotelling_t2(x, cov);
  }
  o.require(equal == 1000, "lambda = 1: chart statistic equals Hotelling T2 bitwise on %d/1000 inputs", equal);

  c.lambda = 0.3;
  c.p = 2;
  MewmaChart hand(c, Eigen::MatrixXd::Identity(2, 2));
  const double t2 = hand.update(Eigen::Vector2d(1.0, 0.0)).t2;
  o.require(std::abs(t2 - 0.51) <= 1e-12, "hand example: T2_1 = %.17g (0.51 to rounding, |diff| = %.1e)", t2,
            std::abs(t2 - 0.51));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  set_warning_handler([](const std::string&, const std::string&) {});
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{
      {1, "threshold reproduction", thresholds},
      {2, "ARL engine vs Monte Carlo", arl_engine},
      {3, "score estimator vs dense BLUP", score_oracle},
      {4, "pipeline recovery on simulated data", pipeline_recovery},
      {5, "chart operating characteristics", operating_characteristics},
      {6, "exact special cases", special_cases},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.details.push_back(std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::printf("%s criterion %d: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, seconds_since(t0));
    for (const auto& d : o.details) std::printf("    %s\n", d.c_str());
    std::fflush(stdout);
  }
  if (only.empty() || only.count(7))
    std::printf("SKIP criterion 7: dataset-dependent comparison (optional, not gating; needs the public bridge "
                "monitoring data, which is not bundled)\n");
  return failed == 0 ? 0 : 1;
}
