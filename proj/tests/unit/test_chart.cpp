#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "fdamon/error.hpp"
#include "fdamon/mewma.hpp"

using namespace fdamon;

namespace {

ChartConfig config(double lambda, int p, double h4) {
  ChartConfig c;
  c.lambda = lambda;
  c.p = p;
  c.h4 = h4;
  return c;
}

std::vector<Eigen::VectorXd> normal_stream(int n, int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(p);
    for (auto& v : x) v = z(rng);
    out.push_back(x);
  }
  return out;
}

Eigen::MatrixXd random_spd(int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Eigen::MatrixXd a(p, p);
  for (auto& v : a.reshaped()) v = z(rng);
  return a * a.transpose() + p * Eigen::MatrixXd::Identity(p, p);
}

}  // namespace

TEST_SUITE("chart") {
  TEST_CASE("hand example: one step with lambda 0.3 gives 0.51") {
    MewmaChart c(config(0.3, 2, 10.0), Eigen::MatrixXd::Identity(2, 2));
    const auto s = c.update(Eigen::Vector2d(1.0, 0.0));
    CHECK(c.omega()[0] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(c.omega()[1] == 0.0);
    CHECK(std::abs(s.t2 - 0.51) < 1e-12);
    CHECK(!s.alarm);
  }

  TEST_CASE("lambda 1 is the Hotelling chart, bit for bit") {
    const Eigen::MatrixXd cov = random_spd(5, 61);
    MewmaChart c(config(1.0, 5, 20.0), cov);
    for (const auto& x : normal_stream(50, 5, 62)) {
      const double t2 = c.update(x).t2;
      CHECK(t2 == hotelling_t2(x, cov));
      CHECK((c.omega() - x).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  TEST_CASE("zero stream never alarms") {
    const auto r = run_chart(config(0.3, 3, 1e-6), Eigen::MatrixXd::Identity(3, 3),
                             std::vector<Eigen::VectorXd>(20, Eigen::VectorXd::Zero(3)));
    for (double t : r.t2) CHECK(t == 0.0);
    CHECK(r.alarm_days.empty());
    CHECK(!r.first_passage);
  }

  TEST_CASE("whitening invariance") {
    const int p = 4;
    const Eigen::MatrixXd cov = random_spd(p, 63);
    Eigen::MatrixXd a = random_spd(p, 64);
    a(0, 3) += 1.3;
    const auto xs = normal_stream(40, p, 65);
    std::vector<Eigen::VectorXd> ys;
    for (const auto& x : xs) ys.push_back(a * x);
    const auto r1 = run_chart(config(0.3, p, 15.0), cov, xs);
    const auto r2 = run_chart(config(0.3, p, 15.0), a * cov * a.transpose(), ys);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(std::abs(r1.t2[i] - r2.t2[i]) <= 1e-8 * r1.t2[i]);
  }

  TEST_CASE("recursion continues through alarms") {
    MewmaChart c(config(0.5, 1, 1.0), Eigen::MatrixXd::Identity(1, 1));
    double omega = 0.0;
    for (double x : {5.0, 5.0, 0.0, 0.0, 0.0}) {
      omega = 0.5 * omega + 0.5 * x;
      const auto s = c.update(Eigen::VectorXd::Constant(1, x));
      CHECK(s.t2 == doctest::Approx(omega * omega / (0.5 / 1.5)));
    }
    CHECK(c.alarms() == std::vector<long>{1, 2, 3, 4});
    CHECK(c.steps() == 5);
    c.reset();
    CHECK(c.omega().isZero());
    CHECK(c.steps() == 0);
  }

  TEST_CASE("huge first-day outlier alarms immediately") {
    auto xs = normal_stream(10, 3, 66);
    xs[0] = Eigen::Vector3d(1e6, 0, 0);
    std::vector<int> days;
    for (int i = 0; i < 10; ++i) days.push_back(201 + i);
    const auto r = run_chart(config(0.3, 3, 12.0), Eigen::MatrixXd::Identity(3, 3), xs, days);
    REQUIRE(r.first_passage);
    CHECK(*r.first_passage == 1);
    CHECK(*r.first_alarm_day == 201);
    CHECK(r.day_index == days);
  }

  TEST_CASE("non-finite score vector is rejected") {
    MewmaChart c(config(0.3, 2, 5.0), Eigen::MatrixXd::Identity(2, 2));
    try {
      c.update(Eigen::Vector2d(std::numeric_limits<double>::quiet_NaN(), 0.0));
      FAIL("expected NonFiniteInput");
    } catch (const Error& e) {
      CHECK(e.kind() == "NonFiniteInput");
    }
  }

  TEST_CASE("configuration limits") {
    CHECK_THROWS_AS(config(0.0, 2, 5.0).validate(), Error);
    CHECK_THROWS_AS(config(1.5, 2, 5.0).validate(), Error);
    CHECK_THROWS_AS(config(0.3, 2, 0.0).validate(), Error);
    CHECK_THROWS_AS(config(0.3, 0, 5.0).validate(), Error);
    CHECK_NOTHROW(config(1.0, 1, 5.0).validate());
  }

  TEST_CASE("baseline covariance from i.i.d. standard normal scores") {
    const auto b = estimate_baseline_cov(normal_stream(5000, 3, 67));
    CHECK((b.cov - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 0.1);
    CHECK(!b.shrunk);
  }

  TEST_CASE("baseline covariance needs p + 1 days") {
    try {
      estimate_baseline_cov(normal_stream(3, 3, 68));
      FAIL("expected TooFewDays");
    } catch (const Error& e) {
      CHECK(e.kind() == "TooFewDays");
    }
    CHECK_NOTHROW(estimate_baseline_cov(normal_stream(4, 3, 68)));
  }

  TEST_CASE("rank-deficient scores take the shrinkage path") {
    auto xs = normal_stream(100, 3, 69);
    for (auto& x : xs) x[2] = 0.0;
    WarningCapture w;
    const auto b = estimate_baseline_cov(xs);
    CHECK(b.shrunk);
    CHECK(!w.messages().empty());
    CHECK(Eigen::LLT<Eigen::MatrixXd>(b.cov).info() == Eigen::Success);
  }

  TEST_CASE("step shift injection") {
    const auto xs = normal_stream(5, 3, 70);
    const auto same = inject_shift(xs, ShiftSpec{1, Eigen::VectorXd::Zero(3)});
    const auto late = inject_shift(xs, ShiftSpec{9, Eigen::VectorXd::Ones(3)});
    for (std::size_t i = 0; i < xs.size(); ++i) {
      CHECK(same[i] == xs[i]);
      CHECK(late[i] == xs[i]);
    }
    const auto shifted = inject_shift(xs, ShiftSpec{1, Eigen::Vector3d(2, 0, 0)});
    CHECK(shifted[0][0] == xs[0][0] + 2.0);
    CHECK(shifted[0][1] == xs[0][1]);
    CHECK(shifted[4][0] == xs[4][0] + 2.0);
    const auto mid = inject_shift(xs, ShiftSpec{3, Eigen::Vector3d(1, 1, 1)});
    CHECK(mid[1] == xs[1]);
    CHECK(mid[2] == xs[2] + Eigen::Vector3d(1, 1, 1));
  }

  TEST_CASE("chart CSV layout") {
    const auto r = run_chart(config(0.3, 1, 0.1), Eigen::MatrixXd::Identity(1, 1),
                             {Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 3.0)}, {7, 9});
    std::ostringstream out;
    write_chart_csv(out, r);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "day_index,t2,alarm");
    std::getline(in, line);
    CHECK(line == "7,0,0");
    std::getline(in, line);
    CHECK(line.rfind("9,", 0) == 0);
    CHECK(line.back() == '1');
  }

  TEST_CASE("Ljung-Box statistic and its verdicts") {
    std::mt19937_64 rng(71);
    std::normal_distribution<double> z;
    std::vector<double> white, ar;
    double prev = 0.0;
    for (int i = 0; i < 400; ++i) {
      white.push_back(z(rng));
      prev = 0.8 * prev + z(rng);
      ar.push_back(prev);
    }
    // direct evaluation of n(n+2) sum rho_k^2 / (n-k)
    const double n = static_cast<double>(white.size());
    double mean = 0.0;
    for (double v : white) mean += v;
    mean /= n;
    double c0 = 0.0;
    for (double v : white) c0 += (v - mean) * (v - mean);
    double q = 0.0;
    for (int k = 1; k <= 10; ++k) {
      double ck = 0.0;
      for (std::size_t i = k; i < white.size(); ++i) ck += (white[i] - mean) * (white[i - k] - mean);
      q += (ck / c0) * (ck / c0) / (n - k);
    }
    q *= n * (n + 2.0);
    const auto lb = ljung_box(white, 10);
    CHECK(lb.statistic == doctest::Approx(q).epsilon(1e-12));
    CHECK(lb.p_value > 0.01);
    CHECK(ljung_box(ar, 10).p_value < 1e-6);
  }
}
