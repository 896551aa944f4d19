#include "fdamon/mewma.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include <boost/math/distributions/chi_squared.hpp>

#include "fdamon/error.hpp"

namespace fdamon {

namespace {

constexpr const char* kModule = "chart";
constexpr double kMaxCondition = 1e10;
constexpr double kShrinkage = 0.05;

Eigen::LLT<Eigen::MatrixXd> factor(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw numerical_error(kModule, "NotPositiveDefinite", "covariance matrix has no Cholesky factor");
  return llt;
}

// Shared by the MEWMA statistic and the Hotelling statistic so that lambda = 1
// reproduces the latter exactly.
double quadratic_form(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::VectorXd& v) {
  return llt.matrixL().solve(v).squaredNorm();
}

}  // namespace

void ChartConfig::validate() const {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw data_error(kModule, "InvalidArgument", "lambda must lie in (0, 1]");
  if (!(h4 > 0.0)) throw data_error(kModule, "InvalidArgument", "threshold h4 must be positive");
  if (p < 1) throw data_error(kModule, "InvalidArgument", "dimension p must be at least 1");
  if (!(target_arl0 > 1.0)) throw data_error(kModule, "InvalidArgument", "target ARL must exceed 1");
}

BaselineCovariance estimate_baseline_cov(const std::vector<Eigen::VectorXd>& scores) {
  if (scores.empty()) throw data_error(kModule, "TooFewDays", "no Phase-I score vectors");
  const Eigen::Index p = scores.front().size();
  if (static_cast<Eigen::Index>(scores.size()) < p + 1)
    throw data_error(kModule, "TooFewDays",
                     std::to_string(scores.size()) + " day(s) for dimension " + std::to_string(p) + ", need p + 1");
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(p, p);
  for (const auto& x : scores) {
    if (x.size() != p) throw data_error(kModule, "InvalidDimension", "score vectors differ in length");
    S.noalias() += x * x.transpose();
  }
  S /= static_cast<double>(scores.size());

  BaselineCovariance out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (!(hi > 0.0)) throw numerical_error(kModule, "DegenerateScores", "all Phase-I scores are zero");
  out.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  out.cov = S;
  if (out.condition > kMaxCondition) {
    const double floor = 1e-6 * S.trace() / static_cast<double>(p);
    Eigen::VectorXd d = S.diagonal().cwiseMax(floor);
    out.cov = (1.0 - kShrinkage) * S;
    out.cov.diagonal() += kShrinkage * d;
    out.shrunk = true;
    warn(kModule, "baseline covariance condition number " + std::to_string(out.condition) +
                      "; shrunk toward its diagonal with intensity 0.05");
  }
  return out;
}

BaselineCovariance estimate_baseline_cov(const std::vector<DayScores>& scores) {
  std::vector<Eigen::VectorXd> v;
  v.reserve(scores.size());
  for (const auto& s : scores) v.push_back(s.stacked);
  return estimate_baseline_cov(v);
}

double hotelling_t2(const Eigen::VectorXd& xi, const Eigen::MatrixXd& cov) {
  if (xi.size() != cov.rows()) throw data_error(kModule, "InvalidDimension", "vector and covariance disagree");
  return quadratic_form(factor(cov), xi);
}

MewmaChart::MewmaChart(ChartConfig config, const Eigen::MatrixXd& baseline_cov)
    : config_(config), baseline_(baseline_cov) {
  config_.validate();
  if (baseline_.rows() != config_.p || baseline_.cols() != config_.p)
    throw data_error(kModule, "InvalidDimension", "baseline covariance must be p x p");
  const double scale = config_.lambda / (2.0 - config_.lambda);
  omega_factor_ = factor(scale * baseline_);
  omega_ = Eigen::VectorXd::Zero(config_.p);
}

ChartStep MewmaChart::update(const Eigen::VectorXd& xi) {
  if (xi.size() != config_.p) throw data_error(kModule, "InvalidDimension", "score vector has the wrong length");
  if (!xi.allFinite()) throw data_error(kModule, "NonFiniteInput", "score vector at step " + std::to_string(g_ + 1));
  omega_ = (1.0 - config_.lambda) * omega_ + config_.lambda * xi;
  ++g_;
  ChartStep step;
  step.t2 = quadratic_form(omega_factor_, omega_);
  step.alarm = step.t2 > config_.h4;
  if (step.alarm) alarms_.push_back(g_);
  return step;
}

void MewmaChart::reset() {
  omega_.setZero();
  g_ = 0;
  alarms_.clear();
}

std::vector<Eigen::VectorXd> inject_shift(std::vector<Eigen::VectorXd> stream, const ShiftSpec& spec) {
  if (spec.tau < 1) throw data_error(kModule, "InvalidArgument", "change point must be >= 1");
  for (std::size_t g = static_cast<std::size_t>(spec.tau); g <= stream.size(); ++g) {
    if (stream[g - 1].size() != spec.mu1.size()) throw data_error(kModule, "InvalidDimension", "shift length");
    stream[g - 1] += spec.mu1;
  }
  return stream;
}

ChartRecord run_chart(const ChartConfig& config, const Eigen::MatrixXd& baseline_cov,
                      const std::vector<Eigen::VectorXd>& stream, const std::vector<int>& day_index) {
  if (!day_index.empty() && day_index.size() != stream.size())
    throw data_error(kModule, "InvalidDimension", "one day index per score vector required");
  MewmaChart chart(config, baseline_cov);
  ChartRecord rec;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const int day = day_index.empty() ? static_cast<int>(i + 1) : day_index[i];
    const ChartStep s = chart.update(stream[i]);
    rec.day_index.push_back(day);
    rec.t2.push_back(s.t2);
    rec.alarm.push_back(s.alarm);
    if (s.alarm) {
      rec.alarm_days.push_back(day);
      if (!rec.first_passage) {
        rec.first_passage = static_cast<long>(i + 1);
        rec.first_alarm_day = day;
      }
    }
  }
  return rec;
}

void write_chart_csv(std::ostream& out, const ChartRecord& record) {
  out << "day_index,t2,alarm\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < record.t2.size(); ++i)
    out << record.day_index[i] << ',' << record.t2[i] << ',' << (record.alarm[i] ? 1 : 0) << '\n';
  out.precision(old);
}

LjungBox ljung_box(const std::vector<double>& series, int lags) {
  const auto n = static_cast<int>(series.size());
  if (lags < 1 || n <= lags + 1) throw data_error(kModule, "InvalidArgument", "series too short for the lag count");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= n;
  double c0 = 0.0;
  for (double v : series) c0 += (v - mean) * (v - mean);
  LjungBox out;
  out.lags = lags;
  if (c0 == 0.0) return out;
  for (int k = 1; k <= lags; ++k) {
    double ck = 0.0;
    for (int t = k; t < n; ++t) ck += (series[t] - mean) * (series[t - k] - mean);
    const double rho = ck / c0;
    out.statistic += rho * rho / (n - k);
  }
  out.statistic *= static_cast<double>(n) * (n + 2);
  out.p_value = boost::math::cdf(
      boost::math::complement(boost::math::chi_squared_distribution<double>(lags), out.statistic));
  return out;
}

}  // namespace fdamon
