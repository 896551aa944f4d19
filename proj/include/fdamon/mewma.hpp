#pragma once

// MEWMA control chart on stacked score vectors.

#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fdamon/scores.hpp"

namespace fdamon {

struct ChartConfig {
  double lambda = 0.3;
  double target_arl0 = 370.4;
  int p = 1;
  double h4 = 0.0;

  /// Throws InvalidArgument unless 0 < lambda <= 1, h4 > 0 and p >= 1.
  void validate() const;
};

struct BaselineCovariance {
  Eigen::MatrixXd cov;
  double condition = 0.0;  // of the unshrunk estimate
  bool shrunk = false;
};

/// (1/n) sum xi xi' about the zero mean. When the condition number exceeds
/// 1e10 the estimate is shrunk toward its (floored) diagonal with intensity
/// 0.05 and a warning is emitted. Throws TooFewDays for fewer than p + 1 days.
BaselineCovariance estimate_baseline_cov(const std::vector<Eigen::VectorXd>& scores);
BaselineCovariance estimate_baseline_cov(const std::vector<DayScores>& scores);

/// xi' Lambda^{-1} xi through a Cholesky factor of Lambda.
double hotelling_t2(const Eigen::VectorXd& xi, const Eigen::MatrixXd& cov);

struct ChartStep {
  double t2 = 0.0;
  bool alarm = false;
};

class MewmaChart {
 public:
  MewmaChart(ChartConfig config, const Eigen::MatrixXd& baseline_cov);

  /// omega_g = (1 - lambda) omega_{g-1} + lambda xi_g; T^2 against
  /// Lambda_omega = lambda / (2 - lambda) Lambda. The recursion continues after
  /// alarms. Throws NonFiniteInput.
  ChartStep update(const Eigen::VectorXd& xi);
  void reset();

  const ChartConfig& config() const { return config_; }
  const Eigen::VectorXd& omega() const { return omega_; }
  const Eigen::MatrixXd& baseline() const { return baseline_; }
  long steps() const { return g_; }
  /// 1-based step numbers at which the chart alarmed.
  const std::vector<long>& alarms() const { return alarms_; }

 private:
  ChartConfig config_;
  Eigen::MatrixXd baseline_;
  Eigen::LLT<Eigen::MatrixXd> omega_factor_;
  Eigen::VectorXd omega_;
  long g_ = 0;
  std::vector<long> alarms_;
};

struct ShiftSpec {
  long tau = 1;  // first shifted step, 1-based
  Eigen::VectorXd mu1;
};

/// Adds mu1 to every vector from step tau onward.
std::vector<Eigen::VectorXd> inject_shift(std::vector<Eigen::VectorXd> stream, const ShiftSpec& spec);

struct ChartRecord {
  std::vector<int> day_index;
  std::vector<double> t2;
  std::vector<bool> alarm;
  std::vector<int> alarm_days;
  std::optional<long> first_passage;  // 1-based step of the first alarm
  std::optional<int> first_alarm_day;
};

/// Runs a fresh chart over the stream. `day_index` labels the steps (defaults
/// to 1, 2, ...).
ChartRecord run_chart(const ChartConfig& config, const Eigen::MatrixXd& baseline_cov,
                      const std::vector<Eigen::VectorXd>& stream, const std::vector<int>& day_index = {});

void write_chart_csv(std::ostream& out, const ChartRecord& record);

struct LjungBox {
  double statistic = 0.0;
  double p_value = 1.0;
  int lags = 0;
};

/// Portmanteau test for serial correlation of a series.
LjungBox ljung_box(const std::vector<double>& series, int lags);

}  // namespace fdamon
