#pragma once

// Conditional-expectation (BLUP) score estimates for partially observed days.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fdamon/ingest.hpp"
#include "fdamon/phase1.hpp"

namespace fdamon {

/// Sigma_E = Phi diag(nu2) Phi' + sigma2 I for eigenfunctions evaluated at the
/// day's observation times (rows of `phi`).
Eigen::MatrixXd error_covariance(const Eigen::MatrixXd& phi, const Eigen::VectorXd& nu2, double sigma2);

struct ConditionalScores {
  Eigen::VectorXd scores;
  bool jittered = false;
};

/// xi_r = nu2_r phi_r' Sigma_E^{-1} E via a Cholesky solve. When the condition
/// number of Sigma_E exceeds 1e12, 1e-8 * trace / N is added to its diagonal
/// and a warning emitted.
ConditionalScores conditional_scores(const Eigen::MatrixXd& phi, const Eigen::VectorXd& nu2, double sigma2,
                                     const Eigen::VectorXd& residuals);

struct ResidualVector {
  Eigen::VectorXd values;
  bool boundary = false;  // covariate clamped on at least one point
};

/// u - alpha(t) - f(z) at the day's observed points.
ResidualVector residuals_for_day(const Phase1Model& model, const AlignedDay& day);

struct OutputScores {
  Eigen::VectorXd scores;  // length m_q
  std::size_t observed = 0;
  bool boundary = false;
  bool jittered = false;
};

/// Scores for one output on one day. Throws InsufficientPoints when the day
/// has fewer than `min_points` observations.
OutputScores estimate_day_scores(const Phase1Model& model, const AlignedDay& day, std::size_t min_points = 6);

enum class MissingOutputPolicy { ZeroFill, SkipDay };

std::string to_string(MissingOutputPolicy policy);
MissingOutputPolicy parse_missing_output_policy(const std::string& text);

struct DayScores {
  int day_index = 0;
  std::vector<Eigen::VectorXd> per_output;
  Eigen::VectorXd stacked;  // outputs in order, components r = 1..m_q within each
  std::vector<std::size_t> observed_count;
  std::vector<bool> boundary_flag;
  std::vector<bool> zero_filled;

  bool boundary() const;
};

/// Stacks per-output scores in canonical order. Outputs without scores are
/// zero-filled (ZeroFill) or cause the day to be skipped (SkipDay, returns
/// nullopt). Throws AllOutputsMissing when no output has scores.
std::optional<DayScores> stack_scores(int day_index, const std::vector<std::optional<OutputScores>>& per_output,
                                      const std::vector<int>& dims, MissingOutputPolicy policy);

/// The collection of per-output models used to score monitoring days.
class ScoreModel {
 public:
  ScoreModel(std::vector<Phase1Model> models, std::size_t min_points = 6,
             MissingOutputPolicy policy = MissingOutputPolicy::ZeroFill);

  int dimension() const;
  std::vector<int> dims() const;
  const std::vector<Phase1Model>& models() const { return models_; }

  /// Scores one day from its aligned data per output (nullopt: no data for that
  /// output). Outputs with too few points count as missing.
  std::optional<DayScores> score_day(int day_index, const std::vector<std::optional<AlignedDay>>& per_output) const;

  /// Scores every day appearing in any output's aligned series, in day order.
  /// Days with no usable output are skipped and logged.
  std::vector<DayScores> score_series(const std::vector<std::vector<AlignedDay>>& aligned_per_output,
                                      std::optional<DayRange> window = {}) const;

 private:
  std::vector<Phase1Model> models_;
  std::size_t min_points_;
  MissingOutputPolicy policy_;
};

}  // namespace fdamon
