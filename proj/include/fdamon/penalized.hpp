#pragma once

// Penalized least squares with per-block quadratic penalties, optional
// sum-to-zero constraints and GCV smoothing-parameter selection.

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace fdamon {

/// One smooth term: a penalty over its coefficients and, optionally, a single
/// linear constraint `constraint * gamma = 0`.
struct TermSpec {
  Eigen::MatrixXd penalty;
  std::optional<Eigen::RowVectorXd> constraint;

  int size() const { return static_cast<int>(penalty.rows()); }
};

/// Design columns for one term plus its penalty. With `sum_to_zero` the fitted
/// term sums to zero over the design rows.
struct SmoothBlock {
  Eigen::MatrixXd design;
  Eigen::MatrixXd penalty;
  bool sum_to_zero = false;
};

/// A fixed smoothing parameter, or nullopt for automatic (GCV) selection.
using Smoothing = std::optional<double>;

struct GcvOptions {
  double log10_min = -8.0;  // relative to the block's trace-balancing scale
  double log10_max = 8.0;
  double log10_step = 0.5;
  int max_sweeps = 8;
};

struct PenalizedFit {
  std::vector<Eigen::VectorXd> coefficients;  // per block, original basis
  Eigen::VectorXd coefficients_all;
  /// Bayesian posterior covariance of coefficients_all (scale included).
  Eigen::MatrixXd covariance;
  std::vector<double> smoothing;
  std::vector<double> edf_blocks;
  double edf = 0.0;
  double rss = 0.0;
  double gcv = 0.0;
  double scale = 0.0;  // residual variance used in `covariance`
  double n = 0.0;
  Eigen::VectorXd fitted;
  Eigen::VectorXd residuals;
  std::vector<TermSpec> terms;  // penalties and constraints actually used

  /// Block `b` of a stacked vector.
  Eigen::VectorXd block(const Eigen::VectorXd& stacked, std::size_t b) const;
  Eigen::MatrixXd block_covariance(std::size_t b) const;
};

/// Minimizes |W^{1/2}(y - X gamma)|^2 + sum_b lambda_b gamma_b' S_b gamma_b,
/// subject to sum-to-zero on the flagged blocks. `weights` may be empty
/// (unit weights). Throws SingularSystem when the constrained design is rank
/// deficient.
PenalizedFit fit_penalized(const std::vector<SmoothBlock>& blocks, const Eigen::VectorXd& response,
                           const Eigen::VectorXd& weights, const std::vector<Smoothing>& smoothing,
                           const GcvOptions& options = {});

/// Sufficient statistics X'WX, X'Wy, y'Wy for generalized least squares.
struct CrossProducts {
  Eigen::MatrixXd xtwx;
  Eigen::VectorXd xtwy;
  double ytwy = 0.0;
  double n = 0.0;
};

/// Solves the penalized problem from cross products with fixed smoothing
/// parameters. With `known_scale` the covariance is A^{-1} * known_scale,
/// otherwise the residual variance rss / (n - edf) is used.
PenalizedFit solve_penalized(const std::vector<TermSpec>& terms, const CrossProducts& cp,
                             const std::vector<double>& smoothing, std::optional<double> known_scale = {});

/// GCV score n * rss / (n - edf)^2 for given smoothing parameters, computed
/// through the same solver as fit_penalized.
double gcv_score(const std::vector<SmoothBlock>& blocks, const Eigen::VectorXd& response,
                 const Eigen::VectorXd& weights, const std::vector<double>& smoothing);

}  // namespace fdamon
