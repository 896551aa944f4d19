#pragma once

// Functional principal components of residual processes on a fixed grid.

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fdamon/ingest.hpp"

namespace fdamon {

/// The 24-point hourly grid 1, 2, ..., 24.
Eigen::VectorXd hourly_grid();
/// Trapezoidal quadrature weights for a strictly increasing grid.
Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid);

struct CovarianceOptions {
  bool smooth = true;  // false: keep raw off-diagonal entries, smooth only to fill gaps/diagonal
  std::vector<double> bandwidths{1.0, 1.5, 2.5, 4.0, 6.0};  // hours, chosen by leave-one-curve-out CV
  double snap_tolerance = 1.0 / 60.0;  // hours
  int min_pairs = 2;
};

struct CovarianceEstimate {
  Eigen::VectorXd grid;
  Eigen::MatrixXd raw;       // pairwise-complete means of products; NaN where unobserved
  Eigen::MatrixXi counts;    // co-observation counts
  Eigen::MatrixXd smoothed;  // symmetric; diagonal from the off-diagonal surface
  Eigen::VectorXd diag_raw;
  double bandwidth = 0.0;
  std::vector<double> cv_scores;  // one per candidate bandwidth
  std::vector<std::pair<int, int>> insufficient_pairs;
};

/// Snaps each profile onto the grid, forms pairwise-complete second moments and
/// smooths the off-diagonal surface with a local linear smoother. Throws
/// OffGrid for times further than the snap tolerance from any grid point and
/// InsufficientPairs when no off-diagonal pair has enough co-observations.
CovarianceEstimate estimate_covariance(const std::vector<DailyProfile>& residuals, const Eigen::VectorXd& grid,
                                       const CovarianceOptions& options = {});

/// Local linear smoothing of a gridded surface from its off-diagonal cells,
/// weighted by `counts`. Exposed for testing.
Eigen::MatrixXd local_linear_surface(const Eigen::VectorXd& grid, const Eigen::MatrixXd& values,
                                     const Eigen::MatrixXd& weights, double bandwidth);

/// Orthonormal eigenfunctions (rows of `functions`, orthonormal under the
/// quadrature weights) of a covariance surface, truncated to `m` components.
struct EigenSystem {
  Eigen::VectorXd grid;
  Eigen::VectorXd weights;
  Eigen::MatrixXd functions;    // m x grid
  Eigen::VectorXd values;       // nu^2, length m, descending
  Eigen::VectorXd explained;    // cumulative fraction, length m
  Eigen::VectorXd all_values;   // full truncated-at-zero spectrum
  int m = 0;

  /// Eigenfunctions at arbitrary times (rows = times, cols = components), by
  /// linear interpolation with constant extension beyond the grid ends.
  Eigen::MatrixXd evaluate(const std::vector<double>& times) const;
  /// Gram matrix of the eigenfunctions under the quadrature weights.
  Eigen::MatrixXd gram() const;
};

/// Weighted symmetric eigendecomposition. Negative eigenvalues are set to zero;
/// m is the smallest count whose cumulative explained fraction reaches
/// `target`. Throws AllZeroVariance.
EigenSystem eigendecompose(const Eigen::MatrixXd& covariance, const Eigen::VectorXd& grid,
                           const Eigen::VectorXd& weights, double target);
EigenSystem eigendecompose(const CovarianceEstimate& cov, double target);

/// Mean gap between the raw and smoothed diagonals, floored at
/// 1e-10 * mean(diag_raw).
double estimate_noise_variance(const CovarianceEstimate& cov);

}  // namespace fdamon
