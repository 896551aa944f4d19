#pragma once

// Zero-state average run length of the MEWMA chart and threshold calibration.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

namespace fdamon {

struct ArlOptions {
  int grid = 100;       // cells of the radial chain (delta = 0, or p = 1)
  int grid_axis = 80;   // cells along the shift direction (delta > 0, p > 1)
  int grid_orth = 40;   // cells of the orthogonal squared norm (delta > 0, p > 1)
  bool extrapolate = true;  // Richardson over the grid and the half grid
  double max_refinement_gap = 0.01;  // NonConvergence above this relative gap
};

struct ArlDetail {
  double arl = 0.0;     // reported value
  double fine = 0.0;    // full grid
  double coarse = 0.0;  // half grid (0 when not computed)
  double refinement_gap = 0.0;
  bool closed_form = false;
};

/// ARL of the chart with smoothing `lambda` on i.i.d. N(mu, I_p) scores,
/// ||mu|| = delta, alarming when T^2 > h. lambda = 1 uses the closed form;
/// otherwise a Markov-chain discretization of the radial process. Throws
/// NonConvergence when grid and half grid disagree by more than the allowed gap.
ArlDetail arl_detail(double lambda, int p, double h, double delta = 0.0, const ArlOptions& options = {});
double arl(double lambda, int p, double h, double delta = 0.0, const ArlOptions& options = {});

struct MonteCarloArl {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t replications = 0;
  std::size_t censored = 0;  // runs stopped at the cap without an alarm
};

/// Direct simulation of the chart: seeded, mt19937_64 with normal draws.
MonteCarloArl arl_monte_carlo(double lambda, int p, double h, double delta, std::size_t replications,
                              std::uint64_t seed, std::size_t max_run = 1000000);

struct CalibrationOptions {
  ArlOptions arl;
  double rel_tolerance = 1e-9;  // on |ARL - target| / target
  int max_iterations = 100;
};

/// h such that the in-control ARL equals `target_arl0`: a coarse grid brackets
/// the root, then an Illinois-modified secant iteration refines it. Throws
/// BracketFailure when no bracket is found.
double calibrate_h4(double lambda, int p, double target_arl0, const CalibrationOptions& options = {});

struct CalibrationRow {
  double lambda;
  int p;
  double target_arl0;
  double h4;
};

void write_calibration_csv(std::ostream& out, const std::vector<CalibrationRow>& rows);

/// P(chi^2_k(ncp) <= x).
double chi2_cdf(double k, double x, double ncp = 0.0);
/// Inverse of the central chi^2_k distribution function.
double chi2_quantile(double k, double probability);

/// Matrix of noncentral chi^2_k distribution functions, F(i, j) =
/// P(chi^2_k(ncp_i) <= x_j), through the Poisson mixture of central laws.
Eigen::MatrixXd chi2_cdf_matrix(double k, const Eigen::VectorXd& ncp, const Eigen::VectorXd& x);

}  // namespace fdamon
