#pragma once

// In-control model u(t) = alpha(t) + f(z(t)) + E(t), fitted per output.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fdamon/fpca.hpp"
#include "fdamon/ingest.hpp"
#include "fdamon/penalized.hpp"
#include "fdamon/spline.hpp"

namespace fdamon {

/// A fitted smooth term: basis, coefficients and their posterior covariance.
struct SmoothTermFit {
  SplineBasis basis;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;
  double smoothing = 0.0;
  double edf = 0.0;

  double value(double x, bool* clamped = nullptr) const;
  /// Pointwise standard error from the coefficient covariance.
  double standard_error(double x) const;
};

struct Phase1Config {
  int intercept_basis = 10;  // cyclic, on (0, 24]
  int covariate_basis = 10;
  double variance_target = 0.99;
  std::size_t min_days = 30;
  bool refit = true;
  Smoothing intercept_smoothing;  // nullopt: GCV
  Smoothing covariate_smoothing;
  CovarianceOptions covariance;
};

struct Phase1Model {
  std::string output_id;
  SmoothTermFit intercept;
  SmoothTermFit covariate;
  EigenSystem eigen;
  double noise_variance = 0.0;
  Eigen::VectorXd grid;
  double r_squared_fixed = 0.0;
  double working_scale = 0.0;  // residual variance of the working-independence fit
  bool refit_applied = false;

  int num_components() const { return eigen.m; }
};

struct FitReport {
  std::size_t days_used = 0;
  std::size_t total_days = 0;
  std::size_t points_used = 0;
  double missing_fraction = 0.0;
  std::vector<double> gcv_scores;  // working-independence GCV at the selected smoothing
  std::vector<double> variance_explained_per_component;
  double covariance_bandwidth = 0.0;
  bool refit_fallback = false;
};

struct WorkingIndependenceFit {
  SmoothTermFit intercept;
  SmoothTermFit covariate;
  std::vector<DailyProfile> residuals;  // on each day's observed times
  PenalizedFit fit;
};

/// Pooled penalized least squares of u on [cyclic basis in t | centered basis
/// in z], points weighted equally. Throws InsufficientData below
/// `config.min_days` days.
WorkingIndependenceFit fit_working_independence(const std::vector<AlignedDay>& days, const Phase1Config& config = {});

struct RefitResult {
  SmoothTermFit intercept;
  SmoothTermFit covariate;
  bool fallback = false;  // SingularCovariance: working-independence fit kept
};

/// One generalized least squares pass with per-day weight matrices
/// Sigma_E^{-1} = (Phi diag(nu2) Phi' + sigma2 I)^{-1}; smoothing parameters
/// are frozen from `step1`.
RefitResult refit_gls(const std::vector<AlignedDay>& days, const WorkingIndependenceFit& step1,
                      const EigenSystem& eigen, double noise_variance);

struct Phase1Result {
  Phase1Model model;
  FitReport report;
  WorkingIndependenceFit step1;
};

/// Two-step fit: working independence, FPCA of the residuals, GLS refit.
Phase1Result fit_phase1(const std::vector<AlignedDay>& days, const std::string& output_id,
                        const Phase1Config& config = {}, std::optional<DayRange> window = {});

struct FixedPrediction {
  std::vector<double> values;
  std::size_t clamped = 0;  // covariate values outside the training range

  bool boundary() const { return clamped > 0; }
};

/// alpha(t_i) + f(z_i), with z clamped to the training range.
FixedPrediction predict_fixed(const Phase1Model& model, const std::vector<double>& times,
                              const std::vector<double>& z_values);

/// 1 - SSE / SST over all points, using fixed effects only.
double r_squared_fixed(const Phase1Model& model, const std::vector<AlignedDay>& days);

}  // namespace fdamon
