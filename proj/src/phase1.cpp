#include "fdamon/phase1.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fdamon/error.hpp"
#include "fdamon/scores.hpp"

namespace fdamon {

namespace {

constexpr const char* kModule = "phase1";
constexpr double kDayLength = 24.0;

struct Pooled {
  std::vector<double> t, z, u;
};

Pooled pool(const std::vector<AlignedDay>& days) {
  Pooled p;
  for (const auto& d : days) {
    p.t.insert(p.t.end(), d.times.begin(), d.times.end());
    p.z.insert(p.z.end(), d.z_values.begin(), d.z_values.end());
    p.u.insert(p.u.end(), d.u_values.begin(), d.u_values.end());
  }
  return p;
}

SmoothTermFit term_from(const PenalizedFit& fit, std::size_t b, const SplineBasis& basis) {
  SmoothTermFit term;
  term.basis = basis;
  term.coefficients = fit.coefficients[b];
  term.covariance = fit.block_covariance(b);
  term.smoothing = fit.smoothing[b];
  term.edf = fit.edf_blocks[b];
  return term;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd joint_design(const SmoothTermFit& intercept, const SmoothTermFit& covariate,
                             const std::vector<double>& t, const std::vector<double>& z) {
  const Eigen::Index la = intercept.basis.num_basis(), lf = covariate.basis.num_basis();
  Eigen::MatrixXd X(t.size(), la + lf);
  X.leftCols(la) = intercept.basis.design(t);
  std::vector<double> zc(z);
  for (auto& v : zc) v = std::clamp(v, covariate.basis.lower(), covariate.basis.upper());
  X.rightCols(lf) = covariate.basis.design(zc);
  return X;
}

}  // namespace

double SmoothTermFit::value(double x, bool* clamped) const { return basis.evaluate(x, 0, clamped).dot(coefficients); }

double SmoothTermFit::standard_error(double x) const {
  if (covariance.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd b = basis.evaluate(x);
  return std::sqrt(std::max(b.dot(covariance * b), 0.0));
}

WorkingIndependenceFit fit_working_independence(const std::vector<AlignedDay>& days, const Phase1Config& config) {
  if (days.size() < config.min_days)
    throw data_error(kModule, "InsufficientData",
                     std::to_string(days.size()) + " usable day(s), at least " + std::to_string(config.min_days) +
                         " required");
  const Pooled p = pool(days);
  const auto [zmin_it, zmax_it] = std::minmax_element(p.z.begin(), p.z.end());
  if (p.z.empty() || !(*zmax_it > *zmin_it))
    throw data_error(kModule, "InsufficientData", "covariate has no spread over the training days");

  const SplineBasis alpha_basis(0.0, kDayLength, config.intercept_basis, true);
  const SplineBasis f_basis(*zmin_it, *zmax_it, config.covariate_basis, false);

  std::vector<SmoothBlock> blocks{
      {alpha_basis.design(p.t), alpha_basis.penalty(), false},
      {f_basis.design(p.z), f_basis.penalty(), true},
  };
  PenalizedFit fit =
      fit_penalized(blocks, to_vector(p.u), Eigen::VectorXd(), {config.intercept_smoothing, config.covariate_smoothing});

  WorkingIndependenceFit out;
  out.intercept = term_from(fit, 0, alpha_basis);
  out.covariate = term_from(fit, 1, f_basis);
  std::size_t offset = 0;
  for (const auto& d : days) {
    DailyProfile r;
    r.day_index = d.day_index;
    r.times = d.times;
    r.values.assign(fit.residuals.data() + offset, fit.residuals.data() + offset + d.size());
    offset += d.size();
    out.residuals.push_back(std::move(r));
  }
  out.fit = std::move(fit);
  return out;
}

RefitResult refit_gls(const std::vector<AlignedDay>& days, const WorkingIndependenceFit& step1,
                      const EigenSystem& eigen, double noise_variance) {
  RefitResult result{step1.intercept, step1.covariate, false};
  const Eigen::Index k = step1.intercept.basis.num_basis() + step1.covariate.basis.num_basis();

  CrossProducts cp{Eigen::MatrixXd::Zero(k, k), Eigen::VectorXd::Zero(k), 0.0, 0.0};
  double diag_sum = 0.0;
  for (const auto& d : days) {
    const Eigen::MatrixXd X = joint_design(step1.intercept, step1.covariate, d.times, d.z_values);
    const Eigen::VectorXd y = to_vector(d.u_values);
    const Eigen::MatrixXd phi = eigen.m > 0 ? eigen.evaluate(d.times) : Eigen::MatrixXd(d.size(), 0);
    const Eigen::MatrixXd sigma = error_covariance(phi, eigen.values, noise_variance);
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
      warn(kModule, "SingularCovariance on day " + std::to_string(d.day_index) +
                        "; keeping the working-independence fit");
      result.fallback = true;
      return result;
    }
    const Eigen::MatrixXd LX = llt.matrixL().solve(X);
    const Eigen::VectorXd Ly = llt.matrixL().solve(y);
    cp.xtwx.noalias() += LX.transpose() * LX;
    cp.xtwy.noalias() += LX.transpose() * Ly;
    cp.ytwy += Ly.squaredNorm();
    cp.n += static_cast<double>(d.size());
    diag_sum += sigma.diagonal().sum();
  }
  // Step-1 smoothing parameters act on the unit-variance scale; rescale by the
  // mean error variance so that Sigma = s * I reproduces the step-1 solution.
  const double ref_scale = diag_sum / cp.n;
  std::vector<double> lambdas = step1.fit.smoothing;
  for (auto& l : lambdas) l /= ref_scale;

  try {
    PenalizedFit fit = solve_penalized(step1.fit.terms, cp, lambdas, 1.0);
    result.intercept = term_from(fit, 0, step1.intercept.basis);
    result.covariate = term_from(fit, 1, step1.covariate.basis);
  } catch (const Error& e) {
    if (e.kind() != "SingularSystem") throw;
    warn(kModule, std::string("SingularCovariance: ") + e.what() + "; keeping the working-independence fit");
    result.fallback = true;
  }
  return result;
}

Phase1Result fit_phase1(const std::vector<AlignedDay>& days, const std::string& output_id,
                        const Phase1Config& config, std::optional<DayRange> window) {
  Phase1Result res;
  res.step1 = fit_working_independence(days, config);

  const Eigen::VectorXd grid = hourly_grid();
  const CovarianceEstimate cov = estimate_covariance(res.step1.residuals, grid, config.covariance);
  EigenSystem eigen = eigendecompose(cov, config.variance_target);
  const double sigma2 = estimate_noise_variance(cov);

  Phase1Model& model = res.model;
  model.output_id = output_id;
  model.grid = grid;
  model.eigen = std::move(eigen);
  model.noise_variance = sigma2;
  model.working_scale = res.step1.fit.scale;
  model.intercept = res.step1.intercept;
  model.covariate = res.step1.covariate;
  if (config.refit) {
    RefitResult refit = refit_gls(days, res.step1, model.eigen, sigma2);
    model.intercept = std::move(refit.intercept);
    model.covariate = std::move(refit.covariate);
    model.refit_applied = !refit.fallback;
    res.report.refit_fallback = refit.fallback;
  }
  model.r_squared_fixed = r_squared_fixed(model, days);

  FitReport& rep = res.report;
  rep.days_used = days.size();
  for (const auto& d : days) rep.points_used += d.size();
  DayRange w = window.value_or(DayRange{days.front().day_index, days.back().day_index});
  rep.total_days = static_cast<std::size_t>(w.length());
  rep.missing_fraction = missing_fraction(days, w);
  rep.gcv_scores = {res.step1.fit.gcv};
  rep.covariance_bandwidth = cov.bandwidth;
  for (int r = 0; r < model.eigen.m; ++r)
    rep.variance_explained_per_component.push_back(model.eigen.explained[r] - (r > 0 ? model.eigen.explained[r - 1] : 0.0));
  return res;
}

FixedPrediction predict_fixed(const Phase1Model& model, const std::vector<double>& times,
                              const std::vector<double>& z_values) {
  if (times.size() != z_values.size())
    throw data_error(kModule, "InvalidDimension", "times and covariate values differ in length");
  FixedPrediction out;
  out.values.resize(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    bool clamped = false;
    out.values[i] = model.intercept.value(times[i]) + model.covariate.value(z_values[i], &clamped);
    out.clamped += clamped ? 1 : 0;
  }
  return out;
}

double r_squared_fixed(const Phase1Model& model, const std::vector<AlignedDay>& days) {
  double sum = 0.0, n = 0.0;
  for (const auto& d : days)
    for (double u : d.u_values) sum += u, n += 1.0;
  if (n == 0.0) throw data_error(kModule, "InsufficientData", "no points for R^2");
  const double mean = sum / n;
  double sse = 0.0, sst = 0.0;
  for (const auto& d : days) {
    const auto pred = predict_fixed(model, d.times, d.z_values);
    for (std::size_t i = 0; i < d.size(); ++i) {
      sse += (d.u_values[i] - pred.values[i]) * (d.u_values[i] - pred.values[i]);
      sst += (d.u_values[i] - mean) * (d.u_values[i] - mean);
    }
  }
  if (sst == 0.0) return sse == 0.0 ? 1.0 : 0.0;
  return std::clamp(1.0 - sse / sst, 0.0, 1.0);
}

}  // namespace fdamon
