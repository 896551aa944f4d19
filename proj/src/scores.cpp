#include "fdamon/scores.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "fdamon/error.hpp"

namespace fdamon {

namespace {
constexpr const char* kModule = "scores";
constexpr double kMaxCondition = 1e12;
constexpr double kJitter = 1e-8;
}  // namespace

Eigen::MatrixXd error_covariance(const Eigen::MatrixXd& phi, const Eigen::VectorXd& nu2, double sigma2) {
  if (phi.cols() != nu2.size())
    throw data_error(kModule, "InvalidDimension", "eigenfunction count does not match score variances");
  Eigen::MatrixXd sigma = phi * nu2.asDiagonal() * phi.transpose();
  sigma.diagonal().array() += sigma2;
  return sigma;
}

ConditionalScores conditional_scores(const Eigen::MatrixXd& phi, const Eigen::VectorXd& nu2, double sigma2,
                                     const Eigen::VectorXd& residuals) {
  const Eigen::Index n = residuals.size();
  if (phi.rows() != n) throw data_error(kModule, "InvalidDimension", "eigenfunction rows must match residuals");
  ConditionalScores out;
  if (phi.cols() == 0) {
    out.scores.resize(0);
    return out;
  }
  Eigen::MatrixXd sigma = error_covariance(phi, nu2, sigma2);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
  const double hi = es.eigenvalues().maxCoeff();
  const double lo = es.eigenvalues().minCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxCondition) {
    const double jitter = kJitter * sigma.trace() / static_cast<double>(n);
    sigma.diagonal().array() += jitter;
    out.jittered = true;
    warn(kModule, "IllConditioned: error covariance condition number " + std::to_string(lo > 0 ? hi / lo : INFINITY) +
                      ", added jitter " + std::to_string(jitter));
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw numerical_error(kModule, "IllConditioned", "error covariance is not positive definite");
  const Eigen::VectorXd solved = llt.solve(residuals);
  out.scores = nu2.asDiagonal() * (phi.transpose() * solved);
  return out;
}

ResidualVector residuals_for_day(const Phase1Model& model, const AlignedDay& day) {
  if (day.size() == 0) throw data_error(kModule, "EmptyDay", "day " + std::to_string(day.day_index));
  const FixedPrediction pred = predict_fixed(model, day.times, day.z_values);
  ResidualVector out;
  out.values.resize(static_cast<Eigen::Index>(day.size()));
  for (std::size_t i = 0; i < day.size(); ++i) out.values[i] = day.u_values[i] - pred.values[i];
  out.boundary = pred.boundary();
  return out;
}

OutputScores estimate_day_scores(const Phase1Model& model, const AlignedDay& day, std::size_t min_points) {
  if (day.size() < min_points)
    throw data_error(kModule, "InsufficientPoints",
                     "day " + std::to_string(day.day_index) + " has " + std::to_string(day.size()) + " < " +
                         std::to_string(min_points) + " points");
  const ResidualVector res = residuals_for_day(model, day);
  const Eigen::MatrixXd phi = model.eigen.evaluate(day.times);
  ConditionalScores cs = conditional_scores(phi, model.eigen.values, model.noise_variance, res.values);
  return OutputScores{std::move(cs.scores), day.size(), res.boundary, cs.jittered};
}

std::string to_string(MissingOutputPolicy policy) {
  return policy == MissingOutputPolicy::ZeroFill ? "zero-fill" : "skip-day";
}

MissingOutputPolicy parse_missing_output_policy(const std::string& text) {
  if (text == "zero-fill") return MissingOutputPolicy::ZeroFill;
  if (text == "skip-day") return MissingOutputPolicy::SkipDay;
  throw data_error(kModule, "InvalidArgument", "unknown missing-output policy '" + text + "'");
}

bool DayScores::boundary() const {
  return std::any_of(boundary_flag.begin(), boundary_flag.end(), [](bool b) { return b; });
}

std::optional<DayScores> stack_scores(int day_index, const std::vector<std::optional<OutputScores>>& per_output,
                                      const std::vector<int>& dims, MissingOutputPolicy policy) {
  if (per_output.size() != dims.size())
    throw data_error(kModule, "InvalidDimension", "one score block per output required");
  const bool any = std::any_of(per_output.begin(), per_output.end(), [](const auto& s) { return s.has_value(); });
  if (!any) throw data_error(kModule, "AllOutputsMissing", "day " + std::to_string(day_index));

  DayScores out;
  out.day_index = day_index;
  int p = 0;
  for (int d : dims) p += d;
  out.stacked = Eigen::VectorXd::Zero(p);
  int offset = 0;
  for (std::size_t q = 0; q < dims.size(); ++q) {
    const auto& s = per_output[q];
    if (s) {
      if (s->scores.size() != dims[q])
        throw data_error(kModule, "InvalidDimension", "output " + std::to_string(q) + " score length mismatch");
      out.per_output.push_back(s->scores);
      out.observed_count.push_back(s->observed);
      out.boundary_flag.push_back(s->boundary);
      out.zero_filled.push_back(false);
      out.stacked.segment(offset, dims[q]) = s->scores;
    } else {
      if (policy == MissingOutputPolicy::SkipDay) return std::nullopt;
      out.per_output.push_back(Eigen::VectorXd::Zero(dims[q]));
      out.observed_count.push_back(0);
      out.boundary_flag.push_back(false);
      out.zero_filled.push_back(true);
    }
    offset += dims[q];
  }
  return out;
}

ScoreModel::ScoreModel(std::vector<Phase1Model> models, std::size_t min_points, MissingOutputPolicy policy)
    : models_(std::move(models)), min_points_(min_points), policy_(policy) {
  if (models_.empty()) throw data_error(kModule, "InvalidArgument", "no output models");
  if (dimension() <= 0) throw data_error(kModule, "InvalidArgument", "score dimension must be positive");
}

int ScoreModel::dimension() const {
  int p = 0;
  for (const auto& m : models_) p += m.num_components();
  return p;
}

std::vector<int> ScoreModel::dims() const {
  std::vector<int> d;
  for (const auto& m : models_) d.push_back(m.num_components());
  return d;
}

std::optional<DayScores> ScoreModel::score_day(int day_index,
                                               const std::vector<std::optional<AlignedDay>>& per_output) const {
  if (per_output.size() != models_.size())
    throw data_error(kModule, "InvalidDimension", "one aligned day per output required");
  std::vector<std::optional<OutputScores>> scores(models_.size());
  for (std::size_t q = 0; q < models_.size(); ++q) {
    const auto& day = per_output[q];
    if (!day || day->size() < min_points_) continue;
    scores[q] = estimate_day_scores(models_[q], *day, min_points_);
  }
  auto stacked = stack_scores(day_index, scores, dims(), policy_);
  if (stacked) {
    for (std::size_t q = 0; q < models_.size(); ++q)
      if (stacked->zero_filled[q])
        warn(kModule, "day " + std::to_string(day_index) + ": output '" + models_[q].output_id + "' zero-filled");
  }
  return stacked;
}

std::vector<DayScores> ScoreModel::score_series(const std::vector<std::vector<AlignedDay>>& aligned_per_output,
                                                std::optional<DayRange> window) const {
  if (aligned_per_output.size() != models_.size())
    throw data_error(kModule, "InvalidDimension", "one aligned series per output required");
  std::vector<std::map<int, const AlignedDay*>> lookup(models_.size());
  std::set<int> all_days;
  for (std::size_t q = 0; q < models_.size(); ++q)
    for (const auto& d : aligned_per_output[q]) {
      if (window && !window->contains(d.day_index)) continue;
      lookup[q][d.day_index] = &d;
      all_days.insert(d.day_index);
    }
  std::vector<DayScores> out;
  for (int day : all_days) {
    std::vector<std::optional<AlignedDay>> per(models_.size());
    for (std::size_t q = 0; q < models_.size(); ++q) {
      auto it = lookup[q].find(day);
      if (it != lookup[q].end()) per[q] = *it->second;
    }
    try {
      auto s = score_day(day, per);
      if (s) out.push_back(std::move(*s));
    } catch (const Error& e) {
      if (e.kind() != "AllOutputsMissing") throw;
      warn(kModule, std::string(e.what()) + "; day skipped");
    }
  }
  return out;
}

}  // namespace fdamon
