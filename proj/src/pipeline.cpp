#include "fdamon/pipeline.hpp"

#include <algorithm>

#include "fdamon/error.hpp"
#include "fdamon/mewma.hpp"

namespace fdamon {

namespace {

const std::vector<DailyProfile>& series_or_throw(const ProfileBundle& b, const std::string& id) {
  auto it = b.series.find(id);
  if (it == b.series.end()) throw data_error("ingest", "MissingSeries", "series '" + id + "' not found in the input");
  return it->second;
}

}  // namespace

std::vector<AlignedDay> prepare_output(const ProfileBundle& data, const std::string& output,
                                       const std::string& covariate, double outlier_k,
                                       std::optional<DayRange> reference) {
  const auto u = filter_outliers(series_or_throw(data, output), outlier_k, reference);
  const auto z = filter_outliers(series_or_throw(data, covariate), outlier_k, reference);
  if (!u.report.removed.empty())
    warn("ingest", output + ": " + std::to_string(u.report.removed.size()) + " outlying point(s) removed");
  if (!z.report.removed.empty())
    warn("ingest", covariate + ": " + std::to_string(z.report.removed.size()) + " outlying point(s) removed");
  return align_series(u.profiles, z.profiles);
}

FitOutcome fit_bundle(const ProfileBundle& data, const PipelineOptions& o) {
  std::vector<std::string> names = o.outputs;
  if (names.empty())
    for (const auto& [name, profiles] : data.series)
      if (name != o.covariate) names.push_back(name);
  if (names.empty()) throw data_error("phase1", "InsufficientData", "no output series besides the covariate");
  const DayRange window = o.phase1.value_or(DayRange{1, std::max(data.last_day(), 1)});

  FitOutcome out;
  ModelBundle& b = out.bundle;
  b.covariate = o.covariate;
  b.origin = data.origin;
  b.phase1 = window;
  b.min_points = o.min_points;
  b.outlier_k = o.outlier_k;
  b.policy = o.policy;

  std::vector<std::vector<AlignedDay>> aligned;
  for (const auto& name : names) {
    std::vector<AlignedDay> days;
    for (auto& d : prepare_output(data, name, o.covariate, o.outlier_k, window))
      if (window.contains(d.day_index)) days.push_back(std::move(d));
    days = usable_profiles(days, o.min_points);
    if (days.empty()) throw data_error("phase1", "InsufficientData", "no usable Phase-I days for '" + name + "'");
    Phase1Result res = fit_phase1(days, name, o.phase1_config, window);
    out.reports.push_back(res.report);
    b.outputs.push_back(std::move(res.model));
    aligned.push_back(std::move(days));
  }

  const ScoreModel sm(b.outputs, b.min_points, b.policy);
  out.phase1_scores = sm.score_series(aligned, window);
  b.baseline_cov = estimate_baseline_cov(out.phase1_scores).cov;
  return out;
}

std::vector<DayScores> score_bundle(const ModelBundle& bundle, const ProfileBundle& data,
                                    std::optional<DayRange> window) {
  std::vector<std::vector<AlignedDay>> aligned;
  for (const auto& m : bundle.outputs)
    aligned.push_back(prepare_output(data, m.output_id, bundle.covariate, bundle.outlier_k, bundle.phase1));
  const ScoreModel sm(bundle.outputs, bundle.min_points, bundle.policy);
  return sm.score_series(aligned, window);
}

}  // namespace fdamon
