#pragma once

// Whole-data-set steps shared by the command line tool and the Python module.

#include <optional>
#include <string>
#include <vector>

#include "fdamon/ingest.hpp"
#include "fdamon/model_io.hpp"
#include "fdamon/phase1.hpp"
#include "fdamon/scores.hpp"

namespace fdamon {

struct PipelineOptions {
  std::string covariate = "temperature";
  std::vector<std::string> outputs;  // empty: every series except the covariate
  std::optional<DayRange> phase1;    // default: all days
  Phase1Config phase1_config;
  double outlier_k = 5.0;
  std::size_t min_points = 6;
  MissingOutputPolicy policy = MissingOutputPolicy::ZeroFill;
};

/// Outlier screening (median/MAD from the reference window) of the output and
/// the covariate, followed by alignment.
std::vector<AlignedDay> prepare_output(const ProfileBundle& data, const std::string& output,
                                       const std::string& covariate, double outlier_k,
                                       std::optional<DayRange> reference);

struct FitOutcome {
  ModelBundle bundle;
  std::vector<FitReport> reports;     // one per output
  std::vector<DayScores> phase1_scores;
};

/// Fits every output on its Phase-I days and estimates the baseline score
/// covariance from the Phase-I scores.
FitOutcome fit_bundle(const ProfileBundle& data, const PipelineOptions& options);

/// Scores every day of `data` (Phase I and later) with the bundle's models.
std::vector<DayScores> score_bundle(const ModelBundle& bundle, const ProfileBundle& data,
                                    std::optional<DayRange> window = {});

}  // namespace fdamon
