#pragma once

// Versioned JSON documents for fitted models.

#include <chrono>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "fdamon/ingest.hpp"
#include "fdamon/phase1.hpp"
#include "fdamon/scores.hpp"

namespace fdamon {

inline constexpr const char* kModelFormat = "fdamon.model";
inline constexpr const char* kBundleFormat = "fdamon.bundle";
inline constexpr int kModelVersion = 1;

nlohmann::json serialize_model(const Phase1Model& model);
/// Throws SchemaMismatch for missing/ill-shaped fields and VersionMismatch for
/// an unknown version.
Phase1Model deserialize_model(const nlohmann::json& doc);

/// Everything `monitor` needs: per-output models, the covariate name, the
/// Phase-I window and the baseline score covariance.
struct ModelBundle {
  std::string covariate;
  std::vector<Phase1Model> outputs;
  std::chrono::sys_days origin{};
  DayRange phase1{0, 0};
  Eigen::MatrixXd baseline_cov;  // p x p
  std::size_t min_points = 6;
  double outlier_k = 5.0;
  MissingOutputPolicy policy = MissingOutputPolicy::ZeroFill;

  int dimension() const;
};

nlohmann::json serialize_bundle(const ModelBundle& bundle);
ModelBundle deserialize_bundle(const nlohmann::json& doc);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& doc, const std::string& field);

}  // namespace fdamon
