#pragma once

// Synthetic sensor data drawn from u = alpha(t) + f(z) + sum_r xi_r phi_r(t) + eps.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "fdamon/ingest.hpp"
#include "fdamon/mewma.hpp"

namespace fdamon {

struct SimulationSpec {
  int days = 200;
  int outputs = 1;
  int components = 2;                   // planted eigenfunctions per output (1 or 2)
  std::vector<double> nu2{4.0, 1.5};   // score variances, one per component
  double sigma2 = 0.25;
  double missing_rate = 0.475;          // fraction of (day, hour) cells removed from every series
  double f_amplitude = 1.0;             // f(z) = amplitude * sin(z / f_scale + phase_q)
  double f_scale = 3.0;
  std::string start_date = "2020-01-01";
  std::string covariate_id = "temperature";
  std::string output_prefix = "mode";
  std::optional<ShiftSpec> shift;       // in stacked score space; tau counts simulated days
  std::uint64_t seed = 1;

  /// Throws InvalidSpec.
  void validate() const;
};

struct OutputTruth {
  std::string id;
  Eigen::VectorXd grid;        // 1..24
  Eigen::VectorXd alpha;       // on the grid
  Eigen::MatrixXd phi;         // components x grid, orthonormal under trapezoid weights
  Eigen::VectorXd nu2;
  double sigma2 = 0.0;
  double f_amplitude = 1.0;
  double f_scale = 3.0;
  double f_phase = 0.0;

  double f(double z) const;
};

struct SimulatedData {
  std::vector<SensorRecord> records;  // covariate first, then outputs; day-major order
  std::vector<OutputTruth> truth;
  std::vector<std::string> output_ids;
  std::string covariate_id;
  std::chrono::sys_days origin;
  Eigen::MatrixXd scores;  // days x (outputs * components), including any shift
  std::size_t removed_cells = 0;
  std::size_t total_cells = 0;
};

SimulatedData simulate(const SimulationSpec& spec);

/// Planted eigenfunctions: a daily level and a daily trend, orthonormalized on
/// the hourly grid under trapezoid weights.
Eigen::MatrixXd planted_eigenfunctions(int components);

nlohmann::json truth_to_json(const SimulatedData& data, const SimulationSpec& spec);

}  // namespace fdamon
