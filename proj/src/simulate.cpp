#include "fdamon/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "fdamon/error.hpp"
#include "fdamon/fpca.hpp"

namespace fdamon {

namespace {

constexpr const char* kModule = "simulate";
constexpr int kHours = 24;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

[[noreturn]] void invalid(const std::string& what) { throw data_error(kModule, "InvalidSpec", what); }

Eigen::VectorXd intercept_curve(int q) {
  const Eigen::VectorXd t = hourly_grid();
  Eigen::VectorXd a(kHours);
  for (int i = 0; i < kHours; ++i)
    a[i] = 2.0 + q + 0.5 * std::sin(kTwoPi * t[i] / 24.0) + 0.25 * std::cos(2.0 * kTwoPi * t[i] / 24.0);
  return a;
}

// Seasonal swing, a persistent day-to-day weather anomaly and a diurnal cycle.
double temperature(int day, double hour, double anomaly) {
  return 10.0 + 5.0 * std::sin(kTwoPi * (day - 100) / 365.0) + anomaly + 3.0 * std::sin(kTwoPi * (hour - 9.0) / 24.0);
}

}  // namespace

void SimulationSpec::validate() const {
  if (days < 1) invalid("days must be >= 1");
  if (outputs < 1) invalid("outputs must be >= 1");
  if (components < 1 || components > 2) invalid("components must be 1 or 2");
  if (static_cast<int>(nu2.size()) != components) invalid("one score variance per component required");
  for (double v : nu2)
    if (!(v > 0.0) || !std::isfinite(v)) invalid("score variances must be positive");
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) invalid("noise variance must be >= 0");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) invalid("missing rate must lie in [0, 1)");
  if (!(f_scale > 0.0)) invalid("f scale must be positive");
  if (!parse_date(start_date)) invalid("start date must be YYYY-MM-DD");
  if (covariate_id.empty() || output_prefix.empty()) invalid("series names must be non-empty");
  if (shift) {
    if (shift->tau < 1) invalid("shift day must be >= 1");
    if (shift->mu1.size() != outputs * components) invalid("shift vector must have outputs * components entries");
  }
}

double OutputTruth::f(double z) const { return f_amplitude * std::sin(z / f_scale + f_phase); }

Eigen::MatrixXd planted_eigenfunctions(int components) {
  const Eigen::VectorXd t = hourly_grid();
  const Eigen::VectorXd w = trapezoid_weights(t);
  Eigen::MatrixXd raw(2, kHours);
  raw.row(0).setOnes();
  raw.row(1) = ((t.array() - 12.5) / 11.5).matrix().transpose();
  Eigen::MatrixXd phi(components, kHours);
  for (int r = 0; r < components; ++r) {
    Eigen::VectorXd v = raw.row(r).transpose();
    for (int s = 0; s < r; ++s) v -= (phi.row(s).transpose().cwiseProduct(w).dot(v)) * phi.row(s).transpose();
    v /= std::sqrt(v.cwiseProduct(w).dot(v));
    phi.row(r) = v.transpose();
  }
  return phi;
}

SimulatedData simulate(const SimulationSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal;

  SimulatedData out;
  out.covariate_id = spec.covariate_id;
  out.origin = *parse_date(spec.start_date);
  const Eigen::VectorXd grid = hourly_grid();
  const Eigen::MatrixXd phi = planted_eigenfunctions(spec.components);
  const int m = spec.components, Q = spec.outputs, p = m * Q;

  for (int q = 0; q < Q; ++q) {
    OutputTruth t;
    t.id = spec.output_prefix + std::to_string(q + 1);
    t.grid = grid;
    t.alpha = intercept_curve(q);
    t.phi = phi;
    t.nu2 = Eigen::Map<const Eigen::VectorXd>(spec.nu2.data(), m);
    t.sigma2 = spec.sigma2;
    t.f_amplitude = spec.f_amplitude;
    t.f_scale = spec.f_scale;
    t.f_phase = 0.3 * q;
    out.output_ids.push_back(t.id);
    out.truth.push_back(std::move(t));
  }

  // values(series, day, hour); series 0 is the covariate
  const int D = spec.days;
  std::vector<Eigen::MatrixXd> values(Q + 1, Eigen::MatrixXd(D, kHours));
  out.scores.resize(D, p);
  double anomaly = 0.0;
  for (int g = 0; g < D; ++g) {
    anomaly = 0.8 * anomaly + 0.6 * 1.5 * normal(rng);
    // within-day weather: AR(1) across hours, stationary sd 2
    double weather = 2.0 * normal(rng);
    for (int h = 0; h < kHours; ++h) {
      if (h > 0) weather = 0.6 * weather + 0.8 * 2.0 * normal(rng);
      values[0](g, h) = temperature(g, grid[h], anomaly) + weather;
    }
    for (int q = 0; q < Q; ++q) {
      const OutputTruth& t = out.truth[q];
      Eigen::VectorXd xi(m);
      for (int r = 0; r < m; ++r) xi[r] = std::sqrt(t.nu2[r]) * normal(rng);
      if (spec.shift && g + 1 >= spec.shift->tau) xi += spec.shift->mu1.segment(q * m, m);
      out.scores.row(g).segment(q * m, m) = xi.transpose();
      const Eigen::VectorXd w = phi.transpose() * xi;
      for (int h = 0; h < kHours; ++h)
        values[q + 1](g, h) =
            t.alpha[h] + t.f(values[0](g, h)) + w[h] + std::sqrt(t.sigma2) * normal(rng);
    }
  }

  // The same cells are removed from every series so that alignment keeps the
  // realized missing fraction exact.
  out.total_cells = static_cast<std::size_t>(D) * kHours;
  out.removed_cells = static_cast<std::size_t>(std::llround(spec.missing_rate * static_cast<double>(out.total_cells)));
  std::vector<std::size_t> cells(out.total_cells);
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = i;
  for (std::size_t i = 0; i < out.removed_cells; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, cells.size() - 1);
    std::swap(cells[i], cells[pick(rng)]);
  }
  std::vector<bool> missing(out.total_cells, false);
  for (std::size_t i = 0; i < out.removed_cells; ++i) missing[cells[i]] = true;

  std::vector<std::string> ids{spec.covariate_id};
  ids.insert(ids.end(), out.output_ids.begin(), out.output_ids.end());
  for (int g = 0; g < D; ++g)
    for (int h = 0; h < kHours; ++h) {
      if (missing[static_cast<std::size_t>(g) * kHours + h]) continue;
      // hour 24 is midnight, stamped 00:00 of the next calendar day
      const int hour = h + 1;
      const auto date = out.origin + std::chrono::days(g + hour / 24);
      const int seconds = (hour % 24) * 3600;
      for (int s = 0; s <= Q; ++s) out.records.push_back(SensorRecord{date, seconds, ids[s], values[s](g, h)});
    }
  return out;
}

nlohmann::json truth_to_json(const SimulatedData& data, const SimulationSpec& spec) {
  using nlohmann::json;
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json outputs = json::array();
  for (const auto& t : data.truth) {
    json phi = json::array();
    for (Eigen::Index r = 0; r < t.phi.rows(); ++r) phi.push_back(vec(t.phi.row(r).transpose()));
    outputs.push_back({{"id", t.id},
                       {"grid", vec(t.grid)},
                       {"alpha", vec(t.alpha)},
                       {"phi", phi},
                       {"nu2", vec(t.nu2)},
                       {"sigma2", t.sigma2},
                       {"f", {{"amplitude", t.f_amplitude}, {"scale", t.f_scale}, {"phase", t.f_phase}}}});
  }
  json scores = json::array();
  for (Eigen::Index g = 0; g < data.scores.rows(); ++g) scores.push_back(vec(data.scores.row(g).transpose()));
  json doc = {{"format", "fdamon.truth"},
              {"version", 1},
              {"seed", spec.seed},
              {"days", spec.days},
              {"origin", format_date(data.origin)},
              {"covariate", data.covariate_id},
              {"missing_rate", spec.missing_rate},
              {"removed_cells", data.removed_cells},
              {"total_cells", data.total_cells},
              {"outputs", outputs},
              {"scores", scores}};
  if (spec.shift) doc["shift"] = {{"tau", spec.shift->tau}, {"mu1", vec(spec.shift->mu1)}};
  return doc;
}

}  // namespace fdamon
