// fdamon: ingest, fit, calibrate, monitor and simulate from the command line.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fdamon/arl.hpp"
#include "fdamon/error.hpp"
#include "fdamon/fpca.hpp"
#include "fdamon/ingest.hpp"
#include "fdamon/mewma.hpp"
#include "fdamon/model_io.hpp"
#include "fdamon/phase1.hpp"
#include "fdamon/pipeline.hpp"
#include "fdamon/scores.hpp"
#include "fdamon/simulate.hpp"
#include "fdamon/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fdamon;

namespace {

enum Exit { kOk = 0, kAlarm = 1, kDataError = 2, kNumericalError = 3 };

struct RunConfig {
  std::vector<std::string> inputs;
  std::string out_dir = "fdamon_out";
  std::string covariate = "temperature";
  std::vector<std::string> outputs;
  std::string phase1_days;
  std::vector<double> lambdas{0.3};
  double arl0 = 370.4;
  double variance_target = 0.99;
  int basis = 10;
  double outlier_k = 5.0;
  std::size_t min_points = 6;
  std::size_t min_days = 30;
  std::string missing_output_policy = "zero-fill";
  bool no_refit = false;
  std::string bundle;
  std::uint64_t seed = 1;
  // calibrate
  std::vector<int> dims{12};
  // simulate
  int sim_days = 200;
  int sim_outputs = 1;
  int sim_components = 2;
  double missing_rate = 0.475;
  double sigma2 = 0.25;
  std::vector<double> nu2{4.0, 1.5};
  std::string start_date = "2020-01-01";
  long shift_day = 0;
  std::vector<double> shift;
};

std::optional<DayRange> parse_day_range(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto dots = text.find("..");
  if (dots == std::string::npos) throw data_error("cli", "InvalidArgument", "day range must look like A..B");
  try {
    std::size_t used = 0;
    const std::string a = text.substr(0, dots), b = text.substr(dots + 2);
    DayRange r{std::stoi(a, &used), 0};
    if (used != a.size()) throw std::invalid_argument(a);
    r.last = std::stoi(b, &used);
    if (used != b.size()) throw std::invalid_argument(b);
    if (r.first < 1 || r.last < r.first) throw data_error("cli", "InvalidArgument", "empty day range " + text);
    return r;
  } catch (const std::logic_error&) {
    throw data_error("cli", "InvalidArgument", "bad day range '" + text + "'");
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cli", "IoError", "cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const json& doc) { open_out(path) << doc.dump(2) << '\n'; }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cli", "IoError", "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw data_error("cli", "SchemaMismatch", path.string() + ": " + e.what());
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string lambda_tag(double lambda) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", lambda);
  return buf;
}

// Profiles for every series, from CSV inputs or a profile bundle document.
ProfileBundle load_profiles(const RunConfig& cfg) {
  if (cfg.inputs.empty()) throw data_error("cli", "InvalidArgument", "no --input given");
  if (cfg.inputs.size() == 1 && fs::path(cfg.inputs[0]).extension() == ".json")
    return profile_bundle_from_json(read_json(cfg.inputs[0]));
  std::vector<SensorRecord> records;
  for (const auto& path : cfg.inputs) {
    std::ifstream in(path);
    if (!in) throw data_error("ingest", "IoError", "cannot read " + path);
    auto part = parse_records(in);
    records.insert(records.end(), part.begin(), part.end());
  }
  if (records.empty()) throw data_error("ingest", "NoRecords", "input contains no records");
  return ProfileBundle::from_records(records);
}

int cmd_ingest(const RunConfig& cfg) {
  const ProfileBundle b = load_profiles(cfg);
  const auto phase1 = parse_day_range(cfg.phase1_days);
  ProfileBundle filtered = b;
  json report = {{"origin", format_date(b.origin)}, {"last_day", b.last_day()}, {"series", json::object()}};
  const DayRange all{1, std::max(b.last_day(), 1)};
  for (auto& [name, profiles] : filtered.series) {
    auto res = filter_outliers(profiles, cfg.outlier_k, phase1);
    std::size_t points = 0;
    for (const auto& p : res.profiles) points += p.size();
    report["series"][name] = {{"days", res.profiles.size()},
                              {"points", points},
                              {"missing_fraction", missing_fraction(res.profiles, all)},
                              {"outliers_removed", res.report.removed.size()},
                              {"median", res.report.median},
                              {"mad", res.report.mad}};
    profiles = std::move(res.profiles);
  }
  fs::create_directories(cfg.out_dir);
  write_json(fs::path(cfg.out_dir) / "profiles.json", to_json(filtered));
  write_json(fs::path(cfg.out_dir) / "ingest_report.json", report);
  std::cout << report.dump(2) << '\n';
  return kOk;
}

void write_eigen_csv(const fs::path& path, const Phase1Model& m) {
  auto out = open_out(path);
  out << "t";
  for (int r = 0; r < m.eigen.m; ++r) out << ",phi_" << r + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < m.eigen.grid.size(); ++i) {
    out << fmt(m.eigen.grid[i]);
    for (int r = 0; r < m.eigen.m; ++r) out << ',' << fmt(m.eigen.functions(r, i));
    out << '\n';
  }
}

void write_effect_csv(const fs::path& path, const Phase1Model& m) {
  auto out = open_out(path);
  out << "z,f,se,lower,upper\n";
  const double lo = m.covariate.basis.lower(), hi = m.covariate.basis.upper();
  constexpr int kPoints = 101;
  for (int i = 0; i < kPoints; ++i) {
    const double z = lo + (hi - lo) * i / (kPoints - 1);
    const double f = m.covariate.value(z), se = m.covariate.standard_error(z);
    out << fmt(z) << ',' << fmt(f) << ',' << fmt(se) << ',' << fmt(f - 1.96 * se) << ',' << fmt(f + 1.96 * se) << '\n';
  }
}

int cmd_fit(const RunConfig& cfg) {
  const ProfileBundle b = load_profiles(cfg);
  if (!(cfg.variance_target > 0.0 && cfg.variance_target <= 1.0))
    throw data_error("cli", "InvalidArgument", "variance target must lie in (0, 1]");

  PipelineOptions opt;
  opt.covariate = cfg.covariate;
  opt.outputs = cfg.outputs;
  opt.phase1 = parse_day_range(cfg.phase1_days);
  opt.phase1_config.intercept_basis = cfg.basis;
  opt.phase1_config.covariate_basis = cfg.basis;
  opt.phase1_config.variance_target = cfg.variance_target;
  opt.phase1_config.min_days = cfg.min_days;
  opt.phase1_config.refit = !cfg.no_refit;
  opt.outlier_k = cfg.outlier_k;
  opt.min_points = cfg.min_points;
  opt.policy = parse_missing_output_policy(cfg.missing_output_policy);
  const FitOutcome fit = fit_bundle(b, opt);
  const ModelBundle& bundle = fit.bundle;

  fs::create_directories(cfg.out_dir);
  const fs::path dir(cfg.out_dir);
  json reports = json::object();
  for (std::size_t q = 0; q < bundle.outputs.size(); ++q) {
    const Phase1Model& m = bundle.outputs[q];
    const FitReport& r = fit.reports[q];
    const std::string& name = m.output_id;
    write_json(dir / ("model_" + name + ".json"), serialize_model(m));
    write_eigen_csv(dir / ("eigenfunctions_" + name + ".csv"), m);
    write_effect_csv(dir / ("effect_" + name + ".csv"), m);
    reports[name] = {{"days_used", r.days_used},
                     {"total_days", r.total_days},
                     {"points_used", r.points_used},
                     {"missing_fraction", r.missing_fraction},
                     {"gcv_scores", r.gcv_scores},
                     {"variance_explained_per_component", r.variance_explained_per_component},
                     {"components", m.num_components()},
                     {"noise_variance", m.noise_variance},
                     {"r_squared_fixed", m.r_squared_fixed},
                     {"covariance_bandwidth", r.covariance_bandwidth},
                     {"refit_fallback", r.refit_fallback}};
  }
  write_json(dir / "bundle.json", serialize_bundle(bundle));
  const json report = {{"phase1", {{"first", bundle.phase1.first}, {"last", bundle.phase1.last}}},
                       {"p", bundle.dimension()},
                       {"phase1_score_days", fit.phase1_scores.size()},
                       {"outputs", reports}};
  write_json(dir / "fit_report.json", report);
  std::cout << report.dump(2) << '\n';
  return kOk;
}

int cmd_calibrate(const RunConfig& cfg) {
  std::vector<CalibrationRow> rows;
  for (double lambda : cfg.lambdas)
    for (int p : cfg.dims) rows.push_back({lambda, p, cfg.arl0, calibrate_h4(lambda, p, cfg.arl0)});
  fs::create_directories(cfg.out_dir);
  auto out = open_out(fs::path(cfg.out_dir) / "calibration.csv");
  write_calibration_csv(out, rows);
  write_calibration_csv(std::cout, rows);
  return kOk;
}

int cmd_monitor(const RunConfig& cfg) {
  const fs::path dir(cfg.out_dir);
  const fs::path bundle_path = cfg.bundle.empty() ? dir / "bundle.json" : fs::path(cfg.bundle);
  const ModelBundle bundle = deserialize_bundle(read_json(bundle_path));
  const ProfileBundle b = load_profiles(cfg);
  if (b.origin != bundle.origin)
    throw data_error("cli", "OriginMismatch",
                     "data start on " + format_date(b.origin) + ", model expects day 1 = " + format_date(bundle.origin));

  const auto scores = score_bundle(bundle, b);
  if (scores.empty()) throw data_error("scores", "NoDays", "no day could be scored");

  fs::create_directories(dir);
  {
    auto out = open_out(dir / "scores.csv");
    out << "day_index,output,r,score\n";
    for (const auto& s : scores)
      for (std::size_t q = 0; q < s.per_output.size(); ++q)
        for (Eigen::Index r = 0; r < s.per_output[q].size(); ++r)
          out << s.day_index << ',' << bundle.outputs[q].output_id << ',' << r + 1 << ','
              << fmt(s.per_output[q][r]) << '\n';
    auto stacked = open_out(dir / "scores_stacked.csv");
    stacked << "day_index";
    for (int k = 1; k <= bundle.dimension(); ++k) stacked << ",s" << k;
    stacked << '\n';
    for (const auto& s : scores) {
      stacked << s.day_index;
      for (Eigen::Index k = 0; k < s.stacked.size(); ++k) stacked << ',' << fmt(s.stacked[k]);
      stacked << '\n';
    }
  }

  std::vector<Eigen::VectorXd> stream;
  std::vector<int> days;
  for (const auto& s : scores) {
    stream.push_back(s.stacked);
    days.push_back(s.day_index);
  }

  // Serial dependence check on the unsmoothed Phase-I statistic.
  std::vector<double> phase1_t2;
  for (const auto& s : scores)
    if (bundle.phase1.contains(s.day_index)) phase1_t2.push_back(hotelling_t2(s.stacked, bundle.baseline_cov));
  json lb = nullptr;
  const int lags = std::min<int>(10, static_cast<int>(phase1_t2.size()) / 5);
  if (lags >= 1) {
    const LjungBox test = ljung_box(phase1_t2, lags);
    lb = {{"statistic", test.statistic}, {"p_value", test.p_value}, {"lags", test.lags}};
    if (test.p_value < 0.05)
      warn("chart", "Phase-I Hotelling T^2 values show serial correlation (Ljung-Box p = " + fmt(test.p_value) + ")");
  }

  bool phase2_alarm = false;
  json report = {{"p", bundle.dimension()},
                 {"days_scored", scores.size()},
                 {"ljung_box_phase1", lb},
                 {"charts", json::array()}};
  for (double lambda : cfg.lambdas) {
    ChartConfig cc{lambda, cfg.arl0, bundle.dimension(), 0.0};
    cc.h4 = calibrate_h4(lambda, cc.p, cfg.arl0);
    const ChartRecord rec = run_chart(cc, bundle.baseline_cov, stream, days);

    std::vector<int> phase2_alarms;
    for (std::size_t i = 0; i < rec.t2.size(); ++i)
      if (rec.alarm[i] && rec.day_index[i] > bundle.phase1.last) phase2_alarms.push_back(rec.day_index[i]);
    phase2_alarm = phase2_alarm || !phase2_alarms.empty();

    const std::string tag = lambda_tag(lambda);
    auto csv = open_out(dir / ("chart_lambda" + tag + ".csv"));
    write_chart_csv(csv, rec);
    auto svg = open_out(dir / ("chart_lambda" + tag + ".svg"));
    SvgChartOptions so;
    so.title = "MEWMA chart, lambda = " + tag + ", h4 = " + fmt(cc.h4);
    so.threshold = cc.h4;
    so.divider = bundle.phase1.last + 0.5;
    write_chart_svg(svg, rec, so);

    json first_phase2 = nullptr;
    if (!phase2_alarms.empty()) first_phase2 = phase2_alarms.front();
    report["charts"].push_back({{"lambda", lambda},
                                {"h4", cc.h4},
                                {"alarm_days", rec.alarm_days},
                                {"phase2_alarm_days", phase2_alarms},
                                {"first_phase2_alarm", first_phase2}});
  }
  write_json(dir / "monitor_report.json", report);
  std::cout << report.dump(2) << '\n';
  return phase2_alarm ? kAlarm : kOk;
}

int cmd_simulate(const RunConfig& cfg) {
  SimulationSpec spec;
  spec.days = cfg.sim_days;
  spec.outputs = cfg.sim_outputs;
  spec.components = cfg.sim_components;
  spec.nu2 = cfg.nu2;
  spec.sigma2 = cfg.sigma2;
  spec.missing_rate = cfg.missing_rate;
  spec.start_date = cfg.start_date;
  spec.covariate_id = cfg.covariate;
  spec.seed = cfg.seed;
  if (cfg.shift_day > 0 || !cfg.shift.empty()) {
    ShiftSpec s;
    s.tau = cfg.shift_day > 0 ? cfg.shift_day : 1;
    s.mu1 = Eigen::Map<const Eigen::VectorXd>(cfg.shift.data(), static_cast<Eigen::Index>(cfg.shift.size()));
    spec.shift = s;
  }
  const SimulatedData data = simulate(spec);
  fs::create_directories(cfg.out_dir);
  auto out = open_out(fs::path(cfg.out_dir) / "data.csv");
  write_records_csv(out, data.records);
  write_json(fs::path(cfg.out_dir) / "truth.json", truth_to_json(data, spec));
  std::cout << "wrote " << data.records.size() << " records for " << spec.days << " days ("
            << data.removed_cells << " of " << data.total_cells << " cells removed)\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariate-adjusted functional monitoring of daily sensor profiles"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML-style key = value configuration file; flags take precedence");

  RunConfig cfg;
  app.add_option("--input,-i", cfg.inputs, "Input CSV file(s) or a profiles.json document");
  app.add_option("--out-dir,-o", cfg.out_dir, "Output directory");
  app.add_option("--covariate", cfg.covariate, "Covariate series id");
  app.add_option("--outputs", cfg.outputs, "Output series ids (default: all but the covariate)");
  app.add_option("--phase1-days", cfg.phase1_days, "Phase-I day range A..B (1-based, inclusive)");
  app.add_option("--lambda", cfg.lambdas, "MEWMA smoothing constant(s) in (0, 1]");
  app.add_option("--arl0", cfg.arl0, "Target in-control ARL");
  app.add_option("--variance-target", cfg.variance_target, "Cumulative variance fraction for choosing m");
  app.add_option("--basis", cfg.basis, "Spline basis dimension for intercept and covariate effect");
  app.add_option("--outlier-k", cfg.outlier_k, "Outlier threshold in MAD units (inf disables)");
  app.add_option("--min-points", cfg.min_points, "Minimum observations per usable day");
  app.add_option("--min-days", cfg.min_days, "Minimum usable Phase-I days");
  app.add_option("--missing-output-policy", cfg.missing_output_policy, "zero-fill or skip-day")
      ->check(CLI::IsMember({"zero-fill", "skip-day"}));
  app.add_flag("--no-refit", cfg.no_refit, "Skip the generalized least squares refit");
  app.add_option("--bundle", cfg.bundle, "Model bundle for monitor (default: OUT_DIR/bundle.json)");
  app.add_option("--seed", cfg.seed, "Random seed");
  app.add_option("--p", cfg.dims, "Score dimension(s) for calibrate");
  app.add_option("--days", cfg.sim_days, "Simulated days");
  app.add_option("--num-outputs", cfg.sim_outputs, "Simulated output series");
  app.add_option("--components", cfg.sim_components, "Planted eigenfunctions per output (1 or 2)");
  app.add_option("--missing-rate", cfg.missing_rate, "Fraction of hourly cells removed");
  app.add_option("--sigma2", cfg.sigma2, "White-noise variance");
  app.add_option("--nu2", cfg.nu2, "Score variances, one per component");
  app.add_option("--start-date", cfg.start_date, "Date of simulated day 1 (YYYY-MM-DD)");
  app.add_option("--shift-day", cfg.shift_day, "First shifted day (1-based)");
  app.add_option("--shift", cfg.shift, "Score shift vector added from --shift-day on");

  auto* ingest = app.add_subcommand("ingest", "Parse CSV input into daily profiles");
  auto* fit = app.add_subcommand("fit", "Fit the Phase-I model for every output");
  auto* monitor = app.add_subcommand("monitor", "Score days and run the MEWMA chart");
  auto* calibrate = app.add_subcommand("calibrate", "Calibrate thresholds to the target ARL");
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic data set");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kDataError;
  }

  try {
    if (*ingest) return cmd_ingest(cfg);
    if (*fit) return cmd_fit(cfg);
    if (*monitor) return cmd_monitor(cfg);
    if (*calibrate) return cmd_calibrate(cfg);
    if (*sim) return cmd_simulate(cfg);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.category() == ErrorCategory::Numerical ? kNumericalError : kDataError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalError;
  }
  return kDataError;
}
