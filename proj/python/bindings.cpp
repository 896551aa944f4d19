#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "fdamon/arl.hpp"
#include "fdamon/error.hpp"
#include "fdamon/ingest.hpp"
#include "fdamon/mewma.hpp"
#include "fdamon/model_io.hpp"
#include "fdamon/pipeline.hpp"
#include "fdamon/scores.hpp"
#include "fdamon/simulate.hpp"
#include "fdamon/spline.hpp"

namespace py = pybind11;
using namespace fdamon;

namespace {

std::vector<Eigen::VectorXd> rows_of(const Eigen::MatrixXd& m) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(m.row(i).transpose());
  return out;
}

ProfileBundle profiles_from_csv(const std::string& text) {
  std::istringstream in(text);
  const auto records = parse_records(in);
  if (records.empty()) throw data_error("ingest", "NoRecords", "input contains no records");
  return ProfileBundle::from_records(records);
}

py::dict chart_dict(const ChartRecord& r) {
  py::dict d;
  d["day_index"] = r.day_index;
  d["t2"] = r.t2;
  d["alarm"] = r.alarm;
  d["alarm_days"] = r.alarm_days;
  d["first_passage"] = r.first_passage;
  d["first_alarm_day"] = r.first_alarm_day;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Functional-data process monitoring core";

  static py::exception<Error> base(m, "FdamonError", PyExc_RuntimeError);
  static py::exception<Error> data(m, "DataError", base.ptr());
  static py::exception<Error> numerical(m, "NumericalError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      if (e.category() == ErrorCategory::Numerical)
        py::set_error(numerical, e.what());
      else
        py::set_error(data, e.what());
    }
  });

  // Run lengths and control limits
  m.def("chi2_cdf", &chi2_cdf, py::arg("k"), py::arg("x"), py::arg("ncp") = 0.0);
  m.def("chi2_quantile", &chi2_quantile, py::arg("k"), py::arg("probability"));
  m.def(
      "arl",
      [](double lambda, int p, double h, double delta, int grid) {
        ArlOptions o;
        o.grid = grid;
        return arl(lambda, p, h, delta, o);
      },
      py::arg("lam"), py::arg("p"), py::arg("h"), py::arg("delta") = 0.0, py::arg("grid") = 100,
      "Average run length of the MEWMA chart from a Markov-chain approximation.");
  m.def(
      "arl_monte_carlo",
      [](double lambda, int p, double h, double delta, std::size_t reps, std::uint64_t seed) {
        const MonteCarloArl r = arl_monte_carlo(lambda, p, h, delta, reps, seed);
        py::dict d;
        d["mean"] = r.mean;
        d["standard_error"] = r.standard_error;
        d["replications"] = r.replications;
        d["censored"] = r.censored;
        return d;
      },
      py::arg("lam"), py::arg("p"), py::arg("h"), py::arg("delta") = 0.0, py::arg("replications") = 10000,
      py::arg("seed") = 1);
  m.def(
      "calibrate_h4",
      [](double lambda, int p, double target, double rel_tol) {
        CalibrationOptions o;
        o.rel_tolerance = rel_tol;
        return calibrate_h4(lambda, p, target, o);
      },
      py::arg("lam"), py::arg("p"), py::arg("arl0") = 370.4, py::arg("rel_tol") = 1e-9);

  // Chart
  m.def("hotelling_t2", &hotelling_t2, py::arg("xi"), py::arg("cov"));
  m.def(
      "estimate_baseline_cov",
      [](const Eigen::MatrixXd& scores) {
        const BaselineCovariance b = estimate_baseline_cov(rows_of(scores));
        return py::make_tuple(b.cov, b.condition, b.shrunk);
      },
      py::arg("scores"), "Returns (cov, condition, shrunk) from an n x p score matrix.");
  m.def(
      "run_chart",
      [](const Eigen::MatrixXd& scores, const Eigen::MatrixXd& cov, double lambda, double h4,
         std::vector<int> day_index) {
        ChartConfig c;
        c.lambda = lambda;
        c.h4 = h4;
        c.p = static_cast<int>(cov.rows());
        return chart_dict(run_chart(c, cov, rows_of(scores), day_index));
      },
      py::arg("scores"), py::arg("cov"), py::arg("lam"), py::arg("h4"), py::arg("day_index") = std::vector<int>{});

  py::class_<MewmaChart>(m, "MewmaChart")
      .def(py::init([](const Eigen::MatrixXd& cov, double lambda, double h4) {
             ChartConfig c;
             c.lambda = lambda;
             c.h4 = h4;
             c.p = static_cast<int>(cov.rows());
             return MewmaChart(c, cov);
           }),
           py::arg("cov"), py::arg("lam"), py::arg("h4"))
      .def("update",
           [](MewmaChart& c, const Eigen::VectorXd& xi) {
             const ChartStep s = c.update(xi);
             return py::make_tuple(s.t2, s.alarm);
           })
      .def("reset", &MewmaChart::reset)
      .def_property_readonly("omega", &MewmaChart::omega)
      .def_property_readonly("steps", &MewmaChart::steps);

  // Scores
  m.def("error_covariance", &error_covariance, py::arg("phi"), py::arg("nu2"), py::arg("sigma2"));
  m.def(
      "conditional_scores",
      [](const Eigen::MatrixXd& phi, const Eigen::VectorXd& nu2, double sigma2, const Eigen::VectorXd& e) {
        return conditional_scores(phi, nu2, sigma2, e).scores;
      },
      py::arg("phi"), py::arg("nu2"), py::arg("sigma2"), py::arg("residuals"),
      "phi holds one column per component, evaluated at the observed times.");

  py::class_<SplineBasis>(m, "SplineBasis")
      .def(py::init<double, double, int, bool>(), py::arg("lower"), py::arg("upper"), py::arg("num_basis"),
           py::arg("cyclic") = false)
      .def_property_readonly("num_basis", &SplineBasis::num_basis)
      .def("evaluate", [](const SplineBasis& b, double x, int deriv) { return b.evaluate(x, deriv); },
           py::arg("x"), py::arg("deriv") = 0)
      .def("design",
           [](const SplineBasis& b, const std::vector<double>& x, int deriv) { return b.design(x, deriv); },
           py::arg("x"), py::arg("deriv") = 0)
      .def("penalty", &SplineBasis::penalty);

  // Data and pipeline; documents cross the boundary as JSON text.
  m.def(
      "simulate",
      [](int days, int outputs, int components, std::vector<double> nu2, double sigma2, double missing_rate,
         std::uint64_t seed, long shift_day, std::vector<double> shift) {
        SimulationSpec s;
        s.days = days;
        s.outputs = outputs;
        s.components = components;
        s.nu2 = std::move(nu2);
        s.sigma2 = sigma2;
        s.missing_rate = missing_rate;
        s.seed = seed;
        if (shift_day > 0)
          s.shift = ShiftSpec{shift_day, Eigen::Map<const Eigen::VectorXd>(shift.data(), static_cast<Eigen::Index>(shift.size()))};
        const SimulatedData d = simulate(s);
        std::ostringstream csv;
        write_records_csv(csv, d.records);
        py::dict out;
        out["csv"] = csv.str();
        out["truth"] = truth_to_json(d, s).dump();
        out["scores"] = d.scores;
        out["output_ids"] = d.output_ids;
        return out;
      },
      py::arg("days") = 200, py::arg("outputs") = 1, py::arg("components") = 2,
      py::arg("nu2") = std::vector<double>{4.0, 1.5}, py::arg("sigma2") = 0.25, py::arg("missing_rate") = 0.475,
      py::arg("seed") = 1, py::arg("shift_day") = 0, py::arg("shift") = std::vector<double>{});
  m.def(
      "fit",
      [](const std::string& csv, const std::string& covariate, std::vector<std::string> outputs,
         std::optional<std::pair<int, int>> phase1, double variance_target, int basis, double outlier_k,
         std::size_t min_points, const std::string& policy, bool refit) {
        PipelineOptions o;
        o.covariate = covariate;
        o.outputs = std::move(outputs);
        if (phase1) o.phase1 = DayRange{phase1->first, phase1->second};
        o.phase1_config.variance_target = variance_target;
        o.phase1_config.intercept_basis = basis;
        o.phase1_config.covariate_basis = basis;
        o.phase1_config.refit = refit;
        o.outlier_k = outlier_k;
        o.min_points = min_points;
        o.policy = parse_missing_output_policy(policy);
        const FitOutcome f = fit_bundle(profiles_from_csv(csv), o);
        py::list reports;
        for (const auto& r : f.reports) {
          py::dict d;
          d["days_used"] = r.days_used;
          d["missing_fraction"] = r.missing_fraction;
          d["variance_explained"] = r.variance_explained_per_component;
          d["refit_fallback"] = r.refit_fallback;
          reports.append(d);
        }
        return py::make_tuple(serialize_bundle(f.bundle).dump(), reports);
      },
      py::arg("csv"), py::arg("covariate") = "temperature", py::arg("outputs") = std::vector<std::string>{},
      py::arg("phase1") = py::none(), py::arg("variance_target") = 0.99, py::arg("basis") = 10,
      py::arg("outlier_k") = 5.0, py::arg("min_points") = 6, py::arg("policy") = "zero-fill",
      py::arg("refit") = true, "Returns (bundle_json, reports).");
  m.def(
      "score",
      [](const std::string& bundle_json, const std::string& csv) {
        const ModelBundle b = deserialize_bundle(nlohmann::json::parse(bundle_json));
        const auto scores = score_bundle(b, profiles_from_csv(csv));
        std::vector<int> days;
        Eigen::MatrixXd mat(static_cast<Eigen::Index>(scores.size()), b.dimension());
        for (std::size_t i = 0; i < scores.size(); ++i) {
          days.push_back(scores[i].day_index);
          mat.row(static_cast<Eigen::Index>(i)) = scores[i].stacked.transpose();
        }
        return py::make_tuple(days, mat);
      },
      py::arg("bundle_json"), py::arg("csv"), "Returns (day_index, scores) for every scorable day.");
}
