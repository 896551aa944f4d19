#include "fdamon/model_io.hpp"

#include <cmath>

#include "fdamon/error.hpp"

namespace fdamon {

using nlohmann::json;

namespace {

constexpr const char* kModule = "model_io";

[[noreturn]] void schema(const std::string& what) { throw data_error(kModule, "SchemaMismatch", what); }

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& doc, const std::string& field, Eigen::Index expected = -1) {
  if (!doc.contains(field) || !doc.at(field).is_array()) schema("missing array '" + field + "'");
  const auto v = doc.at(field).get<std::vector<double>>();
  if (expected >= 0 && static_cast<Eigen::Index>(v.size()) != expected)
    schema("'" + field + "' has length " + std::to_string(v.size()) + ", expected " + std::to_string(expected));
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json term_to_json(const SmoothTermFit& t) {
  return {{"basis",
           {{"lower", t.basis.lower()},
            {"upper", t.basis.upper()},
            {"num_basis", t.basis.num_basis()},
            {"cyclic", t.basis.cyclic()}}},
          {"coefficients", vector_to_json(t.coefficients)},
          {"covariance", matrix_to_json(t.covariance)},
          {"smoothing", t.smoothing},
          {"edf", t.edf}};
}

SmoothTermFit term_from_json(const json& doc) {
  const json& b = doc.at("basis");
  SmoothTermFit t;
  t.basis = SplineBasis(b.at("lower").get<double>(), b.at("upper").get<double>(), b.at("num_basis").get<int>(),
                        b.at("cyclic").get<bool>());
  t.coefficients = vector_from_json(doc, "coefficients", t.basis.num_basis());
  t.covariance = matrix_from_json(doc, "covariance");
  if (t.covariance.size() && (t.covariance.rows() != t.basis.num_basis() || t.covariance.cols() != t.basis.num_basis()))
    schema("coefficient covariance shape does not match basis");
  t.smoothing = doc.at("smoothing").get<double>();
  t.edf = doc.at("edf").get<double>();
  return t;
}

void check_header(const json& doc, const char* format) {
  if (!doc.is_object() || !doc.contains("format") || !doc.contains("version"))
    schema("document lacks format/version header");
  if (doc.at("format") != format) schema("expected format '" + std::string(format) + "'");
  if (!doc.at("version").is_number_integer() || doc.at("version").get<int>() != kModelVersion)
    throw data_error(kModule, "VersionMismatch",
                     "version " + doc.at("version").dump() + ", supported " + std::to_string(kModelVersion));
}

}  // namespace

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::VectorXd r = m.row(i).transpose();
    rows.push_back(vector_to_json(r));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Eigen::MatrixXd matrix_from_json(const json& doc, const std::string& field) {
  if (!doc.contains(field)) schema("missing matrix '" + field + "'");
  const json& j = doc.at(field);
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const json& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows)
    schema("matrix '" + field + "' row count does not match its shape");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto r = data.at(i).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(r.size()) != cols) schema("matrix '" + field + "' row length does not match its shape");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = r[k];
  }
  return m;
}

json serialize_model(const Phase1Model& model) {
  const EigenSystem& e = model.eigen;
  return {{"format", kModelFormat},
          {"version", kModelVersion},
          {"output_id", model.output_id},
          {"shape", {{"grid", model.grid.size()}, {"components", e.m}, {"spectrum", e.all_values.size()}}},
          {"grid", vector_to_json(model.grid)},
          {"intercept", term_to_json(model.intercept)},
          {"covariate", term_to_json(model.covariate)},
          {"eigen",
           {{"grid", vector_to_json(e.grid)},
            {"weights", vector_to_json(e.weights)},
            {"functions", matrix_to_json(e.functions)},
            {"values", vector_to_json(e.values)},
            {"explained", vector_to_json(e.explained)},
            {"all_values", vector_to_json(e.all_values)}}},
          {"noise_variance", model.noise_variance},
          {"r_squared_fixed", model.r_squared_fixed},
          {"working_scale", model.working_scale},
          {"refit_applied", model.refit_applied}};
}

Phase1Model deserialize_model(const json& doc) {
  check_header(doc, kModelFormat);
  try {
    Phase1Model model;
    const json& shape = doc.at("shape");
    const auto n = shape.at("grid").get<Eigen::Index>();
    const auto m = shape.at("components").get<int>();
    const auto s = shape.at("spectrum").get<Eigen::Index>();
    model.output_id = doc.at("output_id").get<std::string>();
    model.grid = vector_from_json(doc, "grid", n);
    model.intercept = term_from_json(doc.at("intercept"));
    model.covariate = term_from_json(doc.at("covariate"));
    const json& e = doc.at("eigen");
    model.eigen.m = m;
    model.eigen.grid = vector_from_json(e, "grid", n);
    model.eigen.weights = vector_from_json(e, "weights", n);
    model.eigen.functions = matrix_from_json(e, "functions");
    if (model.eigen.functions.rows() != m || model.eigen.functions.cols() != n)
      schema("eigenfunction matrix shape does not match metadata");
    model.eigen.values = vector_from_json(e, "values", m);
    model.eigen.explained = vector_from_json(e, "explained", m);
    model.eigen.all_values = vector_from_json(e, "all_values", s);
    model.noise_variance = doc.at("noise_variance").get<double>();
    model.r_squared_fixed = doc.at("r_squared_fixed").get<double>();
    model.working_scale = doc.at("working_scale").get<double>();
    model.refit_applied = doc.at("refit_applied").get<bool>();
    return model;
  } catch (const json::exception& ex) {
    schema(ex.what());
  }
}

int ModelBundle::dimension() const {
  int p = 0;
  for (const auto& m : outputs) p += m.num_components();
  return p;
}

json serialize_bundle(const ModelBundle& bundle) {
  json outputs = json::array();
  for (const auto& m : bundle.outputs) outputs.push_back(serialize_model(m));
  return {{"format", kBundleFormat},
          {"version", kModelVersion},
          {"covariate", bundle.covariate},
          {"origin", format_date(bundle.origin)},
          {"phase1", {{"first", bundle.phase1.first}, {"last", bundle.phase1.last}}},
          {"shape", {{"outputs", bundle.outputs.size()}, {"p", bundle.dimension()}}},
          {"baseline_cov", matrix_to_json(bundle.baseline_cov)},
          {"min_points", bundle.min_points},
          {"outlier_k", std::isfinite(bundle.outlier_k) ? json(bundle.outlier_k) : json(nullptr)},
          {"missing_output_policy", to_string(bundle.policy)},
          {"outputs", outputs}};
}

ModelBundle deserialize_bundle(const json& doc) {
  check_header(doc, kBundleFormat);
  try {
    ModelBundle b;
    b.covariate = doc.at("covariate").get<std::string>();
    const auto origin = parse_date(doc.at("origin").get<std::string>());
    if (!origin) schema("bad origin date");
    b.origin = *origin;
    b.phase1 = DayRange{doc.at("phase1").at("first").get<int>(), doc.at("phase1").at("last").get<int>()};
    for (const auto& m : doc.at("outputs")) b.outputs.push_back(deserialize_model(m));
    const json& shape = doc.at("shape");
    if (shape.at("outputs").get<std::size_t>() != b.outputs.size()) schema("output count does not match metadata");
    const int p = shape.at("p").get<int>();
    if (p != b.dimension()) schema("score dimension does not match the output models");
    b.baseline_cov = matrix_from_json(doc, "baseline_cov");
    if (b.baseline_cov.rows() != p || b.baseline_cov.cols() != p) schema("baseline covariance is not p x p");
    b.min_points = doc.at("min_points").get<std::size_t>();
    b.outlier_k = doc.at("outlier_k").is_null() ? INFINITY : doc.at("outlier_k").get<double>();
    b.policy = parse_missing_output_policy(doc.at("missing_output_policy").get<std::string>());
    return b;
  } catch (const json::exception& ex) {
    schema(ex.what());
  }
}

}  // namespace fdamon
