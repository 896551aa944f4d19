#include <cmath>
#include <limits>

#include "doctest.h"
#include "fdamon/error.hpp"
#include "fdamon/model_io.hpp"
#include "fixtures.hpp"

using namespace fdamon;
using nlohmann::json;

namespace {

std::string kind_of(const json& doc, bool bundle) {
  try {
    if (bundle)
      deserialize_bundle(doc);
    else
      deserialize_model(doc);
  } catch (const Error& e) {
    return e.kind();
  }
  return "";
}

}  // namespace

TEST_SUITE("model_io") {
  TEST_CASE("model round trip predicts identically") {
    const Phase1Model& m = small_fit().fit.bundle.outputs[0];
    const Phase1Model back = deserialize_model(json::parse(serialize_model(m).dump()));
    std::vector<double> t, z;
    const double lo = m.covariate.basis.lower() - 2.0, hi = m.covariate.basis.upper() + 2.0;
    for (int i = 0; i <= 60; ++i) {
      t.push_back(0.4 * i);
      z.push_back(lo + (hi - lo) * i / 60.0);
    }
    CHECK(predict_fixed(back, t, z).values == predict_fixed(m, t, z).values);
    CHECK(back.eigen.evaluate(t) == m.eigen.evaluate(t));
    CHECK(back.eigen.values == m.eigen.values);
    CHECK(back.noise_variance == m.noise_variance);
    CHECK(back.covariate.covariance == m.covariate.covariance);
    CHECK(serialize_model(back) == serialize_model(m));
  }

  TEST_CASE("missing pieces are a schema mismatch") {
    const json full = serialize_model(small_fit().fit.bundle.outputs[0]);
    for (const char* key : {"eigen", "intercept", "grid", "noise_variance", "shape"}) {
      json doc = full;
      doc.erase(key);
      CHECK(kind_of(doc, false) == "SchemaMismatch");
    }
    json doc = full;
    doc["eigen"]["values"].erase(0);
    CHECK(kind_of(doc, false) == "SchemaMismatch");
    CHECK(kind_of(json::object(), false) == "SchemaMismatch");
    doc = full;
    doc["format"] = "something.else";
    CHECK(kind_of(doc, false) == "SchemaMismatch");
  }

  TEST_CASE("other versions are refused") {
    json doc = serialize_model(small_fit().fit.bundle.outputs[0]);
    doc["version"] = 2;
    CHECK(kind_of(doc, false) == "VersionMismatch");
    json b = serialize_bundle(small_fit().fit.bundle);
    b["version"] = 0;
    CHECK(kind_of(b, true) == "VersionMismatch");
  }

  TEST_CASE("bundle round trip") {
    ModelBundle b = small_fit().fit.bundle;
    b.outlier_k = std::numeric_limits<double>::infinity();
    b.policy = MissingOutputPolicy::SkipDay;
    const ModelBundle back = deserialize_bundle(json::parse(serialize_bundle(b).dump()));
    CHECK(back.outputs.size() == b.outputs.size());
    CHECK(back.baseline_cov == b.baseline_cov);
    CHECK(back.origin == b.origin);
    CHECK(back.phase1.first == b.phase1.first);
    CHECK(back.phase1.last == b.phase1.last);
    CHECK(std::isinf(back.outlier_k));
    CHECK(back.policy == MissingOutputPolicy::SkipDay);
    CHECK(serialize_bundle(back) == serialize_bundle(b));
  }

  TEST_CASE("bundle metadata must match its contents") {
    json b = serialize_bundle(small_fit().fit.bundle);
    b["shape"]["p"] = 99;
    CHECK(kind_of(b, true) == "SchemaMismatch");
  }
}
