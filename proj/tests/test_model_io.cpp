#include <doctest.h>

#include <string>

#include "martrep/model_io.hpp"

using namespace martrep;

namespace {

const char* kM2Doc = R"json({
  "schema": "martrep-model/1",
  "atoms": ["e1t1", "e1t2", "e2t1", "e2t2"],
  "grid": [0, 1, 2],
  "measures": {"P": {"e1t1": 0.1, "e1t2": 0.2, "e2t1": 0.3, "e2t2": 0.4}},
  "random_times": {
    "eta": {"e1t1": 1, "e1t2": 1, "e2t1": 2, "e2t2": 2},
    "tau": {"e1t1": 1, "e1t2": 2, "e2t1": 1, "e2t2": 2}
  },
  "roles": {"f_time": "eta", "h_time": "tau", "measure": "P"}
})json";

std::string path_of(const ValidationError& e) { return e.path(); }

}  // namespace

TEST_CASE("a valid model document loads and builds the joint model") {
  SpaceDocument doc = load_model_text(kM2Doc);
  CHECK(doc.space.n_atoms() == 4);
  CHECK(doc.space.n_times() == 3);
  CHECK(doc.has_roles());
  JointModel<double> jm = doc.joint_model();
  CHECK(jm.g().at(1).cell_count() == 4);
  CHECK(jm.p().w[3] == 0.4);
}

TEST_CASE("loader rejections carry the offending path") {
  SUBCASE("not json") {
    try {
      load_model_text("not json at all {");
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(path_of(e) == "/");
    }
  }
  SUBCASE("weights off by one percent") {
    const char* doc = R"({"atoms":["a","b"],"grid":[0,1],
      "measures":{"P":{"a":0.5,"b":0.49}}})";
    try {
      load_model_text(doc);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(path_of(e).find("measures/P") != std::string::npos);
    }
  }
  SUBCASE("unknown atom in a measure") {
    const char* doc = R"({"atoms":["a"],"grid":[0],"measures":{"P":{"zz":1.0}}})";
    try {
      load_model_text(doc);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(path_of(e) == "/measures/P/zz");
    }
  }
  SUBCASE("a random time off the grid") {
    const char* doc = R"({"atoms":["a"],"grid":[0,1],
      "random_times":{"tau":{"a":0.5}}})";
    try {
      load_model_text(doc);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(path_of(e) == "/random_times/tau/a");
    }
  }
  SUBCASE("non-refining filtration") {
    const char* doc = R"({"atoms":["a","b"],"grid":[0,1],
      "filtrations":{"F":[[["a"],["b"]],[["a","b"]]]}})";
    try {
      load_model_text(doc);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(path_of(e).find("filtrations/F") != std::string::npos);
    }
  }
  SUBCASE("partition missing an atom") {
    const char* doc = R"({"atoms":["a","b"],"grid":[0],
      "filtrations":{"F":[[["a"]]]}})";
    CHECK_THROWS_AS(load_model_text(doc), ValidationError);
  }
  SUBCASE("roles referencing unknown names") {
    const char* doc = R"({"atoms":["a"],"grid":[0],
      "roles":{"f_time":"nope"}})";
    try {
      load_model_text(doc);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(path_of(e) == "/roles/f_time");
    }
  }
}

TEST_CASE("joint model requires declared roles") {
  const char* doc = R"({"atoms":["a"],"grid":[0],
    "measures":{"P":{"a":1.0}},
    "random_times":{"tau":{"a":0}}})";
  SpaceDocument loaded = load_model_text(doc);
  CHECK(!loaded.has_roles());
  CHECK_THROWS_AS(loaded.joint_model(), ContractError);
}

TEST_CASE("mixed model documents") {
  const char* doc = R"({
    "schema": "martrep-mixed/1",
    "horizon": 4, "dt": 0.01,
    "eta": {"values": [1, 3], "probs": [0.4, 0.6]},
    "tau": {"values": [2], "given_eta": [[0.8], [0.8]], "density_weight": 0.2}
  })";
  MixedModel m = load_mixed_text(doc);
  CHECK(m.horizon == 4);
  CHECK(m.tau_density_weight == 0.2);
  CHECK(sniff_document_kind(doc) == DocumentKind::kMixedModel);
  CHECK(sniff_document_kind(kM2Doc) == DocumentKind::kFiniteModel);

  const char* bad = R"({
    "schema": "martrep-mixed/1",
    "horizon": 4,
    "eta": {"values": [1], "probs": [1.0]},
    "tau": {"values": [2], "given_eta": [[0.7]], "density_weight": 0.2}
  })";
  CHECK_THROWS_AS(load_mixed_text(bad), ValidationError);  // row + density != 1
}
