#include <doctest.h>

#include <nlohmann/json.hpp>

#include "shipems/error.hpp"
#include "shipems/mission.hpp"

using namespace shipems;
using nlohmann::json;

namespace {

json default_doc() { return json::parse(default_scenario_json()); }

ScenarioError parse_error(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ScenarioError& e) {
    return e;
  }
  FAIL("scenario parsed");
  return ScenarioError(ErrorKind::IoError, "", 0, "");
}

}  // namespace

TEST_CASE("default scenario") {
  const Scenario s = default_scenario();
  REQUIRE(s.generators.size() == 2);
  CHECK(s.generators[0].p_max == 4.0);
  CHECK(s.generators[0].r_max == 0.2);
  CHECK(s.generators[1].p_max == 2.0);
  CHECK(s.generators[1].r_min == -0.1);
  CHECK(s.storage.e_capacity == 10.0);
  CHECK(s.storage.p_abs_max == 8.0);
  CHECK(s.storage.e_ref == 8.0);
  CHECK(s.storage.e_initial == 3.0);
  CHECK(s.controller.T == 0.01);
  CHECK(s.controller.Np == 500);
  CHECK(s.controller.Nc == 1);
  CHECK(s.total_steps() == 18000);
  REQUIRE(s.events.size() == 4);
  CHECK(s.events[0] == MissionEvent{12.0, SetSocRef{8.0}});
  CHECK(s.events[1] == MissionEvent{34.0, SetPropulsion{4.0, 0.375}});
  CHECK(s.events[2] == MissionEvent{70.0, SetPropulsion{3.0, 0.5}});
  CHECK(s.events[3] == MissionEvent{100.0, FirePulseTrain{10, 6.0, PulseShape{2.0, 10.0, 0.6}}});
}

TEST_CASE("to_json round-trips") {
  const Scenario s = default_scenario();
  const Scenario back = parse_scenario(to_json(s));
  CHECK(back.events == s.events);
  CHECK(back.storage.e_initial == s.storage.e_initial);
  CHECK(back.initial_propulsion == s.initial_propulsion);
  CHECK(to_json(back) == to_json(s));
}

TEST_CASE("missing storage is a schema error at /storage") {
  auto doc = default_doc();
  doc.erase("storage");
  const auto e = parse_error(doc.dump(2));
  CHECK(e.kind() == ErrorKind::SchemaError);
  CHECK(e.path() == "/storage");
}

TEST_CASE("reference above capacity is a validation error with its line") {
  auto doc = default_doc();
  doc["storage"]["e_ref"] = 12.0;
  const std::string text = doc.dump(2);
  const auto e = parse_error(text);
  CHECK(e.kind() == ErrorKind::ValidationError);
  CHECK(e.path() == "/storage/e_ref");
  const auto pos = text.find("\"e_ref\": 12");
  REQUIRE(pos != std::string::npos);
  CHECK(e.line() == 1 + std::count(text.begin(), text.begin() + pos, '\n'));
  CHECK(std::string(e.what()).find("line") != std::string::npos);
}

TEST_CASE("malformed and unknown input") {
  auto e = parse_error("{\"generators\": [");
  CHECK(e.kind() == ErrorKind::ParseError);
  CHECK(e.line() >= 1);

  auto doc = default_doc();
  doc["storage"]["colour"] = "blue";
  e = parse_error(doc.dump(2));
  CHECK(e.kind() == ErrorKind::SchemaError);
  CHECK(e.path() == "/storage/colour");

  doc = default_doc();
  doc["events"][1]["action"] = "warp";
  e = parse_error(doc.dump(2));
  CHECK(e.kind() == ErrorKind::SchemaError);
  CHECK(e.path() == "/events/1/action");

  doc = default_doc();
  doc["generators"][0]["r_max"] = "fast";
  e = parse_error(doc.dump());
  CHECK(e.kind() == ErrorKind::SchemaError);

  doc = default_doc();
  doc["events"][3]["period"] = 0.5;
  e = parse_error(doc.dump());
  CHECK(e.kind() == ErrorKind::ValidationError);
  CHECK(e.path() == "/events/3/period");
}

TEST_CASE("load_scenario reports missing files") {
  try {
    load_scenario("/nonexistent/scenario.json");
    FAIL("loaded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IoError);
  }
}
