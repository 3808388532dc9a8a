#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "json_locator.hpp"
#include "shipems/error.hpp"
#include "shipems/mission.hpp"

namespace shipems {

namespace {

using nlohmann::json;

constexpr std::string_view kDefaultScenario = R"json({
  "generators": [
    {"id": "GEN1", "p_min": 0.0, "p_max": 4.0, "r_min": -0.2, "r_max": 0.2},
    {"id": "GEN2", "p_min": 0.0, "p_max": 2.0, "r_min": -0.1, "r_max": 0.1}
  ],
  "storage": {"e_capacity": 10.0, "p_abs_max": 8.0, "e_ref": 8.0, "e_initial": 3.0},
  "controller": {"T": 0.01, "Np": 500, "Nc": 1, "qp_tol": 1e-9, "qp_max_iter": 0},
  "v_bus_nominal": 400.0,
  "initial_propulsion": 1.0,
  "events": [
    {"t": 12.0, "action": "set_soc_ref", "e_ref": 8.0},
    {"t": 34.0, "action": "set_propulsion", "target": 4.0, "rate": 0.375},
    {"t": 70.0, "action": "set_propulsion", "target": 3.0, "rate": 0.5},
    {"t": 100.0, "action": "fire_pulse_train",
     "count": 10, "period": 6.0, "peak": 2.0, "rate": 10.0, "hold": 0.6}
  ],
  "t_end": 180.0
}
)json";

class Reader {
 public:
  explicit Reader(std::string_view text) : locator_(text) {}

  [[noreturn]] void fail(ErrorKind kind, const std::string& path, const std::string& what) const {
    throw ScenarioError(kind, path, locator_.line_of(path), what);
  }

  void expect_object(const json& node, const std::string& path,
                     std::initializer_list<std::string_view> allowed) const {
    if (!node.is_object()) fail(ErrorKind::SchemaError, path, "expected an object");
    for (const auto& [key, _] : node.items()) {
      bool known = false;
      for (auto a : allowed) known = known || a == key;
      if (!known) {
        fail(ErrorKind::SchemaError, path + "/" + detail::escape_pointer_token(key),
             "unknown key '" + key + "'");
      }
    }
  }

  const json& required(const json& node, const std::string& path, const char* key) const {
    if (!node.contains(key)) {
      fail(ErrorKind::SchemaError, path + "/" + key, std::string("missing required field '") +
                                                         key + "'");
    }
    return node.at(key);
  }

  double number(const json& node, const std::string& path) const {
    if (!node.is_number()) fail(ErrorKind::SchemaError, path, "expected a number");
    const double v = node.get<double>();
    if (!std::isfinite(v)) fail(ErrorKind::ValidationError, path, "value must be finite");
    return v;
  }

  int integer(const json& node, const std::string& path) const {
    if (!node.is_number_integer()) fail(ErrorKind::SchemaError, path, "expected an integer");
    return node.get<int>();
  }

  double req_number(const json& node, const std::string& path, const char* key) const {
    return number(required(node, path, key), path + "/" + key);
  }

  double opt_number(const json& node, const std::string& path, const char* key,
                    double fallback) const {
    return node.contains(key) ? number(node.at(key), path + "/" + key) : fallback;
  }

  void positive(double v, const std::string& path) const {
    if (!(v > 0.0)) fail(ErrorKind::ValidationError, path, "must be positive");
  }

 private:
  detail::JsonLocator locator_;
};

GeneratorRating read_generator(const Reader& r, const json& node, const std::string& path) {
  r.expect_object(node, path, {"id", "p_min", "p_max", "r_min", "r_max"});
  GeneratorRating g;
  const auto& id = r.required(node, path, "id");
  if (!id.is_string()) r.fail(ErrorKind::SchemaError, path + "/id", "expected a string");
  g.id = id.get<std::string>();
  g.p_min = r.req_number(node, path, "p_min");
  g.p_max = r.req_number(node, path, "p_max");
  g.r_min = r.req_number(node, path, "r_min");
  g.r_max = r.req_number(node, path, "r_max");
  if (g.p_min > g.p_max) r.fail(ErrorKind::ValidationError, path + "/p_min", "p_min > p_max");
  if (!(g.r_min < 0.0)) r.fail(ErrorKind::ValidationError, path + "/r_min", "must be negative");
  if (!(g.r_max > 0.0)) r.fail(ErrorKind::ValidationError, path + "/r_max", "must be positive");
  return g;
}

StorageRating read_storage(const Reader& r, const json& node, const std::string& path) {
  r.expect_object(node, path, {"e_capacity", "p_abs_max", "e_ref", "e_initial"});
  StorageRating s;
  s.e_capacity = r.req_number(node, path, "e_capacity");
  s.p_abs_max = r.req_number(node, path, "p_abs_max");
  s.e_ref = r.req_number(node, path, "e_ref");
  s.e_initial = r.req_number(node, path, "e_initial");
  r.positive(s.e_capacity, path + "/e_capacity");
  r.positive(s.p_abs_max, path + "/p_abs_max");
  if (!(s.e_ref > 0.0 && s.e_ref <= s.e_capacity)) {
    r.fail(ErrorKind::ValidationError, path + "/e_ref", "must lie in (0, e_capacity]");
  }
  if (!(s.e_initial >= 0.0 && s.e_initial <= s.e_capacity)) {
    r.fail(ErrorKind::ValidationError, path + "/e_initial", "must lie in [0, e_capacity]");
  }
  return s;
}

ControllerSettings read_controller(const Reader& r, const json& node, const std::string& path) {
  r.expect_object(node, path, {"T", "Np", "Nc", "qp_tol", "qp_max_iter"});
  ControllerSettings c;
  c.T = r.opt_number(node, path, "T", c.T);
  if (node.contains("Np")) c.Np = r.integer(node.at("Np"), path + "/Np");
  if (node.contains("Nc")) c.Nc = r.integer(node.at("Nc"), path + "/Nc");
  c.qp_tol = r.opt_number(node, path, "qp_tol", c.qp_tol);
  if (node.contains("qp_max_iter")) {
    c.qp_max_iter = r.integer(node.at("qp_max_iter"), path + "/qp_max_iter");
  }
  r.positive(c.T, path + "/T");
  if (c.Np < 1) r.fail(ErrorKind::ValidationError, path + "/Np", "must be >= 1");
  if (c.Nc < 1 || c.Nc > c.Np) r.fail(ErrorKind::ValidationError, path + "/Nc", "need 1 <= Nc <= Np");
  r.positive(c.qp_tol, path + "/qp_tol");
  return c;
}

MissionEvent read_event(const Reader& r, const json& node, const std::string& path,
                        const StorageRating& storage) {
  if (!node.is_object()) r.fail(ErrorKind::SchemaError, path, "expected an object");
  const auto& action = r.required(node, path, "action");
  if (!action.is_string()) r.fail(ErrorKind::SchemaError, path + "/action", "expected a string");
  const auto name = action.get<std::string>();

  MissionEvent ev;
  if (name == "set_propulsion") {
    r.expect_object(node, path, {"t", "action", "target", "rate"});
    SetPropulsion a;
    a.target = r.req_number(node, path, "target");
    a.rate = r.req_number(node, path, "rate");
    if (a.target < 0.0) r.fail(ErrorKind::ValidationError, path + "/target", "must be >= 0");
    r.positive(a.rate, path + "/rate");
    ev.action = a;
  } else if (name == "fire_pulse_train") {
    r.expect_object(node, path, {"t", "action", "count", "period", "peak", "rate", "hold"});
    FirePulseTrain a;
    a.count = r.integer(r.required(node, path, "count"), path + "/count");
    a.period = r.req_number(node, path, "period");
    a.shape.peak = r.req_number(node, path, "peak");
    a.shape.rate = r.req_number(node, path, "rate");
    a.shape.hold = r.req_number(node, path, "hold");
    if (a.count < 1) r.fail(ErrorKind::ValidationError, path + "/count", "must be >= 1");
    r.positive(a.shape.peak, path + "/peak");
    r.positive(a.shape.rate, path + "/rate");
    if (a.shape.hold < 0.0) r.fail(ErrorKind::ValidationError, path + "/hold", "must be >= 0");
    if (!(a.period > a.shape.duration())) {
      r.fail(ErrorKind::ValidationError, path + "/period", "must exceed rise + hold + fall");
    }
    ev.action = a;
  } else if (name == "set_soc_ref") {
    r.expect_object(node, path, {"t", "action", "e_ref"});
    SetSocRef a;
    a.e_ref = r.req_number(node, path, "e_ref");
    if (!(a.e_ref > 0.0 && a.e_ref <= storage.e_capacity)) {
      r.fail(ErrorKind::ValidationError, path + "/e_ref", "must lie in (0, e_capacity]");
    }
    ev.action = a;
  } else {
    r.fail(ErrorKind::SchemaError, path + "/action", "unknown action '" + name + "'");
  }
  ev.t = r.req_number(node, path, "t");
  if (ev.t < 0.0) r.fail(ErrorKind::ValidationError, path + "/t", "must be >= 0");
  return ev;
}

}  // namespace

std::int64_t Scenario::total_steps() const { return event_step(t_end, controller.T); }

std::int64_t event_step(double t, double T) { return std::llround(t / T); }

Scenario parse_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ScenarioError(ErrorKind::ParseError, "", detail::line_at(text, e.byte), e.what());
  }

  const Reader r(text);
  r.expect_object(doc, "", {"generators", "storage", "controller", "v_bus_nominal",
                            "initial_propulsion", "events", "t_end"});

  Scenario s;
  const auto& gens = r.required(doc, "", "generators");
  if (!gens.is_array()) r.fail(ErrorKind::SchemaError, "/generators", "expected an array");
  if (gens.empty()) r.fail(ErrorKind::ValidationError, "/generators", "need at least one generator");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const auto path = "/generators/" + std::to_string(i);
    s.generators.push_back(read_generator(r, gens[i], path));
    if (!ids.insert(s.generators.back().id).second) {
      r.fail(ErrorKind::ValidationError, path + "/id", "duplicate generator id");
    }
  }

  s.storage = read_storage(r, r.required(doc, "", "storage"), "/storage");
  if (doc.contains("controller")) s.controller = read_controller(r, doc["controller"], "/controller");
  s.v_bus_nominal = r.opt_number(doc, "", "v_bus_nominal", s.v_bus_nominal);
  r.positive(s.v_bus_nominal, "/v_bus_nominal");
  s.initial_propulsion = r.opt_number(doc, "", "initial_propulsion", 0.0);
  if (s.initial_propulsion < 0.0) {
    r.fail(ErrorKind::ValidationError, "/initial_propulsion", "must be >= 0");
  }
  s.t_end = r.opt_number(doc, "", "t_end", s.t_end);
  r.positive(s.t_end, "/t_end");

  if (doc.contains("events")) {
    const auto& events = doc["events"];
    if (!events.is_array()) r.fail(ErrorKind::SchemaError, "/events", "expected an array");
    for (std::size_t i = 0; i < events.size(); ++i) {
      const auto path = "/events/" + std::to_string(i);
      s.events.push_back(read_event(r, events[i], path, s.storage));
      if (i > 0 && s.events[i].t < s.events[i - 1].t) {
        r.fail(ErrorKind::ValidationError, path + "/t", "events must be sorted by time");
      }
    }
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot read scenario " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string default_scenario_json() { return std::string(kDefaultScenario); }

Scenario default_scenario() { return parse_scenario(kDefaultScenario); }

std::string to_json(const Scenario& s) {
  nlohmann::ordered_json doc;
  auto& gens = doc["generators"] = nlohmann::ordered_json::array();
  for (const auto& g : s.generators) {
    gens.push_back({{"id", g.id}, {"p_min", g.p_min}, {"p_max", g.p_max}, {"r_min", g.r_min},
                    {"r_max", g.r_max}});
  }
  doc["storage"] = {{"e_capacity", s.storage.e_capacity},
                    {"p_abs_max", s.storage.p_abs_max},
                    {"e_ref", s.storage.e_ref},
                    {"e_initial", s.storage.e_initial}};
  doc["controller"] = {{"T", s.controller.T},
                       {"Np", s.controller.Np},
                       {"Nc", s.controller.Nc},
                       {"qp_tol", s.controller.qp_tol},
                       {"qp_max_iter", s.controller.qp_max_iter}};
  doc["v_bus_nominal"] = s.v_bus_nominal;
  doc["initial_propulsion"] = s.initial_propulsion;
  auto& events = doc["events"] = nlohmann::ordered_json::array();
  for (const auto& ev : s.events) {
    nlohmann::ordered_json e;
    e["t"] = ev.t;
    std::visit(
        [&e](const auto& a) {
          using A = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<A, SetPropulsion>) {
            e["action"] = "set_propulsion";
            e["target"] = a.target;
            e["rate"] = a.rate;
          } else if constexpr (std::is_same_v<A, FirePulseTrain>) {
            e["action"] = "fire_pulse_train";
            e["count"] = a.count;
            e["period"] = a.period;
            e["peak"] = a.shape.peak;
            e["rate"] = a.shape.rate;
            e["hold"] = a.shape.hold;
          } else {
            e["action"] = "set_soc_ref";
            e["e_ref"] = a.e_ref;
          }
        },
        ev.action);
    events.push_back(std::move(e));
  }
  doc["t_end"] = s.t_end;
  return doc.dump(2) + "\n";
}

}  // namespace shipems
