#include "shipems/mission.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "shipems/error.hpp"

namespace shipems {

namespace {

constexpr const char* kStorageId = "ES";
constexpr const char* kPropulsionId = "Pr";
constexpr const char* kPulsedId = "PPL";

std::vector<std::string> generator_ids(const Scenario& s) {
  std::vector<std::string> ids;
  for (const auto& g : s.generators) ids.push_back(g.id);
  return ids;
}

/// Generators share the initial load by their up-ramp weights.
std::vector<double> initial_generation(const Scenario& s) {
  const auto w = generator_weights(s.generators, RampDirection::Up);
  std::vector<double> p(s.generators.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::clamp(w[i] * s.initial_propulsion, s.generators[i].p_min, s.generators[i].p_max);
  }
  return p;
}

PlantState initial_state(const Scenario& s) {
  PlantState st;
  st.p_gen = initial_generation(s);
  st.p_pr = s.initial_propulsion;
  st.p_es_bus = st.p_load() - st.p_gen_total();
  st.e_es = s.storage.e_initial;
  return st;
}

}  // namespace

MissionRunner::MissionRunner(Scenario scenario)
    : scenario_(std::move(scenario)),
      plant_config_{scenario_.generators, scenario_.storage},
      dispatcher_(scenario_.generators, scenario_.storage, scenario_.controller,
                  initial_generation(scenario_)),
      exchange_(generator_ids(scenario_), {kPropulsionId, kPulsedId},
                {scenario_.initial_propulsion, 0.0}, initial_generation(scenario_),
                scenario_.storage.e_initial, 0.0),
      state_(initial_state(scenario_)),
      total_steps_(scenario_.total_steps()) {
  loads_.propulsion = {scenario_.initial_propulsion, scenario_.initial_propulsion, 0.0};
  for (const auto& ev : scenario_.events) {
    event_steps_.push_back(event_step(ev.t, scenario_.controller.T));
  }
  frame_ = to_telemetry(state_, scenario_.v_bus_nominal, DispatchMode::Tracking,
                        scenario_.storage.e_capacity, dispatcher_.soc_reference());
}

bool MissionRunner::pulse_active() const noexcept {
  return loads_.pulse_active(state_.step, scenario_.controller.T);
}

void MissionRunner::apply(const MissionAction& action) {
  std::visit(
      [this](const auto& a) {
        using A = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<A, SetPropulsion>) {
          loads_.propulsion.target = a.target;
          loads_.propulsion.rate = a.rate;
        } else if constexpr (std::is_same_v<A, FirePulseTrain>) {
          validate(a.shape, a.period);
          if (pulse_active()) throw Error(ErrorKind::Busy, "a pulse is already in progress");
          loads_.pulses = PulseTrain{state_.step, a.count, a.period, a.shape};
        } else {
          dispatcher_.set_soc_reference(a.e_ref);
        }
      },
      action);
}

const TelemetryFrame& MissionRunner::step() {
  const double T = scenario_.controller.T;
  while (next_event_ < scenario_.events.size() && event_steps_[next_event_] <= state_.step) {
    apply(scenario_.events[next_event_].action);
    ++next_event_;
  }

  const LoadStep load = advance_loads(loads_, state_.step, T);

  // What each manager publishes on the network this step.
  std::vector<ExchangeRecord> records;
  records.reserve(scenario_.generators.size() + 3);
  for (std::size_t i = 0; i < scenario_.generators.size(); ++i) {
    records.push_back(ExchangeRecord::generator(scenario_.generators[i].id, state_.p_gen[i]));
  }
  records.push_back(ExchangeRecord::storage(kStorageId, state_.e_es, state_.p_es_bus,
                                            T * last_cmd_.r_es_bus));
  records.push_back(ExchangeRecord::load(kPropulsionId, load.delta_p_pr));
  records.push_back(ExchangeRecord::load(kPulsedId, load.delta_p_ppl));

  try {
    const AggregateView view = exchange_.collect(records, T);
    last_cmd_ = dispatcher_.dispatch_step(view);
  } catch (const Error& e) {
    throw Error(e.kind(), "t=" + std::to_string(state_.t) + " s: " + e.what());
  }

  state_ = step_plant(plant_config_, state_, last_cmd_, load, T);
  frame_ = to_telemetry(state_, scenario_.v_bus_nominal, last_cmd_.mode,
                        scenario_.storage.e_capacity, dispatcher_.soc_reference());
  return frame_;
}

MissionResult run_mission(const Scenario& scenario) {
  const auto start = std::chrono::steady_clock::now();
  MissionRunner runner(scenario);
  MissionResult result;
  result.trace.reserve(static_cast<std::size_t>(scenario.total_steps()) + 1);
  result.trace.push_back(runner.frame());
  while (!runner.finished()) result.trace.push_back(runner.step());
  result.metrics = compute_metrics(result.trace, scenario.generators);
  result.metrics.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

MissionMetrics compute_metrics(std::span<const TelemetryFrame> trace,
                               std::span<const GeneratorRating> generators,
                               const MetricTolerances& tol) {
  if (trace.empty()) throw Error(ErrorKind::EmptyTrace, "cannot compute metrics of an empty trace");
  MissionMetrics m;
  m.final_e_es = trace.back().e_es;
  m.min_e_es = trace.front().e_es;
  m.max_e_es = trace.front().e_es;
  double sq = 0.0;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const auto& f = trace[k];
    m.min_e_es = std::min(m.min_e_es, f.e_es);
    m.max_e_es = std::max(m.max_e_es, f.e_es);
    sq += (f.e_es - f.e_ref) * (f.e_es - f.e_ref);
    if (std::abs(f.balance_residual()) > tol.balance_kw) ++m.balance_violations;
    if (f.flags.any()) ++m.clamp_events;
    if (k == 0) continue;
    const auto& prev = trace[k - 1];
    const double dt = f.t - prev.t;
    const std::size_t n = std::min({generators.size(), f.p_gen.size(), prev.p_gen.size()});
    for (std::size_t i = 0; i < n; ++i) {
      const double dp = f.p_gen[i] - prev.p_gen[i];
      if (dp > dt * generators[i].r_max + tol.ramp_kw ||
          dp < dt * generators[i].r_min - tol.ramp_kw) {
        ++m.ramp_violations;
      }
    }
  }
  m.soc_tracking_rmse = std::sqrt(sq / static_cast<double>(trace.size()));
  return m;
}

std::string metrics_json(const MissionMetrics& m) {
  nlohmann::ordered_json j;
  j["final_e_es"] = m.final_e_es;
  j["min_e_es"] = m.min_e_es;
  j["max_e_es"] = m.max_e_es;
  j["soc_tracking_rmse"] = m.soc_tracking_rmse;
  j["ramp_violations"] = m.ramp_violations;
  j["balance_violations"] = m.balance_violations;
  j["clamp_events"] = m.clamp_events;
  j["wall_time"] = m.wall_time;
  return j.dump(2) + "\n";
}

void assign_soc_reference(std::span<TelemetryFrame> trace, const Scenario& scenario) {
  for (auto& f : trace) {
    double ref = scenario.storage.e_ref;
    for (const auto& ev : scenario.events) {
      const auto* soc = std::get_if<SetSocRef>(&ev.action);
      if (soc && f.step > event_step(ev.t, scenario.controller.T)) ref = soc->e_ref;
    }
    f.e_ref = ref;
  }
}

}  // namespace shipems
