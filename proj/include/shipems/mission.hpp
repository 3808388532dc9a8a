#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "shipems/hybrid_dispatch.hpp"
#include "shipems/plant_sim.hpp"

namespace shipems {

struct SetPropulsion {
  double target = 0.0;  // kW
  double rate = 0.0;    // kW/s, magnitude; direction follows the target
  bool operator==(const SetPropulsion&) const = default;
};

struct FirePulseTrain {
  int count = 1;
  double period = 6.0;
  PulseShape shape;
  bool operator==(const FirePulseTrain& o) const {
    return count == o.count && period == o.period && shape.peak == o.shape.peak &&
           shape.rate == o.shape.rate && shape.hold == o.shape.hold;
  }
};

struct SetSocRef {
  double e_ref = 0.0;  // kJ
  bool operator==(const SetSocRef&) const = default;
};

using MissionAction = std::variant<SetPropulsion, FirePulseTrain, SetSocRef>;

struct MissionEvent {
  double t = 0.0;
  MissionAction action;
  bool operator==(const MissionEvent&) const = default;
};

struct Scenario {
  std::vector<GeneratorRating> generators;
  StorageRating storage;
  ControllerSettings controller;
  double v_bus_nominal = 400.0;
  double initial_propulsion = 0.0;  // kW
  std::vector<MissionEvent> events;
  double t_end = 180.0;

  std::int64_t total_steps() const;
};

/// Parses and validates a scenario document (JSON). Throws ScenarioError with
/// kind ParseError, SchemaError or ValidationError.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

/// The four-stage reference mission on the reduced-scale test system.
Scenario default_scenario();
std::string default_scenario_json();

/// Canonical JSON serialisation; parse_scenario(to_json(s)) == s.
std::string to_json(const Scenario& scenario);

/// Step index at which an event scheduled at time t is applied.
std::int64_t event_step(double t, double T);

// ---------------------------------------------------------------------------

/**
 * Fixed-step mission loop. Each step: apply actions due at this boundary,
 * advance the loads, exchange records, dispatch, step the plant and emit a
 * telemetry frame. Shared by the batch harness and the live service.
 */
class MissionRunner {
 public:
  explicit MissionRunner(Scenario scenario);

  /// Applies an action at the current step boundary. A pulse request while a
  /// pulse is still running throws Error{Busy}.
  void apply(const MissionAction& action);

  /// Advances one step. Errors carry the simulated time of the failing step.
  const TelemetryFrame& step();

  bool finished() const noexcept { return state_.step >= total_steps_; }
  bool pulse_active() const noexcept;
  const PlantState& state() const noexcept { return state_; }
  const TelemetryFrame& frame() const noexcept { return frame_; }
  const Scenario& scenario() const noexcept { return scenario_; }
  const HybridDispatcher& dispatcher() const noexcept { return dispatcher_; }
  const DispatchCommand& last_command() const noexcept { return last_cmd_; }

 private:
  Scenario scenario_;
  PlantConfig plant_config_;
  HybridDispatcher dispatcher_;
  ExchangeAggregator exchange_;
  LoadModel loads_;
  PlantState state_;
  TelemetryFrame frame_;
  DispatchCommand last_cmd_;
  std::int64_t total_steps_ = 0;
  std::size_t next_event_ = 0;
  std::vector<std::int64_t> event_steps_;
};

struct MissionMetrics {
  double final_e_es = 0.0;
  double min_e_es = 0.0;
  double max_e_es = 0.0;
  double soc_tracking_rmse = 0.0;
  std::int64_t ramp_violations = 0;
  std::int64_t balance_violations = 0;
  std::int64_t clamp_events = 0;
  double wall_time = 0.0;
};

struct MetricTolerances {
  double ramp_kw = 1e-9;     // per-step excess over T r_max
  double balance_kw = 1e-9;  // |sum p_gen + p_es - p_load|
};

/// Throws Error{EmptyTrace} on an empty trace. wall_time is left at zero.
MissionMetrics compute_metrics(std::span<const TelemetryFrame> trace,
                               std::span<const GeneratorRating> generators,
                               const MetricTolerances& tolerances = {});

std::string metrics_json(const MissionMetrics& metrics);

struct MissionResult {
  std::vector<TelemetryFrame> trace;
  MissionMetrics metrics;
};

/// Runs the scenario from t = 0 to t_end. The trace starts with the initial
/// frame, so it holds total_steps() + 1 frames.
MissionResult run_mission(const Scenario& scenario);

// ---------------------------------------------------------------------------
// Trace CSV

std::string trace_header(std::size_t generator_count);
std::string format_trace_row(const TelemetryFrame& frame);
void write_trace(std::span<const TelemetryFrame> trace, std::ostream& out,
                 std::size_t generator_count = 2);
/// Throws Error{IoError} when the file cannot be written.
void write_trace(std::span<const TelemetryFrame> trace, const std::filesystem::path& path,
                 std::size_t generator_count = 2);

/// Parses a trace written by write_trace. Frames come back with e_ref = 0;
/// assign_soc_reference() restores it from the scenario.
std::vector<TelemetryFrame> read_trace(std::istream& in);
void assign_soc_reference(std::span<TelemetryFrame> trace, const Scenario& scenario);

}  // namespace shipems
