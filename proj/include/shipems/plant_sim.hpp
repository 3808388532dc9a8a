#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shipems/hybrid_dispatch.hpp"

namespace shipems {

struct PlantFlags {
  bool es_power_clamped = false;
  bool es_energy_clamped = false;
  bool gen_limit_hit = false;

  bool any() const noexcept { return es_power_clamped || es_energy_clamped || gen_limit_hit; }
  /// Semicolon-joined tokens of the raised flags, empty when none.
  std::string tokens() const;
  static PlantFlags from_tokens(const std::string& tokens);
  bool operator==(const PlantFlags&) const = default;
};

struct PlantState {
  std::int64_t step = 0;
  double t = 0.0;             // s
  std::vector<double> p_gen;  // kW, actual
  double p_es_bus = 0.0;      // kW, discharge positive
  double e_es = 0.0;          // kJ
  double p_pr = 0.0;          // kW
  double p_ppl = 0.0;         // kW
  PlantFlags flags;

  double p_load() const noexcept { return p_pr + p_ppl; }
  double p_gen_total() const noexcept;
  /// sum(p_gen) + p_es_bus - p_load.
  double balance_residual() const noexcept;
};

struct PlantConfig {
  std::vector<GeneratorRating> generators;
  StorageRating storage;
};

// ---------------------------------------------------------------------------
// Loads

struct PropulsionLoad {
  double power = 0.0;   // kW
  double target = 0.0;  // kW
  double rate = 0.0;    // kW/s, magnitude
};

/// Trapezoidal pulses: rise at `rate` to `peak`, hold, fall at `rate`.
struct PulseShape {
  double peak = 2.0;   // kW
  double rate = 10.0;  // kW/s
  double hold = 0.6;   // s

  double rise_time() const noexcept { return peak / rate; }
  double duration() const noexcept { return 2.0 * rise_time() + hold; }
  double energy() const noexcept { return peak * (rise_time() + hold); }
  /// Power at `tau` seconds after the pulse start.
  double power_at(double tau) const noexcept;
};

struct PulseTrain {
  std::int64_t start_step = 0;
  int count = 1;
  double period = 6.0;  // s
  PulseShape shape;

  /// Power at `tau` seconds after the first pulse started.
  double power_at(double tau) const noexcept;
  double end_time() const noexcept;
};

struct LoadModel {
  PropulsionLoad propulsion;
  std::optional<PulseTrain> pulses;
  double p_ppl = 0.0;

  /// True while a pulse train has pulses still to deliver after `step`.
  bool pulse_active(std::int64_t step, double T) const noexcept;
};

/// Throws Error{ValidationError} for non-positive peak/rate or a period that
/// cannot fit one pulse.
void validate(const PulseShape& shape, double period);

struct LoadStep {
  double p_pr = 0.0;
  double p_ppl = 0.0;
  double delta_p_pr = 0.0;
  double delta_p_ppl = 0.0;
};

/// Moves the loads from step `step` to `step + 1`. Propulsion arrives at its
/// target exactly; the pulse shape is evaluated from the step index so that
/// it does not accumulate rounding.
LoadStep advance_loads(LoadModel& loads, std::int64_t step, double T);

// ---------------------------------------------------------------------------

/**
 * Advances the plant one step. Generators follow their power commands within
 * their ramp and power limits; the storage is the bus slack, clamped to its
 * power rating; energy integrates the charge-positive power.
 */
PlantState step_plant(const PlantConfig& config, const PlantState& state,
                      const DispatchCommand& cmd, const LoadStep& loads, double T);

struct TelemetryFrame {
  std::int64_t step = 0;
  double t = 0.0;
  std::vector<double> p_gen;
  double p_es_bus = 0.0;
  double e_es = 0.0;
  double soc_pct = 0.0;
  double p_pr = 0.0;
  double p_ppl = 0.0;
  std::vector<double> i_gen;
  double i_es = 0.0;
  double i_pr = 0.0;
  double i_ppl = 0.0;
  DispatchMode mode = DispatchMode::Tracking;
  PlantFlags flags;
  /// Active SOC reference; not part of the CSV columns.
  double e_ref = 0.0;

  double p_load() const noexcept { return p_pr + p_ppl; }
  double balance_residual() const noexcept;
  bool operator==(const TelemetryFrame&) const = default;
};

/// Currents are reported as 1000 P / V at the nominal bus voltage.
TelemetryFrame to_telemetry(const PlantState& state, double v_bus_nominal, DispatchMode mode,
                            double e_capacity, double e_ref);

}  // namespace shipems
