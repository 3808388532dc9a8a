#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shipems/mpc_engine.hpp"

namespace shipems {

struct GeneratorRating {
  std::string id;
  double p_min = 0.0;  // kW
  double p_max = 0.0;  // kW
  double r_min = 0.0;  // kW/s, < 0
  double r_max = 0.0;  // kW/s, > 0
};

struct StorageRating {
  double e_capacity = 0.0;  // kJ
  double p_abs_max = 0.0;   // kW
  double e_ref = 0.0;       // kJ
  double e_initial = 0.0;   // kJ
};

/// Throws Error{ValidationError} when a rating breaks its invariants.
void validate(const GeneratorRating& gen);
void validate(const StorageRating& storage);

enum class DispatchMode { Tracking, SaturatedUp, SaturatedDown };

std::string_view to_string(DispatchMode mode) noexcept;
std::optional<DispatchMode> parse_dispatch_mode(std::string_view token) noexcept;

enum class RampDirection { Up, Down };

/// Load ramp against the aggregate generator capability. The boundary values
/// themselves classify as Tracking.
DispatchMode classify_mode(double r_load, std::span<const GeneratorRating> gens);

/// Up: r_max_i / sum(r_max). Down: |r_min_i| / sum(|r_min|).
std::vector<double> generator_weights(std::span<const GeneratorRating> gens,
                                      RampDirection direction);

/**
 * Charge-positive storage envelope implied by bus balance:
 * p_chg = sum(p_gen) - p_load and r_chg = sum(r_gen) - r_load, with the power
 * window further limited by the storage rating. Throws
 * Error{InfeasibleEnvelope} when the power window is empty.
 */
mpc::StorageEnvelope storage_envelope(double r_load, double p_load,
                                      std::span<const GeneratorRating> gens,
                                      const StorageRating& storage, double p_chg_now);

// ---------------------------------------------------------------------------
// Information exchange between energy managers.

enum class SenderKind { Generator, Storage, Load };

/// One message on the manager network. Generators publish their power, the
/// storage its energy, power and last power change, loads their commanded
/// power change for the step.
struct ExchangeRecord {
  std::string sender;
  SenderKind kind = SenderKind::Load;
  std::optional<double> p_gen;
  std::optional<double> e_es;
  std::optional<double> p_es;
  std::optional<double> delta_p_es;
  std::optional<double> delta_p_load;

  static ExchangeRecord generator(std::string id, double p_gen);
  static ExchangeRecord storage(std::string id, double e_es, double p_es, double delta_p_es);
  static ExchangeRecord load(std::string id, double delta_p_load);
};

struct AggregateView {
  double r_load = 0.0;  // kW/s
  double p_load = 0.0;  // kW, after this step's deltas
  double e_es = 0.0;    // kJ
  double p_es = 0.0;    // kW, bus frame (discharge positive)
  std::vector<double> p_gen;
};

/// Holds the last known value of every quantity so that a step without news
/// from a device reuses what it said before.
class ExchangeAggregator {
 public:
  ExchangeAggregator(std::vector<std::string> generator_ids, std::vector<std::string> load_ids,
                     std::vector<double> load_powers, std::vector<double> p_gen, double e_es,
                     double p_es);

  /// Throws Error{DuplicateSender} if a device reports twice, and
  /// Error{ValidationError} for unknown senders.
  AggregateView collect(std::span<const ExchangeRecord> records, double T);

  const AggregateView& last() const noexcept { return view_; }

 private:
  std::vector<std::string> generator_ids_;
  std::vector<std::string> load_ids_;
  std::vector<double> load_powers_;
  AggregateView view_;
};

// ---------------------------------------------------------------------------

struct DispatchCommand {
  std::vector<double> r_gen;      // kW/s
  double r_es_bus = 0.0;          // kW/s, discharge positive
  std::vector<double> p_gen_cmd;  // kW
  double p_es_expected = 0.0;     // kW, bus frame
  DispatchMode mode = DispatchMode::Tracking;
  bool generator_clamped = false;
  /// Present when the MPC ran this step.
  std::optional<mpc::StepResult> mpc;
};

struct ControllerSettings {
  double T = 0.01;
  int Np = 500;
  int Nc = 1;
  double qp_tol = 1e-9;
  int qp_max_iter = 0;  // <= 0: 50 * constraint count
};

/**
 * The energy-manager layer. Owns the generator power-command accumulators and
 * must be driven from a single thread.
 *
 * SOC tracking starts disabled: until set_soc_reference() is called the
 * Tracking branch holds the storage ramp at zero.
 */
class HybridDispatcher {
 public:
  HybridDispatcher(std::vector<GeneratorRating> gens, StorageRating storage,
                   ControllerSettings settings, std::vector<double> p_gen_initial);

  DispatchCommand dispatch_step(const AggregateView& view);

  void set_soc_reference(double e_ref);
  bool tracking_enabled() const noexcept { return tracking_; }
  double soc_reference() const noexcept { return storage_.e_ref; }

  const std::vector<double>& power_commands() const noexcept { return p_gen_cmd_; }
  const mpc::PredictionModel& prediction_model() const noexcept { return model_; }
  const std::vector<GeneratorRating>& generators() const noexcept { return gens_; }

 private:
  std::vector<GeneratorRating> gens_;
  StorageRating storage_;
  ControllerSettings settings_;
  mpc::PredictionModel model_;
  std::vector<double> weights_up_;
  std::vector<double> weights_down_;
  std::vector<double> p_gen_cmd_;
  double r_max_sum_ = 0.0;
  double r_min_sum_ = 0.0;
  bool tracking_ = false;
};

}  // namespace shipems
