#include "shipems/plant_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "shipems/error.hpp"

namespace shipems {

namespace {

// Slack on the ramp clamp; the dispatcher's integrated commands sit exactly on
// the limit up to rounding.
constexpr double kRampSlack = 1e-12;

}  // namespace

std::string PlantFlags::tokens() const {
  std::string out;
  auto add = [&out](const char* token) {
    if (!out.empty()) out += ';';
    out += token;
  };
  if (es_power_clamped) add("es_power_clamped");
  if (es_energy_clamped) add("es_energy_clamped");
  if (gen_limit_hit) add("gen_limit_hit");
  return out;
}

PlantFlags PlantFlags::from_tokens(const std::string& tokens) {
  PlantFlags f;
  std::stringstream ss(tokens);
  std::string token;
  while (std::getline(ss, token, ';')) {
    if (token == "es_power_clamped") {
      f.es_power_clamped = true;
    } else if (token == "es_energy_clamped") {
      f.es_energy_clamped = true;
    } else if (token == "gen_limit_hit") {
      f.gen_limit_hit = true;
    } else if (!token.empty()) {
      throw Error(ErrorKind::ParseError, "unknown flag token '" + token + "'");
    }
  }
  return f;
}

double PlantState::p_gen_total() const noexcept {
  return std::accumulate(p_gen.begin(), p_gen.end(), 0.0);
}

double PlantState::balance_residual() const noexcept {
  return p_gen_total() + p_es_bus - p_load();
}

double PulseShape::power_at(double tau) const noexcept {
  const double rise = rise_time();
  if (tau <= 0.0) return 0.0;
  if (tau < rise) return std::min(rate * tau, peak);
  if (tau <= rise + hold) return peak;
  const double falling = tau - rise - hold;
  if (falling < rise) return std::max(peak - rate * falling, 0.0);
  return 0.0;
}

double PulseTrain::power_at(double tau) const noexcept {
  if (tau <= 0.0) return 0.0;
  const double index = std::floor(tau / period);
  if (index >= count) return 0.0;
  return shape.power_at(tau - index * period);
}

double PulseTrain::end_time() const noexcept {
  return (count - 1) * period + shape.duration();
}

bool LoadModel::pulse_active(std::int64_t step, double T) const noexcept {
  if (!pulses) return false;
  const double tau = static_cast<double>(step - pulses->start_step) * T;
  return tau < pulses->end_time();
}

void validate(const PulseShape& shape, double period) {
  if (!(shape.peak > 0.0)) throw Error(ErrorKind::ValidationError, "pulse peak must be positive");
  if (!(shape.rate > 0.0)) throw Error(ErrorKind::ValidationError, "pulse rate must be positive");
  if (!(shape.hold >= 0.0)) throw Error(ErrorKind::ValidationError, "pulse hold must be >= 0");
  if (!(period > shape.duration())) {
    throw Error(ErrorKind::ValidationError, "pulse period must exceed rise + hold + fall");
  }
}

LoadStep advance_loads(LoadModel& loads, std::int64_t step, double T) {
  LoadStep out;

  auto& pr = loads.propulsion;
  const double gap = pr.target - pr.power;
  const double max_move = pr.rate * T;
  double next = pr.target;
  if (std::abs(gap) > max_move) next = pr.power + std::copysign(max_move, gap);
  out.delta_p_pr = next - pr.power;
  pr.power = next;
  out.p_pr = next;

  double ppl = 0.0;
  if (loads.pulses) {
    const double tau = static_cast<double>(step + 1 - loads.pulses->start_step) * T;
    ppl = loads.pulses->power_at(tau);
    if (tau >= loads.pulses->end_time()) loads.pulses.reset();
  }
  out.delta_p_ppl = ppl - loads.p_ppl;
  loads.p_ppl = ppl;
  out.p_ppl = ppl;
  return out;
}

PlantState step_plant(const PlantConfig& config, const PlantState& state,
                      const DispatchCommand& cmd, const LoadStep& loads, double T) {
  PlantState next = state;
  next.flags = {};
  next.flags.gen_limit_hit = cmd.generator_clamped;

  for (std::size_t i = 0; i < next.p_gen.size(); ++i) {
    const auto& g = config.generators[i];
    double delta = cmd.p_gen_cmd[i] - state.p_gen[i];
    if (delta > T * g.r_max + kRampSlack) {
      delta = T * g.r_max;
      next.flags.gen_limit_hit = true;
    } else if (delta < T * g.r_min - kRampSlack) {
      delta = T * g.r_min;
      next.flags.gen_limit_hit = true;
    }
    double p = state.p_gen[i] + delta;
    if (p > g.p_max || p < g.p_min) {
      p = std::clamp(p, g.p_min, g.p_max);
      next.flags.gen_limit_hit = true;
    }
    next.p_gen[i] = p;
  }

  next.p_pr = loads.p_pr;
  next.p_ppl = loads.p_ppl;

  const double p_abs = config.storage.p_abs_max;
  double p_es = next.p_load() - next.p_gen_total();
  if (std::abs(p_es) > p_abs) {
    p_es = std::clamp(p_es, -p_abs, p_abs);
    next.flags.es_power_clamped = true;
  }
  next.p_es_bus = p_es;

  double e = state.e_es + T * (-p_es);
  if (e < 0.0 || e > config.storage.e_capacity) {
    e = std::clamp(e, 0.0, config.storage.e_capacity);
    next.flags.es_energy_clamped = true;
  }
  next.e_es = e;

  next.step = state.step + 1;
  next.t = static_cast<double>(next.step) * T;
  return next;
}

double TelemetryFrame::balance_residual() const noexcept {
  return std::accumulate(p_gen.begin(), p_gen.end(), 0.0) + p_es_bus - p_load();
}

TelemetryFrame to_telemetry(const PlantState& state, double v_bus_nominal, DispatchMode mode,
                            double e_capacity, double e_ref) {
  const double kw_to_amp = 1000.0 / v_bus_nominal;
  TelemetryFrame f;
  f.step = state.step;
  f.t = state.t;
  f.p_gen = state.p_gen;
  f.p_es_bus = state.p_es_bus;
  f.e_es = state.e_es;
  f.soc_pct = 100.0 * state.e_es / e_capacity;
  f.p_pr = state.p_pr;
  f.p_ppl = state.p_ppl;
  f.i_gen.reserve(state.p_gen.size());
  for (double p : state.p_gen) f.i_gen.push_back(p * kw_to_amp);
  f.i_es = state.p_es_bus * kw_to_amp;
  f.i_pr = state.p_pr * kw_to_amp;
  f.i_ppl = state.p_ppl * kw_to_amp;
  f.mode = mode;
  f.flags = state.flags;
  f.e_ref = e_ref;
  return f;
}

}  // namespace shipems
