#include "shipems/hybrid_dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shipems/error.hpp"

namespace shipems {

namespace {

double sum_r_max(std::span<const GeneratorRating> gens) {
  double s = 0.0;
  for (const auto& g : gens) s += g.r_max;
  return s;
}

double sum_r_min(std::span<const GeneratorRating> gens) {
  double s = 0.0;
  for (const auto& g : gens) s += g.r_min;
  return s;
}

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorKind::ValidationError, what);
}

}  // namespace

void validate(const GeneratorRating& gen) {
  if (!(gen.p_min <= gen.p_max)) invalid("generator " + gen.id + ": p_min > p_max");
  if (!(gen.r_min < 0.0 && gen.r_max > 0.0)) {
    invalid("generator " + gen.id + ": ramp limits must satisfy r_min < 0 < r_max");
  }
}

void validate(const StorageRating& s) {
  if (!(s.e_capacity > 0.0)) invalid("storage capacity must be positive");
  if (!(s.e_ref > 0.0 && s.e_ref <= s.e_capacity)) invalid("storage e_ref outside (0, capacity]");
  if (!(s.e_initial >= 0.0 && s.e_initial <= s.e_capacity)) {
    invalid("storage e_initial outside [0, capacity]");
  }
  if (!(s.p_abs_max > 0.0)) invalid("storage p_abs_max must be positive");
}

std::string_view to_string(DispatchMode mode) noexcept {
  switch (mode) {
    case DispatchMode::Tracking: return "Tracking";
    case DispatchMode::SaturatedUp: return "SaturatedUp";
    case DispatchMode::SaturatedDown: return "SaturatedDown";
  }
  return "Tracking";
}

std::optional<DispatchMode> parse_dispatch_mode(std::string_view token) noexcept {
  if (token == "Tracking") return DispatchMode::Tracking;
  if (token == "SaturatedUp") return DispatchMode::SaturatedUp;
  if (token == "SaturatedDown") return DispatchMode::SaturatedDown;
  return std::nullopt;
}

DispatchMode classify_mode(double r_load, std::span<const GeneratorRating> gens) {
  if (r_load > sum_r_max(gens)) return DispatchMode::SaturatedUp;
  if (r_load < sum_r_min(gens)) return DispatchMode::SaturatedDown;
  return DispatchMode::Tracking;
}

std::vector<double> generator_weights(std::span<const GeneratorRating> gens,
                                      RampDirection direction) {
  if (gens.empty()) throw Error(ErrorKind::ZeroAggregateLimit, "no generators");
  std::vector<double> limits;
  limits.reserve(gens.size());
  for (const auto& g : gens) {
    limits.push_back(direction == RampDirection::Up ? g.r_max : std::abs(g.r_min));
  }
  const double total = std::accumulate(limits.begin(), limits.end(), 0.0);
  if (!(total > 0.0)) {
    throw Error(ErrorKind::ZeroAggregateLimit, "aggregate generator ramp limit is zero");
  }
  for (auto& w : limits) w /= total;
  return limits;
}

mpc::StorageEnvelope storage_envelope(double r_load, double p_load,
                                      std::span<const GeneratorRating> gens,
                                      const StorageRating& storage, double p_chg_now) {
  double p_min_sum = 0.0;
  double p_max_sum = 0.0;
  for (const auto& g : gens) {
    p_min_sum += g.p_min;
    p_max_sum += g.p_max;
  }
  mpc::StorageEnvelope env;
  env.r_chg_min = sum_r_min(gens) - r_load;
  env.r_chg_max = sum_r_max(gens) - r_load;
  env.p_chg_min = std::max(p_min_sum - p_load, -storage.p_abs_max);
  env.p_chg_max = std::min(p_max_sum - p_load, storage.p_abs_max);
  env.e_min = 0.0;
  env.e_max = storage.e_capacity;
  env.e_ref = storage.e_ref;
  env.p_chg_now = p_chg_now;
  if (env.p_chg_min > env.p_chg_max) {
    throw Error(ErrorKind::InfeasibleEnvelope,
                "load of " + std::to_string(p_load) +
                    " kW cannot be balanced by generators and storage");
  }
  return env;
}

// ---------------------------------------------------------------------------

ExchangeRecord ExchangeRecord::generator(std::string id, double p_gen) {
  ExchangeRecord r;
  r.sender = std::move(id);
  r.kind = SenderKind::Generator;
  r.p_gen = p_gen;
  return r;
}

ExchangeRecord ExchangeRecord::storage(std::string id, double e_es, double p_es,
                                       double delta_p_es) {
  ExchangeRecord r;
  r.sender = std::move(id);
  r.kind = SenderKind::Storage;
  r.e_es = e_es;
  r.p_es = p_es;
  r.delta_p_es = delta_p_es;
  return r;
}

ExchangeRecord ExchangeRecord::load(std::string id, double delta_p_load) {
  ExchangeRecord r;
  r.sender = std::move(id);
  r.kind = SenderKind::Load;
  r.delta_p_load = delta_p_load;
  return r;
}

ExchangeAggregator::ExchangeAggregator(std::vector<std::string> generator_ids,
                                       std::vector<std::string> load_ids,
                                       std::vector<double> load_powers, std::vector<double> p_gen,
                                       double e_es, double p_es)
    : generator_ids_(std::move(generator_ids)),
      load_ids_(std::move(load_ids)),
      load_powers_(std::move(load_powers)) {
  if (load_ids_.size() != load_powers_.size() || p_gen.size() != generator_ids_.size()) {
    throw Error(ErrorKind::DimensionMismatch, "aggregator initial values do not match ids");
  }
  view_.p_gen = std::move(p_gen);
  view_.e_es = e_es;
  view_.p_es = p_es;
  view_.p_load = std::accumulate(load_powers_.begin(), load_powers_.end(), 0.0);
}

AggregateView ExchangeAggregator::collect(std::span<const ExchangeRecord> records, double T) {
  std::vector<std::string_view> seen;
  seen.reserve(records.size());
  double delta_sum = 0.0;
  for (const auto& rec : records) {
    if (std::find(seen.begin(), seen.end(), rec.sender) != seen.end()) {
      throw Error(ErrorKind::DuplicateSender, "two records from " + rec.sender + " in one step");
    }
    seen.push_back(rec.sender);
    switch (rec.kind) {
      case SenderKind::Generator: {
        auto it = std::find(generator_ids_.begin(), generator_ids_.end(), rec.sender);
        if (it == generator_ids_.end() || !rec.p_gen) {
          throw Error(ErrorKind::ValidationError, "unexpected generator record " + rec.sender);
        }
        view_.p_gen[it - generator_ids_.begin()] = *rec.p_gen;
        break;
      }
      case SenderKind::Storage:
        if (!rec.e_es || !rec.p_es) {
          throw Error(ErrorKind::ValidationError, "storage record missing fields");
        }
        view_.e_es = *rec.e_es;
        view_.p_es = *rec.p_es;
        break;
      case SenderKind::Load: {
        auto it = std::find(load_ids_.begin(), load_ids_.end(), rec.sender);
        if (it == load_ids_.end() || !rec.delta_p_load) {
          throw Error(ErrorKind::ValidationError, "unexpected load record " + rec.sender);
        }
        load_powers_[it - load_ids_.begin()] += *rec.delta_p_load;
        delta_sum += *rec.delta_p_load;
        break;
      }
    }
  }
  view_.r_load = delta_sum / T;
  view_.p_load = std::accumulate(load_powers_.begin(), load_powers_.end(), 0.0);
  return view_;
}

// ---------------------------------------------------------------------------

HybridDispatcher::HybridDispatcher(std::vector<GeneratorRating> gens, StorageRating storage,
                                   ControllerSettings settings, std::vector<double> p_gen_initial)
    : gens_(std::move(gens)),
      storage_(storage),
      settings_(settings),
      model_(mpc::make_prediction_model(settings.T, settings.Np, settings.Nc)),
      p_gen_cmd_(std::move(p_gen_initial)) {
  if (gens_.empty()) throw Error(ErrorKind::ValidationError, "at least one generator required");
  for (const auto& g : gens_) validate(g);
  validate(storage_);
  if (p_gen_cmd_.size() != gens_.size()) {
    throw Error(ErrorKind::DimensionMismatch, "initial generator powers do not match ratings");
  }
  weights_up_ = generator_weights(gens_, RampDirection::Up);
  weights_down_ = generator_weights(gens_, RampDirection::Down);
  r_max_sum_ = sum_r_max(gens_);
  r_min_sum_ = sum_r_min(gens_);
}

void HybridDispatcher::set_soc_reference(double e_ref) {
  if (!(e_ref > 0.0 && e_ref <= storage_.e_capacity)) {
    throw Error(ErrorKind::ValidationError, "SOC reference outside (0, capacity]");
  }
  storage_.e_ref = e_ref;
  tracking_ = true;
}

DispatchCommand HybridDispatcher::dispatch_step(const AggregateView& view) {
  const double T = settings_.T;
  const double r_load = view.r_load;
  const double p_chg_now = -view.p_es;

  // Every step checks that the bus can be balanced at all.
  const auto env = storage_envelope(r_load, view.p_load, gens_, storage_, p_chg_now);

  DispatchCommand cmd;
  cmd.mode = classify_mode(r_load, gens_);

  double r_gen_total = 0.0;
  switch (cmd.mode) {
    case DispatchMode::SaturatedUp:
      r_gen_total = r_max_sum_;
      break;
    case DispatchMode::SaturatedDown:
      r_gen_total = r_min_sum_;
      break;
    case DispatchMode::Tracking: {
      double r_chg = 0.0;
      if (tracking_) {
        const mpc::AugmentedState x{T * p_chg_now, view.e_es};
        qp::SolveOptions opts;
        opts.tol = settings_.qp_tol;
        opts.max_iter = settings_.qp_max_iter;
        cmd.mpc = mpc::mpc_step(model_, x, env, opts);
        r_chg = cmd.mpc->r_chg;
      }
      // r_es_bus = -r_chg, so the generators carry the rest of the load ramp.
      r_gen_total = r_load + r_chg;
      break;
    }
  }

  const auto& w = r_gen_total >= 0.0 ? weights_up_ : weights_down_;
  cmd.r_gen.resize(gens_.size());
  cmd.p_gen_cmd.resize(gens_.size());
  double r_gen_sum = 0.0;
  double p_gen_sum = 0.0;
  for (std::size_t i = 0; i < gens_.size(); ++i) {
    double r = w[i] * r_gen_total;
    const double next = p_gen_cmd_[i] + T * r;
    const double clamped = std::clamp(next, gens_[i].p_min, gens_[i].p_max);
    if (clamped != next) {
      r = (clamped - p_gen_cmd_[i]) / T;
      cmd.generator_clamped = true;
    }
    p_gen_cmd_[i] = clamped;
    cmd.r_gen[i] = r;
    cmd.p_gen_cmd[i] = clamped;
    r_gen_sum += r;
    p_gen_sum += clamped;
  }
  // Storage absorbs whatever ramp the generators do not take.
  cmd.r_es_bus = r_load - r_gen_sum;
  cmd.p_es_expected = view.p_load - p_gen_sum;
  return cmd;
}

}  // namespace shipems
