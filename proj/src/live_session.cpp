#include <algorithm>

#include <nlohmann/json.hpp>

#include "shipems/error.hpp"
#include "shipems/live_service.hpp"

namespace shipems::live {

namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorKind::ValidationError, what);
}

double field(const json& j, const char* key, std::optional<double> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    invalid(std::string("missing field '") + key + "'");
  }
  if (!j.at(key).is_number()) invalid(std::string("field '") + key + "' must be a number");
  return j.at(key).get<double>();
}

void only_keys(const json& j, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      invalid("unknown field '" + key + "'");
    }
  }
}

void check(const SetPropulsion& a) {
  if (!(a.target >= 0.0)) invalid("propulsion target must be >= 0");
  if (!(a.rate > 0.0)) invalid("propulsion rate must be positive");
}

FirePulseTrain single_pulse(const PulseShape& shape) {
  FirePulseTrain train;
  train.count = 1;
  train.shape = shape;
  train.period = shape.duration() + 1.0;
  return train;
}

}  // namespace

OperatorCommand parse_operator_command(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    invalid(std::string("malformed command: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    invalid("command must be an object with a string 'type'");
  }
  const auto type = j["type"].get<std::string>();
  if (type == "fire_pulse") {
    only_keys(j, {"type", "peak", "rate", "hold"});
    PulseShape shape;
    shape.peak = field(j, "peak", shape.peak);
    shape.rate = field(j, "rate", shape.rate);
    shape.hold = field(j, "hold", shape.hold);
    return FirePulse{shape};
  }
  if (type == "set_propulsion") {
    only_keys(j, {"type", "target", "rate"});
    return SetPropulsion{field(j, "target"), field(j, "rate")};
  }
  if (type == "set_soc_ref") {
    only_keys(j, {"type", "e_ref"});
    return SetSocRef{field(j, "e_ref")};
  }
  if (type == "pause") {
    only_keys(j, {"type"});
    return Pause{};
  }
  if (type == "resume") {
    only_keys(j, {"type"});
    return Resume{};
  }
  invalid("unknown command type '" + type + "'");
}

std::string_view to_string(SessionStatus status) noexcept {
  switch (status) {
    case SessionStatus::Running: return "running";
    case SessionStatus::Paused: return "paused";
    case SessionStatus::Finished: return "finished";
  }
  return "running";
}

std::string frame_json(const TelemetryFrame& f) {
  nlohmann::ordered_json j;
  j["step"] = f.step;
  j["t"] = f.t;
  for (std::size_t i = 0; i < f.p_gen.size(); ++i) j["p_gen" + std::to_string(i + 1)] = f.p_gen[i];
  j["p_es_bus"] = f.p_es_bus;
  j["e_es"] = f.e_es;
  j["soc_pct"] = f.soc_pct;
  j["p_pr"] = f.p_pr;
  j["p_ppl"] = f.p_ppl;
  for (std::size_t i = 0; i < f.i_gen.size(); ++i) j["i_gen" + std::to_string(i + 1)] = f.i_gen[i];
  j["i_es"] = f.i_es;
  j["i_pr"] = f.i_pr;
  j["i_ppl"] = f.i_ppl;
  j["mode"] = to_string(f.mode);
  j["flags"] = f.flags.tokens();
  return j.dump();
}

// ---------------------------------------------------------------------------

Subscription::Poll Subscription::next(TelemetryFrame& out, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [this] { return !queue_.empty() || overflowed_ || closed_; });
  if (!queue_.empty()) {
    out = std::move(queue_.front());
    queue_.pop_front();
    return Poll::Frame;
  }
  if (overflowed_) return Poll::Overflow;
  if (closed_) return Poll::Closed;
  return Poll::Timeout;
}

bool Subscription::push(const TelemetryFrame& frame) {
  {
    std::lock_guard lock(mutex_);
    if (overflowed_ || closed_) return false;
    if (queue_.size() >= capacity_) {
      overflowed_ = true;
    } else {
      queue_.push_back(frame);
    }
  }
  cv_.notify_all();
  return true;
}

void Subscription::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Subscription::overflowed() const {
  std::lock_guard lock(mutex_);
  return overflowed_;
}

// ---------------------------------------------------------------------------

Session::Session(std::string id, Scenario scenario, double speed, SessionOptions options)
    : id_(std::move(id)), speed_(speed), options_(options), runner_(std::move(scenario)) {
  if (!(speed > 0.0)) invalid("speed must be positive");
  if (options_.decimation < 1) invalid("decimation must be >= 1");
  latest_ = runner_.frame();
}

Session::~Session() { stop(); }

void Session::start() {
  std::lock_guard lock(mutex_);
  if (!thread_.joinable() && !stop_requested_) thread_ = std::thread([this] { run(); });
}

void Session::stop() {
  {
    std::lock_guard lock(mutex_);
    stop_requested_ = true;
  }
  state_cv_.notify_all();
  if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) thread_.join();
  std::lock_guard lock(mutex_);
  for (auto& s : subscribers_) s->close();
  subscribers_.clear();
}

Ack Session::apply_command(const OperatorCommand& cmd) {
  std::lock_guard lock(mutex_);
  if (status_ == SessionStatus::Finished || stop_requested_) invalid("session has finished");
  if (const auto* fire = std::get_if<FirePulse>(&cmd)) {
    validate(fire->shape, fire->shape.duration() + 1.0);
    const bool queued = std::any_of(pending_.begin(), pending_.end(), [](const auto& c) {
      return std::holds_alternative<FirePulse>(c);
    });
    if (queued || runner_.pulse_active()) {
      throw Error(ErrorKind::Busy, "pulsed load is busy");
    }
  } else if (const auto* prop = std::get_if<SetPropulsion>(&cmd)) {
    check(*prop);
  } else if (const auto* soc = std::get_if<SetSocRef>(&cmd)) {
    if (!(soc->e_ref > 0.0 && soc->e_ref <= runner_.scenario().storage.e_capacity)) {
      invalid("SOC reference outside (0, capacity]");
    }
  }
  pending_.push_back(cmd);
  state_cv_.notify_all();
  return Ack{runner_.state().step};
}

std::shared_ptr<Subscription> Session::subscribe() {
  auto sub = std::make_shared<Subscription>(options_.subscriber_capacity);
  std::lock_guard lock(mutex_);
  if (status_ == SessionStatus::Finished || stop_requested_) {
    sub->close();
  } else {
    subscribers_.push_back(sub);
  }
  return sub;
}

SessionSnapshot Session::snapshot() const {
  std::lock_guard lock(mutex_);
  return {status_, latest_, error_};
}

bool Session::wait_finished(std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  return state_cv_.wait_for(lock, timeout, [this] { return status_ == SessionStatus::Finished; });
}

void Session::publish(const TelemetryFrame& frame) {
  std::erase_if(subscribers_, [&frame](const auto& s) { return !s->push(frame); });
}

void Session::run() {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(runner_.scenario().controller.T / speed_));
  auto base = clock::now();
  std::int64_t paced_steps = 0;

  std::unique_lock lock(mutex_);
  while (!stop_requested_) {
    while (!pending_.empty()) {
      const OperatorCommand cmd = std::move(pending_.front());
      pending_.pop_front();
      if (std::holds_alternative<Pause>(cmd)) {
        status_ = SessionStatus::Paused;
      } else if (std::holds_alternative<Resume>(cmd)) {
        if (status_ == SessionStatus::Paused) {
          status_ = SessionStatus::Running;
          base = clock::now();
          paced_steps = 0;
        }
      } else if (const auto* fire = std::get_if<FirePulse>(&cmd)) {
        runner_.apply(single_pulse(fire->shape));
      } else if (const auto* prop = std::get_if<SetPropulsion>(&cmd)) {
        runner_.apply(*prop);
      } else if (const auto* soc = std::get_if<SetSocRef>(&cmd)) {
        runner_.apply(*soc);
      }
    }
    if (status_ == SessionStatus::Paused) {
      state_cv_.wait(lock, [this] { return stop_requested_ || !pending_.empty(); });
      continue;
    }
    if (runner_.finished()) break;

    try {
      latest_ = runner_.step();
    } catch (const Error& e) {
      error_ = e.what();
      break;
    }
    if (latest_.step % options_.decimation == 0) publish(latest_);

    if (options_.paced) {
      ++paced_steps;
      const auto deadline = base + paced_steps * period;
      state_cv_.wait_until(lock, deadline, [this] { return stop_requested_; });
    } else {
      lock.unlock();
      std::this_thread::yield();
      lock.lock();
    }
  }
  status_ = SessionStatus::Finished;
  for (auto& s : subscribers_) s->close();
  subscribers_.clear();
  lock.unlock();
  state_cv_.notify_all();
}

// ---------------------------------------------------------------------------

std::string SessionManager::start_session(const Scenario& scenario, double speed,
                                          SessionOptions options) {
  if (!(speed > 0.0)) invalid("speed must be positive");
  std::lock_guard lock(mutex_);
  const std::string id = "s" + std::to_string(next_id_++);
  auto session = std::make_shared<Session>(id, scenario, speed, options);
  session->start();
  sessions_.emplace(id, std::move(session));
  return id;
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorKind::UnknownSession, "no session '" + id + "'");
  return it->second;
}

Ack SessionManager::apply_command(const std::string& id, const OperatorCommand& cmd) {
  return find(id)->apply_command(cmd);
}

std::shared_ptr<Subscription> SessionManager::subscribe_telemetry(const std::string& id) {
  return find(id)->subscribe();
}

std::vector<std::string> SessionManager::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

void SessionManager::stop_all() {
  std::map<std::string, std::shared_ptr<Session>> sessions;
  {
    std::lock_guard lock(mutex_);
    sessions.swap(sessions_);
  }
  for (auto& [_, s] : sessions) s->stop();
}

}  // namespace shipems::live
