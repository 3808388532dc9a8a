#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "shipems/mission.hpp"

namespace shipems::live {

struct FirePulse {
  PulseShape shape;
};
struct Pause {};
struct Resume {};

using OperatorCommand = std::variant<FirePulse, SetPropulsion, SetSocRef, Pause, Resume>;

/// Parses {"type": "...", ...}. Throws Error{ValidationError} on bad input.
OperatorCommand parse_operator_command(std::string_view json_text);

enum class SessionStatus { Running, Paused, Finished };
std::string_view to_string(SessionStatus status) noexcept;

/// One telemetry frame as a JSON object: the CSV columns plus "step".
std::string frame_json(const TelemetryFrame& frame);

struct SessionOptions {
  /// Publish every n-th frame.
  int decimation = 1;
  /// Frames buffered per subscriber before it is dropped.
  std::size_t subscriber_capacity = 4096;
  /// When false the loop runs as fast as it can (tests, batch replays).
  bool paced = true;
};

/**
 * Bounded per-subscriber frame queue. The control loop never waits on it: a
 * full queue marks the subscriber as overflowed and it receives no further
 * frames.
 */
class Subscription {
 public:
  enum class Poll { Frame, Timeout, Overflow, Closed };

  explicit Subscription(std::size_t capacity) : capacity_(capacity) {}

  Poll next(TelemetryFrame& out, std::chrono::milliseconds timeout);

  /// Control-loop side; returns false once the subscriber is overflowed.
  bool push(const TelemetryFrame& frame);
  void close();
  bool overflowed() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<TelemetryFrame> queue_;
  std::size_t capacity_;
  bool overflowed_ = false;
  bool closed_ = false;
};

struct Ack {
  /// The command is applied at the boundary after this step, so its effect
  /// first shows in frame apply_step + 1.
  std::int64_t apply_step = 0;
};

struct SessionSnapshot {
  SessionStatus status = SessionStatus::Running;
  TelemetryFrame frame;
  std::optional<std::string> error;
};

/**
 * A mission running on its own control thread, stepping every T / speed of
 * wall time. Commands are queued and applied only at step boundaries.
 */
class Session {
 public:
  Session(std::string id, Scenario scenario, double speed, SessionOptions options = {});
  ~Session();

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  void start();
  void stop();

  /// Throws Error{Busy} for a pulse while one is active or pending and
  /// Error{ValidationError} for bad parameters or a finished session.
  Ack apply_command(const OperatorCommand& cmd);

  std::shared_ptr<Subscription> subscribe();
  SessionSnapshot snapshot() const;
  /// Blocks until the mission finishes or the timeout elapses.
  bool wait_finished(std::chrono::milliseconds timeout) const;

  const std::string& id() const noexcept { return id_; }
  double speed() const noexcept { return speed_; }

 private:
  void run();
  void publish(const TelemetryFrame& frame);

  std::string id_;
  double speed_;
  SessionOptions options_;
  MissionRunner runner_;

  mutable std::mutex mutex_;
  mutable std::condition_variable state_cv_;
  std::deque<OperatorCommand> pending_;
  std::vector<std::shared_ptr<Subscription>> subscribers_;
  SessionStatus status_ = SessionStatus::Running;
  std::optional<std::string> error_;
  TelemetryFrame latest_;
  bool stop_requested_ = false;
  std::thread thread_;
};

class SessionManager {
 public:
  /// Throws Error{ValidationError} for speed <= 0 or an invalid scenario.
  std::string start_session(const Scenario& scenario, double speed, SessionOptions options = {});

  /// Throws Error{UnknownSession}.
  std::shared_ptr<Session> find(const std::string& id) const;
  Ack apply_command(const std::string& id, const OperatorCommand& cmd);
  std::shared_ptr<Subscription> subscribe_telemetry(const std::string& id);
  std::vector<std::string> ids() const;
  void stop_all();

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

/**
 * HTTP/JSON front end:
 *   POST /sessions                  {"scenario"?, "speed"?, "decimation"?} -> {"id"}
 *   GET  /sessions                  -> {"sessions": [...]}
 *   POST /sessions/{id}/command     OperatorCommand -> {"ack", "apply_step"}
 *   GET  /sessions/{id}/state       -> {"status", "frame", "error"}
 *   GET  /sessions/{id}/telemetry   newline-delimited JSON frames
 */
class HttpService {
 public:
  HttpService(SessionManager& sessions, Scenario default_scenario);
  ~HttpService();

  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port, or -1 on failure.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  bool listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace shipems::live
