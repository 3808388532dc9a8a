// Eigen must come first: <resolv.h>, pulled in by httplib, defines a _res
// macro that collides with Eigen parameter names.
#include "shipems/error.hpp"
#include "shipems/live_service.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

namespace shipems::live {

namespace {

using nlohmann::json;

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownSession: return 404;
    case ErrorKind::Busy: return 409;
    default: return 400;
  }
}

void send_error(httplib::Response& res, const Error& e) {
  res.status = status_for(e.kind());
  json body{{"ack", false}, {"error", to_string(e.kind())}, {"message", e.what()}};
  res.set_content(body.dump(), "application/json");
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

struct HttpService::Impl {
  SessionManager& sessions;
  Scenario default_scenario;
  httplib::Server server;
  std::thread thread;

  Impl(SessionManager& s, Scenario scenario) : sessions(s), default_scenario(std::move(scenario)) {
    routes();
  }

  template <typename Fn>
  static void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const json::exception& e) {
      send_error(res, Error(ErrorKind::ValidationError, e.what()));
    }
  }

  void routes() {
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        Scenario scenario = default_scenario;
        double speed = 1.0;
        SessionOptions options;
        if (!req.body.empty()) {
          json body;
          try {
            body = json::parse(req.body);
          } catch (const json::parse_error& e) {
            throw Error(ErrorKind::ValidationError, e.what());
          }
          if (!body.is_object()) throw Error(ErrorKind::ValidationError, "body must be an object");
          for (const auto& [key, _] : body.items()) {
            if (key != "scenario" && key != "speed" && key != "decimation") {
              throw Error(ErrorKind::ValidationError, "unknown field '" + key + "'");
            }
          }
          if (body.contains("scenario")) scenario = parse_scenario(body["scenario"].dump());
          if (body.contains("speed")) speed = body["speed"].get<double>();
          if (body.contains("decimation")) options.decimation = body["decimation"].get<int>();
        }
        const auto id = sessions.start_session(scenario, speed, options);
        send_json(res, {{"id", id}}, 201);
      });
    });

    server.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, {{"sessions", sessions.ids()}});
    });

    server.Post(R"(/sessions/([^/]+)/command)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    const auto session = sessions.find(req.matches[1]);
                    const auto ack = session->apply_command(parse_operator_command(req.body));
                    send_json(res, {{"ack", true}, {"apply_step", ack.apply_step}});
                  });
                });

    server.Get(R"(/sessions/([^/]+)/state)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   const auto snap = sessions.find(req.matches[1])->snapshot();
                   nlohmann::ordered_json body;
                   body["status"] = to_string(snap.status);
                   body["frame"] = nlohmann::ordered_json::parse(frame_json(snap.frame));
                   body["error"] = snap.error ? nlohmann::ordered_json(*snap.error) : nlohmann::ordered_json();
                   res.set_content(body.dump(), "application/json");
                 });
               });

    server.Get(R"(/sessions/([^/]+)/telemetry)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   auto sub = sessions.subscribe_telemetry(req.matches[1]);
                   res.set_chunked_content_provider(
                       "application/x-ndjson",
                       [sub](std::size_t, httplib::DataSink& sink) {
                         return pump(*sub, sink);
                       },
                       [sub](bool) { sub->close(); });
                 });
               });
  }

  /// Writes whatever frames are ready; returning false drops the connection.
  static bool pump(Subscription& sub, httplib::DataSink& sink) {
    TelemetryFrame frame;
    std::string chunk;
    auto poll = sub.next(frame, std::chrono::milliseconds(200));
    for (int n = 0; poll == Subscription::Poll::Frame; ++n) {
      chunk += frame_json(frame);
      chunk += '\n';
      if (n >= 255) break;
      poll = sub.next(frame, std::chrono::milliseconds(0));
    }
    if (!chunk.empty() && !sink.write(chunk.data(), chunk.size())) return false;
    if (poll == Subscription::Poll::Overflow) {
      const std::string notice = R"({"overflow":true,"message":"subscriber fell behind"})" "\n";
      sink.write(notice.data(), notice.size());
      sink.done();
    } else if (poll == Subscription::Poll::Closed) {
      sink.done();
    } else if (chunk.empty() && !sink.is_writable()) {
      return false;
    }
    return true;
  }
};

HttpService::HttpService(SessionManager& sessions, Scenario default_scenario)
    : impl_(std::make_unique<Impl>(sessions, std::move(default_scenario))) {}

HttpService::~HttpService() { stop(); }

int HttpService::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) return -1;
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

bool HttpService::listen(const std::string& host, int port) {
  return impl_->server.listen(host, port);
}

void HttpService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace shipems::live
