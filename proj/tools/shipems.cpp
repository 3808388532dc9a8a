#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "shipems/error.hpp"
#include "shipems/live_service.hpp"
#include "shipems/mission.hpp"
#include "shipems/selftest.hpp"

namespace {

using namespace shipems;

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kInfeasible = 2;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InfeasibleProblem:
    case ErrorKind::InfeasibleEnvelope:
    case ErrorKind::SingularMatrix:
    case ErrorKind::ZeroAggregateLimit:
      return kInfeasible;
    default:
      return kInvalid;
  }
}

Scenario scenario_from(const std::string& path) {
  return path.empty() ? default_scenario() : load_scenario(path);
}

int cmd_validate(const std::string& path) {
  const Scenario s = load_scenario(path);
  std::printf("ok: %zu generators, %zu events, %lld steps\n", s.generators.size(),
              s.events.size(), static_cast<long long>(s.total_steps()));
  return kOk;
}

int cmd_run(const std::string& scenario_path, const std::string& trace_path,
            const std::string& metrics_path) {
  const Scenario s = scenario_from(scenario_path);
  const auto result = run_mission(s);
  if (!trace_path.empty()) write_trace(result.trace, trace_path, s.generators.size());
  const std::string metrics = metrics_json(result.metrics);
  if (metrics_path.empty()) {
    std::cout << metrics;
  } else {
    std::ofstream out(metrics_path);
    if (!(out << metrics)) {
      throw Error(ErrorKind::IoError, "cannot write " + metrics_path);
    }
  }
  return kOk;
}

int cmd_selftest() {
  bool ok = true;
  for (const auto& r : selftest::run_acceptance()) {
    std::cout << selftest::format(r) << '\n';
    ok = ok && r.passed;
  }
  for (const auto& r : selftest::run_invariants()) {
    std::cout << selftest::format(r) << '\n';
    ok = ok && r.passed;
  }
  return ok ? kOk : kInvalid;
}

std::atomic<bool> g_interrupted{false};

int cmd_serve(const std::string& scenario_path, const std::string& host, int port, double speed) {
  const Scenario s = scenario_from(scenario_path);
  live::SessionManager sessions;
  live::HttpService http(sessions, s);
  const std::string id = sessions.start_session(s, speed);
  const int bound = http.start(host, port);
  if (bound < 0) throw Error(ErrorKind::IoError, "cannot bind " + host + ":" + std::to_string(port));
  std::printf("listening on http://%s:%d, session %s at %.3gx\n", host.c_str(), bound,
              id.c_str(), speed);
  std::fflush(stdout);

  std::signal(SIGINT, [](int) { g_interrupted = true; });
  std::signal(SIGTERM, [](int) { g_interrupted = true; });
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  http.stop();
  sessions.stop_all();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shipboard hybrid energy management: MPC storage dispatch and mission simulator"};
  app.require_subcommand(1);

  std::string scenario_path, trace_path, metrics_path, host = "127.0.0.1";
  int port = 8080;
  double speed = 1.0;

  auto* run = app.add_subcommand("run", "Run a mission and write the trace and metrics");
  run->add_option("--scenario", scenario_path, "Scenario JSON (default mission if omitted)");
  run->add_option("--trace", trace_path, "Trace CSV output");
  run->add_option("--metrics", metrics_path, "Metrics JSON output (stdout if omitted)");

  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("--scenario", scenario_path, "Scenario JSON")->required();

  auto* selftest = app.add_subcommand("selftest", "Run acceptance and invariant checks");

  auto* serve = app.add_subcommand("serve", "Run a live session behind the HTTP API");
  serve->add_option("--scenario", scenario_path, "Scenario JSON (default mission if omitted)");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "TCP port (0 picks a free one)");
  serve->add_option("--speed", speed, "Simulated seconds per wall second")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalid;
  }

  try {
    if (*run) return cmd_run(scenario_path, trace_path, metrics_path);
    if (*validate) return cmd_validate(scenario_path);
    if (*selftest) return cmd_selftest();
    if (*serve) return cmd_serve(scenario_path, host, port, speed);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  }
  return kOk;
}
