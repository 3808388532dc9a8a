#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "shipems/error.hpp"
#include "shipems/mission.hpp"

using namespace shipems;

namespace {

TelemetryFrame equilibrium_frame() {
  TelemetryFrame f;
  f.p_gen = {2.0 / 3.0, 1.0 / 3.0};
  f.e_es = 8.0;
  f.soc_pct = 80.0;
  f.p_pr = 1.0;
  f.i_gen = {1000 * f.p_gen[0] / 400, 1000 * f.p_gen[1] / 400};
  f.i_pr = 2.5;
  f.e_ref = 8.0;
  return f;
}

Scenario quiet_scenario(double t_end) {
  Scenario s = default_scenario();
  s.events.clear();
  s.storage.e_initial = s.storage.e_ref;
  s.initial_propulsion = 0.0;
  s.t_end = t_end;
  return s;
}

}  // namespace

TEST_CASE("trace row formatting") {
  CHECK(format_trace_row(equilibrium_frame()) ==
        "0.000000,0.666667,0.333333,0.000000,8.000000,80.000000,1.000000,0.000000,1.666667,"
        "0.833333,0.000000,2.500000,0.000000,Tracking,");
  CHECK(trace_header(2) ==
        "t,p_gen1,p_gen2,p_es_bus,e_es,soc_pct,p_pr,p_ppl,i_gen1,i_gen2,i_es,i_pr,i_ppl,mode,flags");
}

TEST_CASE("write_trace edge cases") {
  std::ostringstream out;
  write_trace({}, out);
  CHECK(out.str() == trace_header(2) + "\n");

  const std::vector<TelemetryFrame> one{equilibrium_frame()};
  try {
    write_trace(one, std::filesystem::path("/nonexistent-dir/trace.csv"));
    FAIL("wrote to an unwritable path");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IoError);
  }
}

TEST_CASE("compute_metrics") {
  const auto gens = default_scenario().generators;
  std::vector<TelemetryFrame> trace(5, equilibrium_frame());
  for (std::size_t i = 0; i < trace.size(); ++i) trace[i].step = static_cast<std::int64_t>(i);
  auto m = compute_metrics(trace, gens);
  CHECK(m.ramp_violations == 0);
  CHECK(m.balance_violations == 0);
  CHECK(m.clamp_events == 0);
  CHECK(m.soc_tracking_rmse == 0.0);

  trace[3].p_es_bus = 0.01;
  CHECK(compute_metrics(trace, gens).balance_violations == 1);

  std::vector<TelemetryFrame> two(2, equilibrium_frame());
  two[0].e_es = 7;
  two[1].e_es = 9;
  m = compute_metrics(two, gens);
  CHECK(m.soc_tracking_rmse == doctest::Approx(1.0));
  CHECK(m.min_e_es == 7);
  CHECK(m.max_e_es == 9);
  CHECK(m.final_e_es == 9);

  two[1].p_gen[0] += 0.01;
  two[1].p_es_bus -= 0.01;
  CHECK(compute_metrics(two, gens).ramp_violations == 1);

  try {
    compute_metrics({}, gens);
    FAIL("empty trace accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyTrace);
  }
}

TEST_CASE("default mission end state") {
  const auto r = run_mission(default_scenario());
  CHECK(r.trace.size() == 18001);
  CHECK(r.metrics.final_e_es == doctest::Approx(8.0).epsilon(0.2 / 8.0));
  CHECK(r.metrics.ramp_violations == 0);
  CHECK(r.metrics.balance_violations == 0);
  CHECK(r.metrics.wall_time > 0.0);
  CHECK(r.trace.front().step == 0);
  CHECK(r.trace.back().t == doctest::Approx(180.0));
}

TEST_CASE("CSV round trip reproduces the metrics") {
  const Scenario s = default_scenario();
  const auto r = run_mission(s);
  std::stringstream csv;
  write_trace(r.trace, csv);
  auto back = read_trace(csv);
  REQUIRE(back.size() == r.trace.size());
  assign_soc_reference(back, s);
  const auto m = compute_metrics(back, s.generators, {1e-5, 1e-5});
  CHECK(m.final_e_es == doctest::Approx(r.metrics.final_e_es).epsilon(1e-5));
  CHECK(m.soc_tracking_rmse == doctest::Approx(r.metrics.soc_tracking_rmse).epsilon(1e-5));
  CHECK(m.ramp_violations == 0);
  CHECK(m.balance_violations == 0);
  CHECK(back[5000].mode == r.trace[5000].mode);
  CHECK(back[5000].flags == r.trace[5000].flags);
}

TEST_CASE("equilibrium scenario holds still") {
  const auto r = run_mission(quiet_scenario(5.0));
  const auto& first = r.trace[1];
  for (std::size_t i = 2; i < r.trace.size(); ++i) {
    auto f = r.trace[i];
    f.step = first.step;
    f.t = first.t;
    REQUIRE(f == first);
  }
  CHECK(first.e_es == 8.0);
}

TEST_CASE("unbalanceable load raises InfeasibleEnvelope") {
  Scenario s = quiet_scenario(10.0);
  s.events.push_back({1.0, SetPropulsion{15.0, 10.0}});
  try {
    run_mission(s);
    FAIL("mission completed");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InfeasibleEnvelope);
    CHECK(std::string(e.what()).find("t=") != std::string::npos);
  }
}

TEST_CASE("runs are deterministic") {
  Scenario s = default_scenario();
  s.t_end = 40;
  const auto a = run_mission(s);
  const auto b = run_mission(s);
  CHECK(a.trace == b.trace);
}

TEST_CASE("MissionRunner rejects overlapping pulses") {
  MissionRunner runner(quiet_scenario(10.0));
  runner.apply(FirePulseTrain{1, 2.0, PulseShape{}});
  runner.step();
  CHECK(runner.pulse_active());
  try {
    runner.apply(FirePulseTrain{1, 2.0, PulseShape{}});
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Busy);
  }
}
