#include <doctest.h>

#include "shipems/error.hpp"
#include "shipems/plant_sim.hpp"

using namespace shipems;

namespace {

PlantConfig config() {
  return {{{"GEN1", 0, 4, -0.2, 0.2}, {"GEN2", 0, 2, -0.1, 0.1}}, {10, 8, 8, 3}};
}

PlantState state(std::vector<double> p_gen, double e) {
  PlantState s;
  s.p_gen = std::move(p_gen);
  s.e_es = e;
  s.p_pr = 1.0;
  return s;
}

DispatchCommand command(std::vector<double> p_cmd) {
  DispatchCommand c;
  c.p_gen_cmd = std::move(p_cmd);
  c.r_gen.assign(c.p_gen_cmd.size(), 0.0);
  return c;
}

}  // namespace

TEST_CASE("step_plant: steady state") {
  const auto s = state({2.0 / 3.0, 1.0 / 3.0}, 8);
  const auto n = step_plant(config(), s, command(s.p_gen), {1.0, 0, 0, 0}, 0.01);
  CHECK(n.p_es_bus == doctest::Approx(0).epsilon(1e-12));
  CHECK(n.e_es == doctest::Approx(8));
  CHECK(n.step == 1);
  CHECK(n.t == doctest::Approx(0.01));
  CHECK_FALSE(n.flags.any());
}

TEST_CASE("step_plant: storage covers a deficit") {
  const auto s = state({0.6, 0.3}, 5);
  const auto n = step_plant(config(), s, command(s.p_gen), {1.0, 0, 0, 0}, 0.01);
  CHECK(n.p_es_bus == doctest::Approx(0.1));
  CHECK(n.e_es == doctest::Approx(5 - 0.001));
  CHECK(n.balance_residual() == doctest::Approx(0).epsilon(1e-15));
}

TEST_CASE("step_plant: generator ramp limit") {
  const auto s = state({0.667, 0.333}, 5);
  const auto n = step_plant(config(), s, command({1.0, 0.333}), {1.0, 0, 0, 0}, 0.01);
  CHECK(n.p_gen[0] == doctest::Approx(0.669));
  CHECK(n.flags.gen_limit_hit);
}

TEST_CASE("step_plant: storage power and energy clamps") {
  auto s = state({0, 0}, 5);
  auto n = step_plant(config(), s, command({0, 0}), {9.0, 0, 0, 0}, 0.01);
  CHECK(n.p_es_bus == doctest::Approx(8));
  CHECK(n.flags.es_power_clamped);

  s = state({0, 0}, 0.0005);
  n = step_plant(config(), s, command({0, 0}), {1.0, 0, 0, 0}, 0.01);
  CHECK(n.e_es == 0.0);
  CHECK(n.flags.es_energy_clamped);
}

TEST_CASE("flag tokens") {
  PlantFlags f;
  CHECK(f.tokens().empty());
  f.es_power_clamped = true;
  f.gen_limit_hit = true;
  CHECK(PlantFlags::from_tokens(f.tokens()) == f);
  CHECK(PlantFlags::from_tokens("") == PlantFlags{});
  CHECK_THROWS_AS(PlantFlags::from_tokens("bogus"), Error);
}

TEST_CASE("pulse shape") {
  const PulseShape p;
  CHECK(p.rise_time() == doctest::Approx(0.2));
  CHECK(p.duration() == doctest::Approx(1.0));
  CHECK(p.energy() == doctest::Approx(1.6));
  CHECK(p.power_at(0.1) == doctest::Approx(1.0));
  CHECK(p.power_at(0.5) == doctest::Approx(2.0));
  CHECK(p.power_at(0.9) == doctest::Approx(1.0));
  CHECK(p.power_at(1.2) == 0.0);
  CHECK_THROWS_AS(validate(p, 0.9), Error);
  CHECK_NOTHROW(validate(p, 6.0));
}

TEST_CASE("advance_loads: pulse and propulsion") {
  const double T = 0.01;
  LoadModel loads;
  loads.propulsion = {1.0, 1.0, 0.0};
  loads.pulses = PulseTrain{0, 2, 6.0, PulseShape{}};
  double energy = 0.0;
  LoadStep last;
  for (std::int64_t k = 0; k < 600; ++k) {
    last = advance_loads(loads, k, T);
    energy += T * last.p_ppl;
    if (k + 1 == 10) CHECK(last.p_ppl == doctest::Approx(1.0));
    if (k + 1 == 50) CHECK(last.p_ppl == doctest::Approx(2.0));
  }
  CHECK(energy == doctest::Approx(1.6).epsilon(1e-9));
  CHECK(loads.pulse_active(600, T));
  for (std::int64_t k = 600; k < 1200; ++k) advance_loads(loads, k, T);
  CHECK_FALSE(loads.pulse_active(1200, T));

  loads.propulsion.target = 4.0;
  loads.propulsion.rate = 0.375;
  double p = 1.0;
  for (std::int64_t k = 0; k < 900; ++k) {
    last = advance_loads(loads, 1200 + k, T);
    if (k == 0) CHECK(last.delta_p_pr == doctest::Approx(0.00375));
    p = last.p_pr;
  }
  CHECK(p == 4.0);
  CHECK(last.delta_p_pr == 0.0);
}

TEST_CASE("telemetry currents") {
  PlantState s = state({0.667, 0.333}, 8);
  s.p_ppl = 2.0;
  const auto f = to_telemetry(s, 400, DispatchMode::Tracking, 10, 8);
  CHECK(f.i_gen[0] == doctest::Approx(1.6675));
  CHECK(f.i_ppl == doctest::Approx(5.0));
  CHECK(f.i_pr == doctest::Approx(2.5));
  CHECK(f.soc_pct == doctest::Approx(80));

  PlantState zero;
  zero.p_gen = {0, 0};
  const auto z = to_telemetry(zero, 400, DispatchMode::Tracking, 10, 8);
  CHECK(z.i_gen[0] == 0.0);
  CHECK(z.i_es == 0.0);
  CHECK(z.i_pr == 0.0);
  CHECK(z.i_ppl == 0.0);
}
