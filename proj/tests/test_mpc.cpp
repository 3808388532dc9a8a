#include <doctest.h>

#include "shipems/error.hpp"
#include "shipems/mpc_engine.hpp"
#include "shipems/selftest.hpp"

using namespace shipems;
using namespace shipems::mpc;

namespace {

StorageEnvelope env_example() {
  StorageEnvelope e;
  e.p_chg_min = -1;
  e.p_chg_max = 5;
  e.r_chg_min = -0.3;
  e.r_chg_max = 0.3;
  e.e_min = 0;
  e.e_max = 10;
  e.e_ref = 8;
  e.p_chg_now = 0;
  return e;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::IoError;
}

}  // namespace

TEST_CASE("augmented model") {
  const auto m = build_augmented_model(0.01);
  CHECK(m.A == (Eigen::Matrix2d() << 1, 0, 1, 1).finished());
  CHECK(m.B[0] == doctest::Approx(0.01));
  CHECK(m.B[1] == doctest::Approx(0.01));
  CHECK(m.C == Eigen::RowVector2d(0, 1));
  CHECK(kind_of([] { build_augmented_model(-0.01); }) == ErrorKind::InvalidSamplingTime);
  CHECK(kind_of([] { build_augmented_model(0.0); }) == ErrorKind::InvalidSamplingTime);
}

TEST_CASE("prediction matrices") {
  const auto m = build_augmented_model(0.01);
  Matrix G, Phi;
  build_prediction_matrices(m, 1, 1, G, Phi);
  CHECK(G == (Matrix(1, 2) << 1, 1).finished());
  CHECK(Phi(0, 0) == doctest::Approx(0.01));

  build_prediction_matrices(m, 2, 1, G, Phi);
  CHECK(G == (Matrix(2, 2) << 1, 1, 2, 1).finished());
  CHECK(Phi(0, 0) == doctest::Approx(0.01));
  CHECK(Phi(1, 0) == doctest::Approx(0.02));

  build_prediction_matrices(m, 2, 2, G, Phi);
  CHECK(Phi(0, 0) == doctest::Approx(0.01));
  CHECK(Phi(0, 1) == 0.0);
  CHECK(Phi(1, 0) == doctest::Approx(0.02));
  CHECK(Phi(1, 1) == doctest::Approx(0.01));

  CHECK(kind_of([&] { build_prediction_matrices(m, 1, 2, G, Phi); }) == ErrorKind::InvalidHorizon);
  CHECK(kind_of([&] { build_prediction_matrices(m, 0, 0, G, Phi); }) == ErrorKind::InvalidHorizon);
}

TEST_CASE("cost") {
  const auto pm = make_prediction_model(0.01, 1, 1);
  auto c = build_cost(pm.G, pm.Phi, {0, 3}, 8);
  CHECK(c.M(0, 0) == doctest::Approx(2.0002));
  CHECK(c.F[0] == doctest::Approx(-0.1));
  CHECK(qp::solve_unconstrained(c.M, c.F)[0] == doctest::Approx(0.049995).epsilon(1e-5));

  const auto big = make_prediction_model(0.01, 500, 3);
  c = build_cost(big.G, big.Phi, {0, 8}, 8);
  CHECK(c.F.isZero());
}

TEST_CASE("constraints") {
  const auto pm = make_prediction_model(0.01, 1, 1);
  auto c = build_constraints({0, 3}, env_example(), pm.G, pm.Phi, 0.01, 1, 1);
  REQUIRE(c.A.rows() == 6);
  const double a[] = {-1, 1, -1, 1, -0.01, 0.01};
  const double b[] = {1, 5, 0.003, 0.003, 3, 7};
  for (int i = 0; i < 6; ++i) {
    CHECK(c.A(i, 0) == doctest::Approx(a[i]));
    CHECK(c.b[i] == doctest::Approx(b[i]));
  }

  auto env = env_example();
  env.p_chg_now = env.p_chg_max;
  c = build_constraints({0.05, 3}, env, pm.G, pm.Phi, 0.01, 1, 1);
  CHECK(c.b[1] == doctest::Approx(0.0));

  c = build_constraints({0, 10}, env_example(), pm.G, pm.Phi, 0.01, 1, 1);
  CHECK(c.b[5] == doctest::Approx(0.0));

  const auto wide = make_prediction_model(0.01, 20, 4);
  c = build_constraints({0, 3}, env_example(), wide.G, wide.Phi, 0.01, 20, 4);
  CHECK(c.A.rows() == 4 * 4 + 2 * 20);
}

TEST_CASE("envelope validation") {
  auto env = env_example();
  env.p_chg_min = 6;
  CHECK(kind_of([&] { validate(env); }) == ErrorKind::InfeasibleEnvelope);
  env = env_example();
  env.e_ref = 11;
  CHECK(kind_of([&] { validate(env); }) == ErrorKind::InfeasibleEnvelope);
}

TEST_CASE("mpc_step examples") {
  const auto pm = make_prediction_model(0.01, 500, 1);
  auto env = env_example();
  env.p_chg_min = -100;
  env.p_chg_max = 100;
  auto r = mpc_step(pm, {0, 3}, env);
  CHECK(r.r_chg == doctest::Approx(0.3));
  CHECK(r.relaxation == Relaxation::None);

  r = mpc_step(pm, {0, 8}, env_example());
  CHECK(r.r_chg == doctest::Approx(0.0).epsilon(1e-12));

  r = mpc_step(pm, {0, 8.6}, env_example());
  CHECK(r.r_chg < 0.0);
}

TEST_CASE("mpc_step relaxes the energy rows when the window cannot be kept") {
  const auto pm = make_prediction_model(0.01, 500, 1);
  auto env = env_example();
  env.p_chg_min = -8;
  env.p_chg_max = 8;
  env.p_chg_now = -6;
  // Discharging hard near empty: the ramp cannot stop the predicted energy from
  // crossing zero within the horizon.
  const auto r = mpc_step(pm, {-0.06, 0.5}, env);
  CHECK(r.relaxation != Relaxation::None);
  CHECK(r.r_chg == doctest::Approx(0.3));
}

TEST_CASE("prediction matches the scalar plant") {
  const double T = 0.01;
  const auto pm = make_prediction_model(T, 40, 5);
  const std::vector<double> dp{0.01, -0.004, 0.002, 0.0, -0.001};
  Vector dpv(5);
  for (int i = 0; i < 5; ++i) dpv[i] = dp[i];
  const AugmentedState x{T * 1.5, 4.0};
  const Vector pred = pm.G * x.as_vector() + pm.Phi * dpv;
  const auto plant = selftest::rollout_energy(x.e, 1.5, T, dp, 40);
  for (int i = 0; i < 40; ++i) CHECK(pred[i] == doctest::Approx(plant[i]).epsilon(1e-12));
}
