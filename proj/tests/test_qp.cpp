#include <doctest.h>

#include "shipems/error.hpp"
#include "shipems/qp_solver.hpp"
#include "shipems/selftest.hpp"

using namespace shipems;
using namespace shipems::qp;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("solve_unconstrained") {
  CHECK(solve_unconstrained(mat({{2}}), vec({-4}))[0] == doctest::Approx(2.0));
  CHECK(solve_unconstrained(Matrix::Identity(2, 2), vec({0, 0})).isZero());
  const Vector x = solve_unconstrained(mat({{2, 0}, {0, 4}}), vec({-2, -8}));
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(2.0));

  CHECK_THROWS_AS(solve_unconstrained(mat({{1, 0}, {0, -1}}), vec({0, 0})), Error);
  try {
    solve_unconstrained(mat({{1, 2}, {0, 1}}), vec({0, 0}));
    FAIL("expected SingularMatrix");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularMatrix);
  }
}

TEST_CASE("hildreth_iterate examples") {
  auto r = hildreth_iterate(mat({{0.5}}), vec({-1}), 1e-9, 100);
  CHECK(r.converged);
  CHECK(r.lambda[0] == doctest::Approx(2.0));

  r = hildreth_iterate(mat({{1}}), vec({3}), 1e-9, 100);
  CHECK(r.lambda[0] == 0.0);

  r = hildreth_iterate(mat({{2, 0}, {0, 2}}), vec({-2, -4}), 1e-9, 100);
  CHECK(r.lambda[0] == doctest::Approx(1.0));
  CHECK(r.lambda[1] == doctest::Approx(2.0));
}

TEST_CASE("hildreth_iterate reports non-convergence instead of throwing") {
  const auto prog = selftest::random_qp(42, 2, 12);
  const Eigen::LLT<Matrix> llt(prog.M);
  const Matrix H = prog.A * llt.solve(prog.A.transpose());
  const Vector K = prog.b + prog.A * llt.solve(prog.F);
  const auto r = hildreth_iterate(H, K, 0.0, 1);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 1);
  CHECK((r.lambda.array() >= 0.0).all());
}

TEST_CASE("hildreth_iterate freezes degenerate rows") {
  const auto r = hildreth_iterate(mat({{0, 0}, {0, 1}}), vec({-5, -1}), 1e-12, 100);
  CHECK(r.lambda[0] == 0.0);
  CHECK(r.lambda[1] == doctest::Approx(1.0));
}

TEST_CASE("qp_solve examples") {
  QuadraticProgram p{mat({{2}}), vec({-4}), mat({{1}}), vec({1})};
  for (bool fast : {true, false}) {
    SolveOptions o;
    o.allow_fast_path = fast;
    auto s = qp_solve(p, o);
    CHECK(s.delta_p[0] == doctest::Approx(1.0));
    CHECK(s.lambda[0] == doctest::Approx(2.0));
    CHECK(s.used_fast_path == fast);
  }

  p.b = vec({5});
  auto s = qp_solve(p);
  CHECK(s.delta_p[0] == doctest::Approx(2.0));
  CHECK(s.lambda[0] == 0.0);

  QuadraticProgram q{mat({{2}}), vec({0}), mat({{1}, {-1}}), vec({1, 1})};
  s = qp_solve(q);
  CHECK(s.delta_p[0] == 0.0);
  CHECK(s.lambda.isZero());
}

TEST_CASE("qp_solve fast path rejects an empty interval") {
  QuadraticProgram p{mat({{2}}), vec({0}), mat({{1}, {-1}}), vec({-1, -1})};
  try {
    qp_solve(p);
    FAIL("expected InfeasibleProblem");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InfeasibleProblem);
  }
}

TEST_CASE("qp_solve checks dimensions") {
  QuadraticProgram p{mat({{2}}), vec({0}), mat({{1, 1}}), vec({1})};
  try {
    qp_solve(p);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("qp_solve agrees with active-set enumeration on random instances") {
  SolveOptions o;
  o.tol = 1e-12;
  o.max_iter = 100000;
  for (int k = 0; k < 200; ++k) {
    const int n = 1 + k % 2;
    const auto prog = selftest::random_qp(9000 + k, n, 1 + k % 9);
    const auto sol = qp_solve(prog, o);
    REQUIRE(sol.converged);
    const auto oracle = selftest::enumerate_qp_optimum(prog);
    REQUIRE(oracle.has_value());
    CHECK(objective(prog, sol.delta_p) == doctest::Approx(objective(prog, *oracle)).epsilon(1e-8));
    CHECK(selftest::kkt_report(prog, sol.delta_p, sol.lambda).ok(1e-6));
  }
}

TEST_CASE("enumeration oracle on a hand-solved instance") {
  // min x^2 + y^2 - 2x - 2y  s.t. x + y <= 1  ->  (0.5, 0.5)
  QuadraticProgram p{2.0 * Matrix::Identity(2, 2), vec({-2, -2}), mat({{1, 1}}), vec({1})};
  const auto x = selftest::enumerate_qp_optimum(p);
  REQUIRE(x);
  CHECK((*x)[0] == doctest::Approx(0.5));
  CHECK((*x)[1] == doctest::Approx(0.5));
  const auto s = qp_solve(p);
  CHECK(s.delta_p[0] == doctest::Approx(0.5));
  CHECK(s.lambda[0] == doctest::Approx(1.0));
  CHECK(s.active_set == std::vector<int>{0});
}
