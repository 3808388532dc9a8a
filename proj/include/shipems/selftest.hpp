#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shipems/mission.hpp"
#include "shipems/qp_solver.hpp"

namespace shipems::selftest {

struct CriterionResult {
  std::string id;
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Mission acceptance criteria 1-8 at their fixed tolerances.
std::vector<CriterionResult> run_acceptance();

/// Invariant and oracle checks on the controller building blocks.
std::vector<CriterionResult> run_invariants();

/// "PASS [id] name: detail" / "FAIL ...".
std::string format(const CriterionResult& r);

// ---------------------------------------------------------------------------
// Oracles, kept independent of the solver code paths they check.

/// Exact minimiser of a QP with n <= 2 by enumerating every candidate active
/// set (none, one row, two rows) and keeping the best feasible candidate.
/// Returns nullopt when no candidate is feasible.
std::optional<qp::Vector> enumerate_qp_optimum(const qp::QuadraticProgram& qp,
                                               double feasibility_tol = 1e-9);

/// Random strictly convex, feasible instance with n variables and m rows.
qp::QuadraticProgram random_qp(std::uint64_t seed, int n, int m);

struct KktReport {
  double primal_violation = 0.0;    // max (A x - b)_i / (1 + |b_i|)
  double min_lambda = 0.0;
  double complementarity = 0.0;     // max |lambda_i (A x - b)_i| / (1 + |b_i|)
  double stationarity = 0.0;        // |M x + F + A' lambda| / (1 + |F|)

  bool ok(double tol) const {
    return primal_violation <= tol && min_lambda >= 0.0 && complementarity <= tol &&
           stationarity <= tol;
  }
};

KktReport kkt_report(const qp::QuadraticProgram& qp, const qp::Vector& x, const qp::Vector& lambda);

/// Energy trajectory of the scalar storage plant E_{k+1} = E_k + T p_k with
/// p_k = p_{k-1} + dP_k for k < len(dP) and held afterwards.
std::vector<double> rollout_energy(double e0, double p_prev, double T,
                                   const std::vector<double>& increments, int steps);

}  // namespace shipems::selftest
