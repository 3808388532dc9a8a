#pragma once

#include <vector>

#include <Eigen/Dense>

namespace shipems::qp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/**
 * Dense convex QP
 *
 *   min  1/2 x' M x + F' x
 *   s.t. A x <= b
 *
 * M must be symmetric positive definite.
 */
struct QuadraticProgram {
  Matrix M;
  Vector F;
  Matrix A;
  Vector b;

  Eigen::Index num_variables() const { return F.size(); }
  Eigen::Index num_constraints() const { return b.size(); }
};

/// Dual of a QuadraticProgram: min_{lambda >= 0} 1/2 l' H l + l' K.
struct DualProblem {
  Matrix H;
  Vector K;
  Vector lambda;
};

struct QpSolution {
  Vector delta_p;
  Vector lambda;
  int iterations = 0;
  bool converged = false;
  bool used_fast_path = false;
  std::vector<int> active_set;
};

struct HildrethResult {
  Vector lambda;
  bool converged = false;
  int iterations = 0;
};

struct SolveOptions {
  double tol = 1e-9;
  /// Gauss-Seidel sweep cap; <= 0 selects 50 * m.
  int max_iter = 0;
  /// Allow the closed-form clamp when there is a single decision variable.
  bool allow_fast_path = true;
};

/// Throws Error{DimensionMismatch} on inconsistent shapes.
void check_dimensions(const QuadraticProgram& qp);

/// Returns -M^{-1} F. Throws Error{SingularMatrix} if M is not positive definite.
Vector solve_unconstrained(const Matrix& M, const Vector& F);

/**
 * Hildreth's method: projected Gauss-Seidel on the dual. Starting from
 * lambda = 0, each sweep updates
 *
 *   lambda_i <- max(0, -(K_i + sum_{j != i} H_ij lambda_j) / H_ii)
 *
 * using the freshest values of lambda_j. Rows with H_ii <= 1e-12 stay at zero.
 * Convergence is declared when the largest component change of a sweep is at
 * most tol. Non-convergence is reported through the flag, never thrown.
 */
HildrethResult hildreth_iterate(const Matrix& H, const Vector& K, double tol, int max_iter);

/// Dual objective 1/2 l' H l + l' K (without the constant term).
double dual_objective(const Matrix& H, const Vector& K, const Vector& lambda);

/// Primal objective 1/2 x' M x + F' x.
double objective(const QuadraticProgram& qp, const Vector& x);

/**
 * Solves qp through the dual. If the unconstrained optimum is feasible it is
 * returned with zero multipliers. With one variable and the fast path
 * enabled, the optimum is the unconstrained minimiser clamped to the
 * intersection of the scalar bounds; Error{InfeasibleProblem} is thrown when
 * that intersection is empty beyond tol.
 */
QpSolution qp_solve(const QuadraticProgram& qp, const SolveOptions& options = {});

/// Largest value of (A x - b)_i, or -inf when there are no rows.
double max_violation(const QuadraticProgram& qp, const Vector& x);

}  // namespace shipems::qp
