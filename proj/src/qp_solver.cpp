#include "shipems/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "shipems/error.hpp"

namespace shipems::qp {

namespace {

constexpr double kDegenerateDiagonal = 1e-12;
constexpr double kZeroRow = 1e-14;

Eigen::LLT<Matrix> factorize(const Matrix& M) {
  if (M.rows() != M.cols() || M.rows() == 0) {
    throw Error(ErrorKind::DimensionMismatch, "cost Hessian must be square and non-empty");
  }
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorKind::SingularMatrix, "cost Hessian is not symmetric");
  }
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularMatrix, "cost Hessian is not positive definite");
  }
  return llt;
}

std::vector<int> active_rows(const Vector& lambda) {
  std::vector<int> rows;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] > 0.0) rows.push_back(static_cast<int>(i));
  }
  return rows;
}

QpSolution solve_scalar(const QuadraticProgram& qp, double tol) {
  const double m = qp.M(0, 0);
  if (!(m > 0.0) || !std::isfinite(m)) {
    throw Error(ErrorKind::SingularMatrix, "cost Hessian is not positive definite");
  }
  const double x0 = -qp.F[0] / m;

  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  Eigen::Index lo_row = -1;
  Eigen::Index hi_row = -1;
  for (Eigen::Index i = 0; i < qp.num_constraints(); ++i) {
    const double a = qp.A(i, 0);
    const double b = qp.b[i];
    if (std::abs(a) <= kZeroRow) {
      if (b < -tol) {
        throw Error(ErrorKind::InfeasibleProblem,
                    "constraint row " + std::to_string(i) + " reads 0 <= " + std::to_string(b));
      }
      continue;
    }
    const double bound = b / a;
    if (a > 0.0) {
      if (bound < hi) {
        hi = bound;
        hi_row = i;
      }
    } else if (bound > lo) {
      lo = bound;
      lo_row = i;
    }
  }
  if (lo > hi + tol) {
    throw Error(ErrorKind::InfeasibleProblem, "scalar feasible interval [" + std::to_string(lo) +
                                                  ", " + std::to_string(hi) + "] is empty");
  }

  QpSolution sol;
  sol.delta_p = Vector::Constant(1, x0);
  sol.lambda = Vector::Zero(qp.num_constraints());
  sol.converged = true;
  sol.used_fast_path = true;
  double x = x0;
  if (x > hi) {
    x = hi;
    // Stationarity m x + F + a lambda = 0 on the binding row.
    sol.lambda[hi_row] = -(m * x + qp.F[0]) / qp.A(hi_row, 0);
  } else if (x < lo) {
    x = lo;
    sol.lambda[lo_row] = -(m * x + qp.F[0]) / qp.A(lo_row, 0);
  }
  sol.delta_p[0] = x;
  sol.active_set = active_rows(sol.lambda);
  return sol;
}

}  // namespace

void check_dimensions(const QuadraticProgram& qp) {
  const auto n = qp.F.size();
  if (n == 0 || qp.M.rows() != n || qp.M.cols() != n) {
    throw Error(ErrorKind::DimensionMismatch, "M must be n x n with n = len(F) > 0");
  }
  if (qp.A.rows() != qp.b.size()) {
    throw Error(ErrorKind::DimensionMismatch, "A row count must equal len(b)");
  }
  if (qp.A.rows() > 0 && qp.A.cols() != n) {
    throw Error(ErrorKind::DimensionMismatch, "A column count must equal n");
  }
}

Vector solve_unconstrained(const Matrix& M, const Vector& F) {
  if (M.rows() != F.size()) {
    throw Error(ErrorKind::DimensionMismatch, "M and F sizes differ");
  }
  return -factorize(M).solve(F);
}

HildrethResult hildreth_iterate(const Matrix& H, const Vector& K, double tol, int max_iter) {
  const Eigen::Index m = K.size();
  if (H.rows() != m || H.cols() != m) {
    throw Error(ErrorKind::DimensionMismatch, "H must be m x m with m = len(K)");
  }
  HildrethResult out;
  out.lambda = Vector::Zero(m);
  if (m == 0) {
    out.converged = true;
    return out;
  }
  max_iter = std::max(max_iter, 1);
  Vector& lambda = out.lambda;

  for (int sweep = 0; sweep < max_iter; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double hii = H(i, i);
      if (hii <= kDegenerateDiagonal) {
        lambda[i] = 0.0;
        continue;
      }
      const double coupled = H.row(i).dot(lambda) - hii * lambda[i];
      const double next = std::max(0.0, -(K[i] + coupled) / hii);
      max_change = std::max(max_change, std::abs(next - lambda[i]));
      lambda[i] = next;
    }
    out.iterations = sweep + 1;
    if (max_change <= tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

double dual_objective(const Matrix& H, const Vector& K, const Vector& lambda) {
  return 0.5 * lambda.dot(H * lambda) + lambda.dot(K);
}

double objective(const QuadraticProgram& qp, const Vector& x) {
  return 0.5 * x.dot(qp.M * x) + qp.F.dot(x);
}

double max_violation(const QuadraticProgram& qp, const Vector& x) {
  if (qp.num_constraints() == 0) return -std::numeric_limits<double>::infinity();
  return (qp.A * x - qp.b).maxCoeff();
}

QpSolution qp_solve(const QuadraticProgram& qp, const SolveOptions& options) {
  check_dimensions(qp);
  const Eigen::Index m = qp.num_constraints();

  if (qp.num_variables() == 1 && options.allow_fast_path) {
    return solve_scalar(qp, options.tol);
  }

  const auto llt = factorize(qp.M);
  QpSolution sol;
  sol.delta_p = -llt.solve(qp.F);
  sol.lambda = Vector::Zero(m);

  if (m == 0 || max_violation(qp, sol.delta_p) <= 0.0) {
    sol.converged = true;
    return sol;
  }

  // M^{-1} A' and M^{-1} F from the single factorization.
  const Matrix MinvAt = llt.solve(qp.A.transpose());
  const Matrix H = qp.A * MinvAt;
  const Vector K = qp.b - qp.A * sol.delta_p;

  const int max_iter = options.max_iter > 0 ? options.max_iter : static_cast<int>(50 * m);
  auto dual = hildreth_iterate(H, K, options.tol, max_iter);

  sol.delta_p -= MinvAt * dual.lambda;
  sol.lambda = std::move(dual.lambda);
  sol.iterations = dual.iterations;
  sol.converged = dual.converged;
  sol.active_set = active_rows(sol.lambda);
  return sol;
}

}  // namespace shipems::qp
