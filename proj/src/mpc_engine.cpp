#include "shipems/mpc_engine.hpp"

#include <cmath>
#include <string>

#include "shipems/error.hpp"

namespace shipems::mpc {

namespace {

void require_pair(double lo, double hi, const char* what) {
  if (!(lo <= hi)) {
    throw Error(ErrorKind::InfeasibleEnvelope, std::string(what) + " bounds cross: [" +
                                                   std::to_string(lo) + ", " +
                                                   std::to_string(hi) + "]");
  }
}

qp::QuadraticProgram select_rows(const Cost& cost, const Constraints& all, Eigen::Index first,
                                 Eigen::Index count) {
  qp::QuadraticProgram prog{cost.M, cost.F, all.A.middleRows(first, count),
                            all.b.segment(first, count)};
  return prog;
}

bool infeasible_result(const qp::QuadraticProgram& prog, const qp::QpSolution& sol) {
  if (prog.num_constraints() == 0) return false;
  const double scale = 1.0 + prog.b.cwiseAbs().maxCoeff();
  return qp::max_violation(prog, sol.delta_p) > 1e-6 * scale;
}

}  // namespace

void validate(const StorageEnvelope& env) {
  require_pair(env.p_chg_min, env.p_chg_max, "storage power");
  require_pair(env.r_chg_min, env.r_chg_max, "storage ramp");
  require_pair(env.e_min, env.e_max, "storage energy");
  if (env.e_min < 0.0) {
    throw Error(ErrorKind::InfeasibleEnvelope, "e_min must be non-negative");
  }
  if (env.e_ref < env.e_min || env.e_ref > env.e_max) {
    throw Error(ErrorKind::InfeasibleEnvelope, "e_ref outside the energy window");
  }
}

AugmentedModel build_augmented_model(double T) {
  if (!(T > 0.0) || !std::isfinite(T)) {
    throw Error(ErrorKind::InvalidSamplingTime, "sampling time must be positive, got " +
                                                    std::to_string(T));
  }
  AugmentedModel m;
  m.A << 1.0, 0.0, 1.0, 1.0;
  // E_{k+1} = E_k + dE_k + T dP_k, so the input enters both rows.
  m.B << T, T;
  m.C << 0.0, 1.0;
  return m;
}

void build_prediction_matrices(const AugmentedModel& model, int Np, int Nc, Matrix& G,
                               Matrix& Phi) {
  if (Np < 1 || Nc < 1 || Nc > Np) {
    throw Error(ErrorKind::InvalidHorizon, "need 1 <= Nc <= Np, got Np=" + std::to_string(Np) +
                                               " Nc=" + std::to_string(Nc));
  }
  G.resize(Np, 2);
  Vector impulse(Np);  // C A^k B, k = 0..Np-1
  Eigen::Matrix2d Ak = Eigen::Matrix2d::Identity();
  for (int k = 0; k < Np; ++k) {
    impulse[k] = model.C * Ak * model.B;
    Ak = model.A * Ak;
    G.row(k) = model.C * Ak;
  }
  Phi = Matrix::Zero(Np, Nc);
  for (int j = 0; j < Nc; ++j) {
    Phi.col(j).tail(Np - j) = impulse.head(Np - j);
  }
}

PredictionModel make_prediction_model(double T, int Np, int Nc) {
  PredictionModel pm;
  pm.model = build_augmented_model(T);
  build_prediction_matrices(pm.model, Np, Nc, pm.G, pm.Phi);
  pm.T = T;
  pm.Np = Np;
  pm.Nc = Nc;
  return pm;
}

Cost build_cost(const Matrix& G, const Matrix& Phi, const AugmentedState& x, double e_ref) {
  if (G.cols() != 2 || G.rows() != Phi.rows() || Phi.cols() < 1) {
    throw Error(ErrorKind::DimensionMismatch, "G must be Np x 2 and Phi Np x Nc");
  }
  const auto Nc = Phi.cols();
  const Vector error = Vector::Constant(G.rows(), e_ref) - G * x.as_vector();
  Cost cost;
  cost.M = 2.0 * (Phi.transpose() * Phi + Matrix::Identity(Nc, Nc));
  cost.F = -2.0 * Phi.transpose() * error;
  return cost;
}

Constraints build_constraints(const AugmentedState& x, const StorageEnvelope& env,
                              const Matrix& G, const Matrix& Phi, double T, int Np, int Nc) {
  if (Np < 1 || Nc < 1 || G.rows() != Np || G.cols() != 2 || Phi.rows() != Np ||
      Phi.cols() != Nc) {
    throw Error(ErrorKind::DimensionMismatch, "G/Phi do not match Np/Nc");
  }
  const Matrix tri = Matrix::Ones(Nc, Nc).triangularView<Eigen::Lower>();
  const Matrix eye = Matrix::Identity(Nc, Nc);
  const Vector ones_c = Vector::Ones(Nc);
  const Vector ones_p = Vector::Ones(Np);
  const Vector gx = G * x.as_vector();

  Constraints c;
  c.A.resize(4 * Nc + 2 * Np, Nc);
  c.b.resize(4 * Nc + 2 * Np);
  c.A << -tri, tri, -eye, eye, -Phi, Phi;
  c.b << (env.p_chg_now - env.p_chg_min) * ones_c, (env.p_chg_max - env.p_chg_now) * ones_c,
      -T * env.r_chg_min * ones_c, T * env.r_chg_max * ones_c, -env.e_min * ones_p + gx,
      env.e_max * ones_p - gx;
  return c;
}

StepResult mpc_step(const PredictionModel& model, const AugmentedState& x,
                    const StorageEnvelope& env, const qp::SolveOptions& options) {
  validate(env);
  const Cost cost = build_cost(model.G, model.Phi, x, env.e_ref);
  const Constraints all =
      build_constraints(x, env, model.G, model.Phi, model.T, model.Np, model.Nc);

  const Eigen::Index nc = model.Nc;
  const Eigen::Index rows = all.b.size();
  // Row windows: [power | ramp | energy].
  struct Attempt {
    Eigen::Index first;
    Eigen::Index count;
    Relaxation relaxation;
  };
  const Attempt attempts[] = {
      {0, rows, Relaxation::None},
      {0, 4 * nc, Relaxation::EnergyDropped},
      {2 * nc, 2 * nc, Relaxation::EnergyAndPowerDropped},
  };

  StepResult result;
  for (const auto& attempt : attempts) {
    const auto prog = select_rows(cost, all, attempt.first, attempt.count);
    result.relaxation = attempt.relaxation;
    try {
      result.diagnostics = qp::qp_solve(prog, options);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InfeasibleProblem ||
          attempt.relaxation == Relaxation::EnergyAndPowerDropped) {
        throw;
      }
      continue;
    }
    if (attempt.relaxation == Relaxation::EnergyAndPowerDropped ||
        !infeasible_result(prog, result.diagnostics)) {
      break;
    }
  }
  result.r_chg = result.diagnostics.delta_p[0] / model.T;
  return result;
}

}  // namespace shipems::mpc
