#pragma once

#include "shipems/qp_solver.hpp"

namespace shipems::mpc {

using qp::Matrix;
using qp::Vector;

/// Augmented storage state [delta_e, e] in kJ. Everything in this namespace
/// uses the charge-positive storage frame: positive power raises energy.
struct AugmentedState {
  double delta_e = 0.0;
  double e = 0.0;

  Vector as_vector() const { return Eigen::Vector2d(delta_e, e); }
};

struct AugmentedModel {
  Eigen::Matrix2d A;
  Eigen::Vector2d B;
  Eigen::RowVector2d C;
};

/// Prediction matrices over the horizon; immutable once built.
struct PredictionModel {
  AugmentedModel model;
  Matrix G;    // Np x 2
  Matrix Phi;  // Np x Nc
  double T = 0.01;
  int Np = 500;
  int Nc = 1;
};

/// Bounds seen by the MPC, all in the charge-positive frame.
struct StorageEnvelope {
  double p_chg_min = 0.0;  // kW
  double p_chg_max = 0.0;  // kW
  double r_chg_min = 0.0;  // kW/s
  double r_chg_max = 0.0;  // kW/s
  double e_min = 0.0;      // kJ
  double e_max = 0.0;      // kJ
  double e_ref = 0.0;      // kJ
  double p_chg_now = 0.0;  // kW
};

/// Throws Error{InfeasibleEnvelope} when a bound pair is crossed or e_ref
/// lies outside the energy window.
void validate(const StorageEnvelope& env);

/// A = [[1,0],[1,1]], B = [T,T]', C = [0,1].
AugmentedModel build_augmented_model(double T);

/// G rows are C A^i (i = 1..Np); Phi(i,j) = C A^(i-j) B for i >= j.
void build_prediction_matrices(const AugmentedModel& model, int Np, int Nc, Matrix& G,
                               Matrix& Phi);

PredictionModel make_prediction_model(double T, int Np, int Nc);

struct Cost {
  Matrix M;
  Vector F;
};

/// M = 2 (Phi' Phi + I), F = -2 Phi' (e_ref 1 - G x).
Cost build_cost(const Matrix& G, const Matrix& Phi, const AugmentedState& x, double e_ref);

struct Constraints {
  Matrix A;
  Vector b;
};

/**
 * Stacks 4 Nc + 2 Np rows over the increment vector: cumulative power bounds
 * (-Tri; Tri), per-step ramp bounds (-I; I) and predicted energy bounds
 * (-Phi; Phi), in that order.
 */
Constraints build_constraints(const AugmentedState& x, const StorageEnvelope& env,
                              const Matrix& G, const Matrix& Phi, double T, int Np, int Nc);

/// Constraint groups that may be dropped when the stacked set is infeasible.
enum class Relaxation {
  None,
  EnergyDropped,
  EnergyAndPowerDropped,
};

struct StepResult {
  double r_chg = 0.0;  // kW/s, charge-positive
  qp::QpSolution diagnostics;
  Relaxation relaxation = Relaxation::None;
};

/**
 * One receding-horizon step: assemble the QP, solve it and return the first
 * increment divided by T.
 *
 * Ramp rows are never dropped. If the full constraint set is infeasible (the
 * predicted energy or power trajectory cannot be brought back inside its
 * window within the admissible ramp), the energy rows and then the power rows
 * are removed and the problem is solved again; the outcome is reported in
 * StepResult::relaxation.
 */
StepResult mpc_step(const PredictionModel& model, const AugmentedState& x,
                    const StorageEnvelope& env, const qp::SolveOptions& options = {});

}  // namespace shipems::mpc
