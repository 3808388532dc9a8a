#include "shipems/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "shipems/error.hpp"
#include "shipems/hybrid_dispatch.hpp"
#include "shipems/mpc_engine.hpp"

namespace shipems::selftest {

namespace {

using qp::Matrix;
using qp::QuadraticProgram;
using qp::Vector;

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

bool within(double value, double target, double tol) { return std::abs(value - target) <= tol; }

bool within_rel(double value, double target, double rel) {
  return std::abs(value - target) <= rel * std::abs(target);
}

/// Indexing helper over a trace with a fixed step.
struct TraceView {
  const std::vector<TelemetryFrame>& trace;
  double T;

  const TelemetryFrame& at(double t) const {
    const auto k = static_cast<std::size_t>(std::llround(t / T));
    return trace.at(std::min(k, trace.size() - 1));
  }

  template <typename Fn>
  void each(double t0, double t1, Fn&& fn) const {
    const auto k0 = static_cast<std::size_t>(std::llround(t0 / T));
    const auto k1 = std::min(static_cast<std::size_t>(std::llround(t1 / T)), trace.size() - 1);
    for (std::size_t k = k0; k <= k1; ++k) fn(trace[k]);
  }

  double min_energy(double t0, double t1) const {
    double m = std::numeric_limits<double>::infinity();
    each(t0, t1, [&](const auto& f) { m = std::min(m, f.e_es); });
    return m;
  }

  double max_energy(double t0, double t1) const {
    double m = -std::numeric_limits<double>::infinity();
    each(t0, t1, [&](const auto& f) { m = std::max(m, f.e_es); });
    return m;
  }
};

std::int64_t ramp_violations(const std::vector<TelemetryFrame>& trace,
                             const std::vector<GeneratorRating>& gens, double t0, double t1,
                             double T) {
  const auto k0 = static_cast<std::size_t>(std::llround(t0 / T));
  const auto k1 = std::min(static_cast<std::size_t>(std::llround(t1 / T)), trace.size() - 1);
  std::span<const TelemetryFrame> window(trace.data() + k0, k1 - k0 + 1);
  return compute_metrics(window, gens).ramp_violations;
}

/// Storage energy excursion when a load ramp exceeds the generators'
/// aggregate capability: the unmet ramp builds a triangular power deficit for
/// the load-ramp duration, then the generators pay it back at their full ramp.
double triangle_excursion(double load_ramp, double load_change, double gen_ramp_limit) {
  const double duration = load_change / std::abs(load_ramp);
  const double unmet = std::abs(load_ramp) - std::abs(gen_ramp_limit);
  const double peak_power = unmet * duration;
  const double recovery = peak_power / std::abs(gen_ramp_limit);
  return 0.5 * peak_power * (duration + recovery);
}

CriterionResult make(std::string id, std::string name, bool ok, std::string detail) {
  return {std::move(id), std::move(name), ok, std::move(detail)};
}

}  // namespace

std::string format(const CriterionResult& r) {
  return std::string(r.passed ? "PASS" : "FAIL") + " [" + r.id + "] " + r.name + ": " + r.detail;
}

// ---------------------------------------------------------------------------
// Oracles

std::optional<Vector> enumerate_qp_optimum(const QuadraticProgram& prog, double tol) {
  const auto n = prog.num_variables();
  const auto m = prog.num_constraints();
  std::optional<Vector> best;
  double best_obj = std::numeric_limits<double>::infinity();

  auto consider = [&](const std::vector<Eigen::Index>& rows) {
    const auto k = static_cast<Eigen::Index>(rows.size());
    Matrix kkt = Matrix::Zero(n + k, n + k);
    Vector rhs(n + k);
    kkt.topLeftCorner(n, n) = prog.M;
    rhs.head(n) = -prog.F;
    for (Eigen::Index r = 0; r < k; ++r) {
      kkt.block(n + r, 0, 1, n) = prog.A.row(rows[r]);
      kkt.block(0, n + r, n, 1) = prog.A.row(rows[r]).transpose();
      rhs[n + r] = prog.b[rows[r]];
    }
    Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) return;
    const Vector x = lu.solve(rhs).head(n);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (prog.A.row(i).dot(x) - prog.b[i] > tol * (1.0 + std::abs(prog.b[i]))) return;
    }
    const double obj = 0.5 * x.dot(prog.M * x) + prog.F.dot(x);
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
  };

  consider({});
  for (Eigen::Index i = 0; i < m; ++i) {
    consider({i});
    if (n < 2) continue;
    for (Eigen::Index j = i + 1; j < m; ++j) consider({i, j});
  }
  return best;
}

QuadraticProgram random_qp(std::uint64_t seed, int n, int m) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto gaussian = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
    return out;
  };
  const Matrix L = gaussian(n, n);
  QuadraticProgram prog;
  prog.M = L * L.transpose() + 0.5 * Matrix::Identity(n, n);
  prog.F = 3.0 * gaussian(n, 1);
  prog.A = gaussian(m, n);
  const Vector feasible = gaussian(n, 1);
  prog.b = prog.A * feasible;
  for (int i = 0; i < m; ++i) {
    if (unit(rng) > 0.2) prog.b[i] += unit(rng);
  }
  return prog;
}

KktReport kkt_report(const QuadraticProgram& prog, const Vector& x, const Vector& lambda) {
  KktReport r;
  const Vector slack = prog.A * x - prog.b;
  r.min_lambda = lambda.size() ? lambda.minCoeff() : 0.0;
  for (Eigen::Index i = 0; i < slack.size(); ++i) {
    const double scale = 1.0 + std::abs(prog.b[i]);
    r.primal_violation = std::max(r.primal_violation, slack[i] / scale);
    r.complementarity = std::max(r.complementarity, std::abs(lambda[i] * slack[i]) / scale);
  }
  const Vector grad = prog.M * x + prog.F + prog.A.transpose() * lambda;
  r.stationarity = grad.norm() / (1.0 + prog.F.norm());
  return r;
}

std::vector<double> rollout_energy(double e0, double p_prev, double T,
                                   const std::vector<double>& increments, int steps) {
  std::vector<double> out;
  out.reserve(steps);
  double e = e0;
  double p = p_prev;
  for (int k = 0; k < steps; ++k) {
    if (k < static_cast<int>(increments.size())) p += increments[k];
    e += T * p;
    out.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

CriterionResult check_qp_suite() {
  constexpr int kInstances = 1000;
  qp::SolveOptions hildreth;
  hildreth.allow_fast_path = false;
  hildreth.tol = 1e-12;
  hildreth.max_iter = 200000;

  int kkt_fail = 0;
  int not_converged = 0;
  int oracle_fail = 0;
  int fast_fail = 0;
  double worst_obj = 0.0;
  double worst_fast = 0.0;
  for (int k = 0; k < kInstances; ++k) {
    const int n = 1 + k % 2;
    const int m = 1 + (k * 7) % 12;
    const auto prog = random_qp(0x5eed0000ULL + k, n, m);
    const auto sol = qp::qp_solve(prog, hildreth);
    if (!sol.converged) {
      ++not_converged;
      continue;
    }
    if (!kkt_report(prog, sol.delta_p, sol.lambda).ok(1e-6)) ++kkt_fail;
    const auto oracle = enumerate_qp_optimum(prog);
    const double gap =
        oracle ? std::abs(qp::objective(prog, sol.delta_p) - qp::objective(prog, *oracle)) : 1e9;
    worst_obj = std::max(worst_obj, gap);
    if (gap > 1e-6) ++oracle_fail;
    if (n == 1) {
      const auto fast = qp::qp_solve(prog);
      const double d = std::abs(fast.delta_p[0] - sol.delta_p[0]);
      worst_fast = std::max(worst_fast, d);
      if (d > 1e-8) ++fast_fail;
    }
  }
  const bool ok = kkt_fail == 0 && not_converged == 0 && oracle_fail == 0 && fast_fail == 0;
  return make("6", "QP correctness (1000 random instances)", ok,
              fmt("non-converged=%d kkt_fail=%d oracle_fail=%d (worst |dJ|=%.2e) "
                  "fast_path_fail=%d (worst |dx|=%.2e)",
                  not_converged, kkt_fail, oracle_fail, worst_obj, fast_fail, worst_fast));
}

CriterionResult check_model_consistency() {
  std::mt19937_64 rng(20240607);
  std::uniform_real_distribution<double> energy(0.0, 10.0);
  std::uniform_real_distribution<double> power(-2.0, 2.0);
  std::uniform_real_distribution<double> step(-0.01, 0.01);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double T = 0.01;
    const int Np = trial == 0 ? 500 : 1 + static_cast<int>(rng() % 60);
    const int Nc = trial == 0 ? 1 : 1 + static_cast<int>(rng() % Np);
    const auto model = mpc::make_prediction_model(T, Np, Nc);
    const double p_prev = power(rng);
    const mpc::AugmentedState x{T * p_prev, energy(rng)};
    std::vector<double> dp(Nc);
    Vector dpv(Nc);
    for (int j = 0; j < Nc; ++j) dpv[j] = dp[j] = step(rng);
    const Vector predicted = model.G * x.as_vector() + model.Phi * dpv;
    const auto plant = rollout_energy(x.e, p_prev, T, dp, Np);
    for (int i = 0; i < Np; ++i) worst = std::max(worst, std::abs(predicted[i] - plant[i]));
  }
  return make("7", "Model consistency (prediction vs plant rollout)", worst <= 1e-10,
              fmt("max |Gx + Phi dP - rollout| = %.2e over 100 sequences (tol 1e-10)", worst));
}

}  // namespace

std::vector<CriterionResult> run_acceptance() {
  std::vector<CriterionResult> out;
  const Scenario scenario = default_scenario();
  const double T = scenario.controller.T;
  const auto& gens = scenario.generators;
  const double w1 = gens[0].r_max / (gens[0].r_max + gens[1].r_max);
  const double w2 = 1.0 - w1;

  // 1. Stage 1 in isolation, timed.
  {
    Scenario stage1 = scenario;
    stage1.t_end = 34.0;
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = run_mission(stage1);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const TraceView v{result.trace, T};
    const auto& end = v.at(34.0);
    const bool holds = v.min_energy(30.0, 34.0) >= 7.9 && v.max_energy(30.0, 34.0) <= 8.1;
    const double load = end.p_load();
    const auto violations = ramp_violations(result.trace, gens, 0.0, 34.0, T);
    const bool ok = within(end.e_es, 8.0, 0.1) && holds &&
                    within_rel(end.p_gen[0], w1 * load, 0.02) &&
                    within_rel(end.p_gen[1], w2 * load, 0.02) && violations == 0 && wall < 2.0 &&
                    within(v.at(12.0).e_es, 3.0, 1e-12);
    out.push_back(make("1", "Stage 1 recharge at constant load", ok,
                       fmt("E(12)=%.4f E(34)=%.4f kJ, E[30,34] in [%.4f, %.4f], gens=%.4f/%.4f kW "
                           "(%.2f/%.2f A), ramp_violations=%lld, runtime=%.3f s",
                           v.at(12.0).e_es, end.e_es, v.min_energy(30.0, 34.0),
                           v.max_energy(30.0, 34.0), end.p_gen[0], end.p_gen[1], end.i_gen[0],
                           end.i_gen[1], static_cast<long long>(violations), wall)));
  }

  // Full mission shared by 2-5 and 8.
  const auto t0 = std::chrono::steady_clock::now();
  const auto full = run_mission(scenario);
  const double full_wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const TraceView v{full.trace, T};

  // 2. Stage 2: propulsion 1 -> 4 kW at 0.375 kW/s from t = 34 s.
  {
    const double r_l = 0.375;
    const double ramp_end = 34.0 + 3.0 / r_l;
    bool saturated = true;
    v.each(34.0 + 2 * T, ramp_end - 2 * T,
           [&](const auto& f) { saturated = saturated && f.mode == DispatchMode::SaturatedUp; });
    const double trough = v.min_energy(34.0, 70.0);
    const double oracle =
        v.at(34.0).e_es - triangle_excursion(r_l, 3.0, gens[0].r_max + gens[1].r_max);
    const auto& end = v.at(70.0);
    const bool ok = saturated && within(trough, 5.0, 0.3) && within(trough, oracle, 0.3) &&
                    within(end.e_es, 8.0, 0.1) && within_rel(end.p_gen[0], w1 * 4.0, 0.02) &&
                    within_rel(end.p_gen[1], w2 * 4.0, 0.02);
    out.push_back(make("2", "Stage 2 up-ramp beyond generator capability", ok,
                       fmt("SaturatedUp during ramp=%s, trough=%.4f kJ (oracle %.4f), E(70)=%.4f, "
                           "gens=%.4f/%.4f kW (%.2f/%.2f A)",
                           saturated ? "yes" : "no", trough, oracle, end.e_es, end.p_gen[0],
                           end.p_gen[1], end.i_gen[0], end.i_gen[1])));
  }

  // 3. Stage 3: propulsion 4 -> 3 kW at -0.5 kW/s from t = 70 s.
  {
    const double r_l = -0.5;
    const double ramp_end = 70.0 + 1.0 / 0.5;
    bool saturated = true;
    v.each(70.0 + 2 * T, ramp_end - 2 * T,
           [&](const auto& f) { saturated = saturated && f.mode == DispatchMode::SaturatedDown; });
    const double peak = v.max_energy(70.0, 100.0);
    const double oracle =
        v.at(70.0).e_es + triangle_excursion(r_l, 1.0, gens[0].r_min + gens[1].r_min);
    const auto& end = v.at(100.0);
    const bool ok = saturated && within(peak, 8.6, 0.3) && within(peak, oracle, 0.3) &&
                    within(end.e_es, 8.0, 0.1) && within_rel(end.p_gen[0], w1 * 3.0, 0.02) &&
                    within_rel(end.p_gen[1], w2 * 3.0, 0.02);
    out.push_back(make("3", "Stage 3 down-ramp beyond generator capability", ok,
                       fmt("SaturatedDown during ramp=%s, peak=%.4f kJ (oracle %.4f), "
                           "E(100)=%.4f, gens=%.4f/%.4f kW (%.2f/%.2f A)",
                           saturated ? "yes" : "no", peak, oracle, end.e_es, end.p_gen[0],
                           end.p_gen[1], end.i_gen[0], end.i_gen[1])));
  }

  // 4. Stage 4: ten 1.6 kJ pulses, one every 6 s from t = 100 s.
  {
    const double peak_kw = 2.0;
    bool ok = true;
    double e_min = 1e9, e_max = -1e9, dip_min = 1e9, dip_max = -1e9, pre_min = 1e9;
    for (int i = 0; i < 10; ++i) {
      const double start = 100.0 + 6.0 * i;
      double energy = 0.0;
      v.each(start + T, start + 6.0, [&](const auto& f) { energy += T * f.p_ppl; });
      const double dip = v.at(start).e_es - v.min_energy(start, start + 6.0 - T);
      e_min = std::min(e_min, energy);
      e_max = std::max(e_max, energy);
      dip_min = std::min(dip_min, dip);
      dip_max = std::max(dip_max, dip);
      ok = ok && within(energy, 1.6, T * peak_kw) && dip >= 1.2 && dip <= 1.6;
      if (i > 0) {
        pre_min = std::min(pre_min, v.at(start).e_es);
        ok = ok && v.at(start).e_es >= 7.5;
      }
    }
    const double final_e = v.at(180.0).e_es;
    const auto violations = ramp_violations(full.trace, gens, 0.0, 180.0, T);
    ok = ok && within(final_e, 8.0, 0.2) && violations == 0;
    out.push_back(make("4", "Stage 4 pulse train", ok,
                       fmt("pulse energy [%.4f, %.4f] kJ, dip [%.4f, %.4f] kJ, min E before "
                           "pulse=%.4f, E(180)=%.4f, ramp_violations=%lld",
                           e_min, e_max, dip_min, dip_max, pre_min, final_e,
                           static_cast<long long>(violations))));
  }

  // 5. Bus balance over the whole mission.
  {
    double worst = 0.0;
    std::int64_t clamped = 0;
    for (const auto& f : full.trace) {
      if (f.flags.es_power_clamped) {
        ++clamped;
        continue;
      }
      worst = std::max(worst, std::abs(f.balance_residual()));
    }
    out.push_back(make("5", "Bus balance invariant", worst <= 1e-9 && clamped == 0,
                       fmt("max |sum p_gen + p_es - p_L| = %.2e kW over %zu frames, "
                           "es_power_clamped=%lld",
                           worst, full.trace.size(), static_cast<long long>(clamped))));
  }

  out.push_back(check_qp_suite());
  out.push_back(check_model_consistency());

  // 8. Performance and determinism.
  {
    const auto second = run_mission(scenario);
    std::ostringstream a, b;
    write_trace(full.trace, a);
    write_trace(second.trace, b);
    const bool identical = a.str() == b.str();
    const bool ok = full_wall < 10.0 && identical &&
                    full.trace.size() == static_cast<std::size_t>(scenario.total_steps()) + 1;
    out.push_back(make("8", "Performance and determinism", ok,
                       fmt("%lld steps in %.3f s (budget 10 s), traces byte-identical=%s",
                           static_cast<long long>(scenario.total_steps()), full_wall,
                           identical ? "yes" : "no")));
  }
  return out;
}

std::vector<CriterionResult> run_invariants() {
  std::vector<CriterionResult> out;
  const double T = 0.01;

  // Unconstrained MPC step equals the closed form.
  {
    const auto model = mpc::make_prediction_model(T, 50, 1);
    mpc::StorageEnvelope env{-100, 100, -1e6, 1e6, 0.0, 1e6, 8.0, 0.0};
    double worst = 0.0;
    for (double e : {7.0, 7.99, 8.0, 8.2}) {
      const mpc::AugmentedState x{0.0, e};
      const auto cost = mpc::build_cost(model.G, model.Phi, x, env.e_ref);
      const double closed = qp::solve_unconstrained(cost.M, cost.F)[0] / T;
      worst = std::max(worst, std::abs(mpc::mpc_step(model, x, env).r_chg - closed));
    }
    out.push_back(make("I1", "Inactive constraints reproduce -M^-1 F / T", worst <= 1e-9,
                       fmt("max diff %.2e", worst)));
  }

  // Constraint row count.
  {
    bool ok = true;
    for (auto [np, nc] : {std::pair{1, 1}, {2, 2}, {50, 3}, {500, 1}}) {
      const auto model = mpc::make_prediction_model(T, np, nc);
      mpc::StorageEnvelope env{-1, 5, -0.3, 0.3, 0, 10, 8, 0};
      const auto c = mpc::build_constraints({0, 3}, env, model.G, model.Phi, T, np, nc);
      ok = ok && c.A.rows() == 4 * nc + 2 * np && c.b.size() == 4 * nc + 2 * np;
    }
    out.push_back(make("I2", "Constraint count is 4 Nc + 2 Np", ok, ok ? "all horizons" : "mismatch"));
  }

  // Closed loop with the scalar plant approaches the reference monotonically.
  {
    const auto model = mpc::make_prediction_model(T, 500, 1);
    const double r_max = 0.3;
    const double deadband = T * T * r_max;
    int breaches = 0;
    double worst_final = 0.0;
    for (double e0 : {0.5, 3.0, 6.0, 7.9, 8.1, 9.5}) {
      double e = e0;
      double p = 0.0;
      for (int k = 0; k < 1000; ++k) {
        mpc::StorageEnvelope env{-5, 5, -r_max, r_max, 0, 10, 8.0, p};
        const auto step = mpc::mpc_step(model, {T * p, e}, env);
        p += T * step.r_chg;
        const double next = e + T * p;
        if (std::abs(e - 8.0) > deadband && std::abs(next - 8.0) > std::abs(e - 8.0) + 1e-12) {
          ++breaches;
        }
        e = next;
      }
      worst_final = std::max(worst_final, std::abs(e - 8.0));
    }
    out.push_back(make("I3", "Closed-loop |E - E*| non-increasing", breaches == 0,
                       fmt("breaches=%d, worst |E - E*| after 10 s = %.4f kJ", breaches,
                           worst_final)));
  }

  // Dual objective never increases across sweeps.
  {
    int increases = 0;
    for (int k = 0; k < 50; ++k) {
      const auto prog = random_qp(777 + k, 2, 10);
      const Eigen::LLT<Matrix> llt(prog.M);
      const Matrix H = prog.A * llt.solve(prog.A.transpose());
      const Vector K = prog.b + prog.A * llt.solve(prog.F);
      double prev = 0.0;
      for (int sweeps = 1; sweeps <= 30; ++sweeps) {
        const auto r = qp::hildreth_iterate(H, K, 0.0, sweeps);
        const double obj = qp::dual_objective(H, K, r.lambda);
        if (obj > prev + 1e-12 * (1.0 + std::abs(prev))) ++increases;
        prev = obj;
      }
    }
    out.push_back(make("I4", "Hildreth dual objective is monotone", increases == 0,
                       fmt("increases=%d over 50 instances x 30 sweeps", increases)));
  }

  // Dispatch commands keep the ramp balance.
  {
    const Scenario s = default_scenario();
    HybridDispatcher d(s.generators, s.storage, s.controller, {0.6667, 0.3333});
    d.set_soc_reference(8.0);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> ramp(-12.0, 12.0), energy(1.0, 9.0), pes(-1.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 2000; ++k) {
      AggregateView view;
      view.r_load = k % 5 == 0 ? 0.0 : ramp(rng);
      view.p_load = 1.0;
      view.e_es = energy(rng);
      view.p_es = pes(rng);
      view.p_gen = d.power_commands();
      const auto cmd = d.dispatch_step(view);
      double sum = cmd.r_es_bus;
      for (double r : cmd.r_gen) sum += r;
      worst = std::max(worst, std::abs(sum - view.r_load));
    }
    out.push_back(make("I5", "Dispatch ramp balance sum r_gen + r_es = r_L", worst <= 1e-9,
                       fmt("max residual %.2e kW/s", worst)));
  }
  return out;
}

}  // namespace shipems::selftest
