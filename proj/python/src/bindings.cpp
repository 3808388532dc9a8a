#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "shipems/error.hpp"
#include "shipems/hybrid_dispatch.hpp"
#include "shipems/mission.hpp"
#include "shipems/mpc_engine.hpp"
#include "shipems/qp_solver.hpp"
#include "shipems/selftest.hpp"

namespace py = pybind11;
using namespace shipems;

namespace {

py::dict metrics_dict(const MissionMetrics& m) {
  py::dict d;
  d["final_e_es"] = m.final_e_es;
  d["min_e_es"] = m.min_e_es;
  d["max_e_es"] = m.max_e_es;
  d["soc_tracking_rmse"] = m.soc_tracking_rmse;
  d["ramp_violations"] = m.ramp_violations;
  d["balance_violations"] = m.balance_violations;
  d["clamp_events"] = m.clamp_events;
  d["wall_time"] = m.wall_time;
  return d;
}

// Column-oriented copy of the trace; p_gen and i_gen are (frames, generators).
py::dict trace_dict(const std::vector<TelemetryFrame>& trace) {
  const auto n = static_cast<Eigen::Index>(trace.size());
  const auto g = n ? static_cast<Eigen::Index>(trace.front().p_gen.size()) : 0;
  Eigen::VectorXd t(n), p_es(n), e_es(n), soc(n), p_pr(n), p_ppl(n), i_es(n), i_pr(n), i_ppl(n);
  Eigen::MatrixXd p_gen(n, g), i_gen(n, g);
  std::vector<std::string> mode, flags;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& f = trace[k];
    t[k] = f.t;
    p_es[k] = f.p_es_bus;
    e_es[k] = f.e_es;
    soc[k] = f.soc_pct;
    p_pr[k] = f.p_pr;
    p_ppl[k] = f.p_ppl;
    i_es[k] = f.i_es;
    i_pr[k] = f.i_pr;
    i_ppl[k] = f.i_ppl;
    for (Eigen::Index i = 0; i < g; ++i) {
      p_gen(k, i) = f.p_gen[i];
      i_gen(k, i) = f.i_gen[i];
    }
    mode.emplace_back(to_string(f.mode));
    flags.push_back(f.flags.tokens());
  }
  py::dict d;
  d["t"] = t;
  d["p_gen"] = p_gen;
  d["p_es_bus"] = p_es;
  d["e_es"] = e_es;
  d["soc_pct"] = soc;
  d["p_pr"] = p_pr;
  d["p_ppl"] = p_ppl;
  d["i_gen"] = i_gen;
  d["i_es"] = i_es;
  d["i_pr"] = i_pr;
  d["i_ppl"] = i_ppl;
  d["mode"] = mode;
  d["flags"] = flags;
  return d;
}

Scenario scenario_arg(const std::optional<std::string>& text) {
  return text ? parse_scenario(*text) : default_scenario();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hybrid generator/storage energy management: QP solver, MPC and mission simulator";

  static py::exception<Error> error(m, "ShipemsError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      // args = (kind, message)
      const auto args = py::make_tuple(std::string(to_string(e.kind())), std::string(e.what()));
      PyErr_SetObject(error.ptr(), args.ptr());
    }
  });

  // -- QP ------------------------------------------------------------------
  py::class_<qp::QpSolution>(m, "QpSolution")
      .def_readonly("delta_p", &qp::QpSolution::delta_p)
      .def_readonly("lam", &qp::QpSolution::lambda)
      .def_readonly("iterations", &qp::QpSolution::iterations)
      .def_readonly("converged", &qp::QpSolution::converged)
      .def_readonly("used_fast_path", &qp::QpSolution::used_fast_path)
      .def_readonly("active_set", &qp::QpSolution::active_set);

  m.def(
      "qp_solve",
      [](qp::Matrix M, qp::Vector F, qp::Matrix A, qp::Vector b, double tol, int max_iter,
         bool allow_fast_path) {
        qp::SolveOptions o;
        o.tol = tol;
        o.max_iter = max_iter;
        o.allow_fast_path = allow_fast_path;
        return qp::qp_solve({std::move(M), std::move(F), std::move(A), std::move(b)}, o);
      },
      py::arg("M"), py::arg("F"), py::arg("A"), py::arg("b"), py::arg("tol") = 1e-9,
      py::arg("max_iter") = 0, py::arg("allow_fast_path") = true,
      "min 1/2 x'Mx + F'x subject to Ax <= b.");

  m.def(
      "hildreth_iterate",
      [](const qp::Matrix& H, const qp::Vector& K, double tol, int max_iter) {
        const auto r = qp::hildreth_iterate(H, K, tol, max_iter);
        return py::make_tuple(r.lambda, r.converged, r.iterations);
      },
      py::arg("H"), py::arg("K"), py::arg("tol") = 1e-9, py::arg("max_iter") = 1000,
      "Returns (lambda, converged, iterations).");

  m.def("solve_unconstrained", &qp::solve_unconstrained, py::arg("M"), py::arg("F"));

  // -- MPC -----------------------------------------------------------------
  m.def(
      "build_augmented_model",
      [](double T) {
        const auto a = mpc::build_augmented_model(T);
        return py::make_tuple(qp::Matrix(a.A), qp::Vector(a.B), qp::Matrix(a.C));
      },
      py::arg("T"), "Returns (A, B, C).");

  m.def(
      "build_prediction_matrices",
      [](double T, int Np, int Nc) {
        const auto pm = mpc::make_prediction_model(T, Np, Nc);
        return py::make_tuple(pm.G, pm.Phi);
      },
      py::arg("T"), py::arg("Np"), py::arg("Nc"), "Returns (G, Phi).");

  py::class_<mpc::StorageEnvelope>(m, "StorageEnvelope")
      .def(py::init([](double p_min, double p_max, double r_min, double r_max, double e_min,
                       double e_max, double e_ref, double p_now) {
             return mpc::StorageEnvelope{p_min, p_max, r_min, r_max, e_min, e_max, e_ref, p_now};
           }),
           py::arg("p_chg_min"), py::arg("p_chg_max"), py::arg("r_chg_min"),
           py::arg("r_chg_max"), py::arg("e_min"), py::arg("e_max"), py::arg("e_ref"),
           py::arg("p_chg_now") = 0.0)
      .def_readwrite("p_chg_min", &mpc::StorageEnvelope::p_chg_min)
      .def_readwrite("p_chg_max", &mpc::StorageEnvelope::p_chg_max)
      .def_readwrite("r_chg_min", &mpc::StorageEnvelope::r_chg_min)
      .def_readwrite("r_chg_max", &mpc::StorageEnvelope::r_chg_max)
      .def_readwrite("e_min", &mpc::StorageEnvelope::e_min)
      .def_readwrite("e_max", &mpc::StorageEnvelope::e_max)
      .def_readwrite("e_ref", &mpc::StorageEnvelope::e_ref)
      .def_readwrite("p_chg_now", &mpc::StorageEnvelope::p_chg_now);

  m.def(
      "mpc_step",
      [](double delta_e, double e, const mpc::StorageEnvelope& env, double T, int Np, int Nc) {
        const auto pm = mpc::make_prediction_model(T, Np, Nc);
        return mpc::mpc_step(pm, {delta_e, e}, env).r_chg;
      },
      py::arg("delta_e"), py::arg("e"), py::arg("env"), py::arg("T") = 0.01, py::arg("Np") = 500,
      py::arg("Nc") = 1, "Charge-positive storage ramp command in kW/s.");

  // -- Dispatch ------------------------------------------------------------
  py::class_<GeneratorRating>(m, "GeneratorRating")
      .def(py::init([](std::string id, double p_min, double p_max, double r_min, double r_max) {
             return GeneratorRating{std::move(id), p_min, p_max, r_min, r_max};
           }),
           py::arg("id"), py::arg("p_min"), py::arg("p_max"), py::arg("r_min"), py::arg("r_max"))
      .def_readonly("id", &GeneratorRating::id)
      .def_readonly("p_min", &GeneratorRating::p_min)
      .def_readonly("p_max", &GeneratorRating::p_max)
      .def_readonly("r_min", &GeneratorRating::r_min)
      .def_readonly("r_max", &GeneratorRating::r_max);

  m.def(
      "classify_mode",
      [](double r_load, const std::vector<GeneratorRating>& gens) {
        return std::string(to_string(classify_mode(r_load, gens)));
      },
      py::arg("r_load"), py::arg("generators"));

  m.def(
      "generator_weights",
      [](const std::vector<GeneratorRating>& gens, const std::string& direction) {
        if (direction != "up" && direction != "down") {
          throw Error(ErrorKind::ValidationError, "direction must be 'up' or 'down'");
        }
        return generator_weights(gens, direction == "up" ? RampDirection::Up : RampDirection::Down);
      },
      py::arg("generators"), py::arg("direction") = "up");

  // -- Missions ------------------------------------------------------------
  m.def("default_scenario_json", &default_scenario_json);

  m.def(
      "validate_scenario",
      [](const std::string& text) { return to_json(parse_scenario(text)); },
      py::arg("text"), "Parses and validates a scenario; returns it in normalised form.");

  m.def(
      "run_mission",
      [](const std::optional<std::string>& scenario, const std::optional<std::string>& trace_path) {
        const Scenario s = scenario_arg(scenario);
        MissionResult r;
        {
          py::gil_scoped_release release;
          r = run_mission(s);
          if (trace_path) write_trace(r.trace, std::filesystem::path(*trace_path), s.generators.size());
        }
        py::dict out;
        out["metrics"] = metrics_dict(r.metrics);
        out["trace"] = trace_dict(r.trace);
        return out;
      },
      py::arg("scenario") = py::none(), py::arg("trace_path") = py::none(),
      "Runs a scenario (JSON text, default mission if None). Returns {'metrics', 'trace'}.");

  m.def(
      "acceptance",
      [] {
        py::list out;
        for (const auto& r : selftest::run_acceptance()) {
          out.append(py::make_tuple(r.id, r.name, r.passed, r.detail));
        }
        return out;
      },
      "Runs the mission acceptance checks; list of (id, name, passed, detail).");
}
