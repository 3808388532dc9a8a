import json

import numpy as np
import pytest

import shipems


def table_gens():
    return [
        shipems.GeneratorRating("GEN1", 0.0, 4.0, -0.2, 0.2),
        shipems.GeneratorRating("GEN2", 0.0, 2.0, -0.1, 0.1),
    ]


def test_qp_clipped_at_bound():
    sol = shipems.qp_solve([[2.0]], [-4.0], [[1.0]], [1.0])
    assert sol.delta_p[0] == pytest.approx(1.0)
    assert sol.lam[0] == pytest.approx(2.0)


def test_hildreth_decoupled():
    lam, converged, _ = shipems.hildreth_iterate(np.diag([2.0, 2.0]), [-2.0, -4.0])
    assert converged
    np.testing.assert_allclose(lam, [1.0, 2.0])


def test_singular_matrix_raises():
    with pytest.raises(shipems.ShipemsError) as err:
        shipems.solve_unconstrained([[1.0, 0.0], [0.0, -1.0]], [0.0, 0.0])
    assert err.value.args[0] == "SingularMatrix"


def test_model_and_prediction():
    A, B, C = shipems.build_augmented_model(0.01)
    np.testing.assert_allclose(A, [[1, 0], [1, 1]])
    np.testing.assert_allclose(B.ravel(), [0.01, 0.01])
    G, Phi = shipems.build_prediction_matrices(0.01, 2, 2)
    np.testing.assert_allclose(G, [[1, 1], [2, 1]])
    np.testing.assert_allclose(Phi, [[0.01, 0.0], [0.02, 0.01]])


def test_mpc_ramp_bound_binds():
    env = shipems.StorageEnvelope(-100, 100, -0.3, 0.3, 0, 10, 8)
    assert shipems.mpc_step(0.0, 3.0, env) == pytest.approx(0.3)
    assert shipems.mpc_step(0.0, 8.6, env) < 0.0


def test_dispatch_helpers():
    gens = table_gens()
    assert shipems.classify_mode(0.375, gens) == "SaturatedUp"
    assert shipems.classify_mode(-0.5, gens) == "SaturatedDown"
    assert shipems.classify_mode(0.0, gens) == "Tracking"
    assert shipems.generator_weights(gens, "up") == pytest.approx([2 / 3, 1 / 3])


def test_scenario_validation():
    doc = json.loads(shipems.default_scenario_json())
    doc["storage"]["e_ref"] = 12.0
    with pytest.raises(shipems.ShipemsError) as err:
        shipems.validate_scenario(json.dumps(doc))
    assert err.value.args[0] == "ValidationError"


def test_short_mission(tmp_path):
    doc = json.loads(shipems.default_scenario_json())
    doc["t_end"] = 34.0
    out = shipems.run_mission(json.dumps(doc), str(tmp_path / "trace.csv"))
    trace, metrics = out["trace"], out["metrics"]
    assert trace["e_es"].shape == (3401,)
    assert trace["p_gen"].shape == (3401, 2)
    assert trace["e_es"][-1] == pytest.approx(8.0, abs=0.1)
    assert metrics["ramp_violations"] == 0
    assert metrics["balance_violations"] == 0
    balance = trace["p_gen"].sum(axis=1) + trace["p_es_bus"] - trace["p_pr"] - trace["p_ppl"]
    assert np.abs(balance).max() < 1e-9
    assert (tmp_path / "trace.csv").read_text().startswith("t,p_gen1,p_gen2,")
