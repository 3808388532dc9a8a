"""Python bindings for the shipems energy-management core."""

from ._core import (
    GeneratorRating,
    QpSolution,
    ShipemsError,
    StorageEnvelope,
    acceptance,
    build_augmented_model,
    build_prediction_matrices,
    classify_mode,
    default_scenario_json,
    generator_weights,
    hildreth_iterate,
    mpc_step,
    qp_solve,
    run_mission,
    solve_unconstrained,
    validate_scenario,
)

__all__ = [
    "GeneratorRating",
    "QpSolution",
    "ShipemsError",
    "StorageEnvelope",
    "acceptance",
    "build_augmented_model",
    "build_prediction_matrices",
    "classify_mode",
    "default_scenario_json",
    "generator_weights",
    "hildreth_iterate",
    "mpc_step",
    "qp_solve",
    "run_mission",
    "solve_unconstrained",
    "validate_scenario",
]
