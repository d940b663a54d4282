"""Heisenberg-limited parameter estimation under Markovian noise.

Decide whether a probe model admits quadratic Fisher-information growth,
build and optimise the error-correcting code that achieves it, and check
the claim by simulation.
"""
from .codes import (
    CodePair,
    QecReport,
    RecoveryChannel,
    build_recovery,
    canonical_code,
    check_conditions,
    compress_ancilla,
    effective_generator,
)
from .dynamics import SimulationConfig, Trajectory, qec_evolve, robustness_experiment, sql_bound
from .model import LindbladModel
from .optimize import SolverOptions, dual_minimize, optimize_model, primal_recover
from .presets import kerr_model, qubit_model
from .span import hnls_check, lindblad_span

__version__ = "0.1.0"

__all__ = [
    "CodePair",
    "LindbladModel",
    "QecReport",
    "RecoveryChannel",
    "SimulationConfig",
    "SolverOptions",
    "Trajectory",
    "build_recovery",
    "canonical_code",
    "check_conditions",
    "compress_ancilla",
    "dual_minimize",
    "effective_generator",
    "hnls_check",
    "kerr_model",
    "lindblad_span",
    "optimize_model",
    "primal_recover",
    "qec_evolve",
    "qubit_model",
    "robustness_experiment",
    "sql_bound",
]
