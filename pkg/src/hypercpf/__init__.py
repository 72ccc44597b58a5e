"""Simulator for the heralded hyperparallel controlled-phase-flip gate.

Two photons, each carrying a polarization and a spatial qubit, interact
through two quantum-dot--cavity emitters; detector silence heralds success.
"""

from hypercpf.gatecircuit import (
    GateInoperativeError,
    GateResult,
    build_circuit,
    checkpoint_state,
    efficiency_closed_form,
    efficiency_pipeline,
    ideal_hyper_cpf,
    run_hyper_cpf,
)
from hypercpf.hyperstate import (
    HyperBasisLabel,
    Polarization,
    Slot,
    SparseState,
    Spin,
    fidelity,
    inner_product,
    make_input_state,
)
from hypercpf.qdcavity import CavityParams, EmitterCoeffs, emitter_coefficients, reflection_coefficient

__all__ = [
    "CavityParams",
    "EmitterCoeffs",
    "GateInoperativeError",
    "GateResult",
    "HyperBasisLabel",
    "Polarization",
    "Slot",
    "SparseState",
    "Spin",
    "build_circuit",
    "checkpoint_state",
    "efficiency_closed_form",
    "efficiency_pipeline",
    "emitter_coefficients",
    "fidelity",
    "ideal_hyper_cpf",
    "inner_product",
    "make_input_state",
    "reflection_coefficient",
    "run_hyper_cpf",
]
