"""Seeded randomized invariant suite shared by the CLI and the test-suite."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hypercpf.gatecircuit import (
    CHECKPOINTS,
    build_circuit,
    efficiency_from_coeffs,
    reference_checkpoint,
    run_hyper_cpf,
    run_stages,
)
from hypercpf.hyperstate import SparseState, make_input_state, max_abs_difference
from hypercpf.oracle import DenseState, compare_states, run_dense
from hypercpf.qdcavity import CavityParams

CHECKS = (
    "checkpoint_equality",
    "oracle_equivalence",
    "fidelity_one",
    "equiprobable_heralds",
    "probability_conservation",
)
TOLERANCES = {
    "checkpoint_equality": 1e-12,
    "oracle_equivalence": 1e-12,
    "fidelity_one": 1e-10,
    "equiprobable_heralds": 1e-12,
    "probability_conservation": 1e-12,
}


def random_pair(rng: np.random.Generator) -> tuple[complex, complex]:
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    v /= np.linalg.norm(v)
    return complex(v[0]), complex(v[1])


def random_amplitudes(rng: np.random.Generator) -> dict[str, tuple[complex, complex]]:
    return {name: random_pair(rng) for name in ("alpha", "beta", "lambda", "varpi")}


def random_params(rng: np.random.Generator) -> CavityParams:
    """Draw from g/k in [0.2, 5], ks/k in [0, 2], gamma/k in [0.05, 0.5], p in [0.3, 1],
    cavity and trion detunings in [-k, k]."""
    return CavityParams(
        g=rng.uniform(0.2, 5.0),
        kappa_s=rng.uniform(0.0, 2.0),
        gamma=rng.uniform(0.05, 0.5),
        p=rng.uniform(0.3, 1.0),
        omega_cavity=rng.uniform(-1.0, 1.0),
        omega_exciton=rng.uniform(-1.0, 1.0),
    )


def input_from(amps: dict[str, tuple[complex, complex]]) -> SparseState:
    return make_input_state(amps["alpha"], amps["beta"], amps["lambda"], amps["varpi"])


def check_draw(params: CavityParams, amps: dict, *, with_oracle: bool = True) -> dict[str, float]:
    """Worst deviation of every invariant for one (params, input) draw."""
    state = input_from(amps)
    graph = build_circuit(params)
    stages = run_stages(state, graph)
    dev = {}

    worst = 0.0
    for checkpoint, stage in CHECKPOINTS.items():
        expected = reference_checkpoint(
            checkpoint, amps["alpha"], amps["beta"], amps["lambda"], amps["varpi"], graph.coeffs
        )
        worst = max(worst, max_abs_difference(stages[stage], expected)[0])
    dev["checkpoint_equality"] = worst

    if with_oracle:
        dense = run_dense(DenseState.from_sparse(state), graph)
        dev["oracle_equivalence"] = max(
            compare_states(stages[name], dense[name]).max_discrepancy for name in stages
        )

    result = run_hyper_cpf(state, params)
    dev["fidelity_one"] = max(1.0 - b.fidelity for b in result.spin_branches)
    dev["equiprobable_heralds"] = max(abs(b.probability - 0.25) for b in result.spin_branches)
    dev["probability_conservation"] = max(
        abs(result.total_probability - 1.0),
        abs(result.success_probability - efficiency_from_coeffs(result.coeffs)),
    )
    return dev


@dataclass
class VerificationReport:
    seed: int
    draws: int
    worst: dict[str, float] = field(default_factory=lambda: {k: 0.0 for k in CHECKS})
    failures: list[tuple[int, str, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def render(self) -> str:
        lines = [f"hyper-CPF verification seed={self.seed} draws={self.draws}"]
        failed = {name for _, name, _ in self.failures}
        for name in CHECKS:
            status = "FAIL" if name in failed else "PASS"
            lines.append(
                f"{name:<26}{status}  max_dev={self.worst[name]:.3e}  tol={TOLERANCES[name]:.0e}"
            )
        for draw, name, value in self.failures[:10]:
            lines.append(f"  failing draw: seed={self.seed} draw={draw} check={name} dev={value:.3e}")
        lines.append("RESULT " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def run_verification(seed: int, draws: int) -> VerificationReport:
    """Run every invariant on ``draws`` draws; draw ``i`` uses ``default_rng([seed, i])``."""
    if draws < 1:
        raise ValueError("draws must be at least 1")
    report = VerificationReport(seed, draws)
    for i in range(draws):
        rng = np.random.default_rng([seed, i])
        params = random_params(rng)
        amps = random_amplitudes(rng)
        for name, value in check_draw(params, amps).items():
            report.worst[name] = max(report.worst[name], value)
            if not value < TOLERANCES[name]:
                report.failures.append((i, name, value))
    return report
