"""The two-photon hyper-CPF network, its checkpoints, and gate efficiency."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from hypercpf.hyperstate import (
    DEFAULT_MODES,
    PLUS,
    MINUS,
    POL_C_SHIFT,
    POL_T_SHIFT,
    SPAT_C_SHIFT,
    SPAT_MASK,
    SPAT_T_SHIFT,
    HyperBasisLabel,
    ModeSet,
    Polarization,
    Slot,
    Spin,
    SparseState,
    fidelity,
)
from hypercpf.optics import (
    OUTCOMES,
    ElementKind,
    ElementStep,
    Outcome,
    apply_feed_forward,
    apply_step,
    measure_spins,
    parse_outcome,
    project_spins,
)
from hypercpf.qdcavity import CavityParams, EmitterCoeffs, emitter_coefficients

INOPERATIVE_THRESHOLD = 1e-6

STAGES = (
    "control_stage1",
    "control_stage2",
    "control_herald",
    "spin_hadamard",
    "target_stage1",
    "target_stage2",
    "target_herald",
)
CHECKPOINTS = {
    "after_stage1": "control_stage1",
    "after_stage2": "control_stage2",
    "after_target": "target_herald",
}


class GateInoperativeError(RuntimeError):
    """The success amplitude ``c`` vanishes, so nothing is ever heralded."""


@dataclass(frozen=True)
class ModeGraph:
    """Ordered element placements per stage over a declared mode set."""

    modes: ModeSet
    stages: Mapping[str, tuple[ElementStep, ...]]
    coeffs: EmitterCoeffs | None = None

    def steps(self, upto: str | None = None):
        for name in STAGES:
            yield from ((name, s) for s in self.stages.get(name, ()))
            if name == upto:
                return

    @property
    def detectors(self) -> tuple[str, ...]:
        return tuple(s.mode for _, s in self.steps() if s.kind == ElementKind.DETECTOR)

    def validate(self) -> None:
        """Raise ``ValueError`` if a port is undeclared, a detector feeds an
        element, or a non-detector mode is unreachable from the inputs."""
        edges: dict[str, set[str]] = {}
        for _, step in self.steps():
            if step.kind == ElementKind.SPIN_HADAMARD:
                continue
            declared = self.modes.modes(step.slot)
            ports = [m for m in step.in_modes + step.out_modes if m is not None]
            for m in ports:
                if m not in declared:
                    raise ValueError(f"step {step.name or step.kind.value} uses undeclared mode {m!r}")
            ins = [m for m in step.in_modes if m is not None]
            outs = list(step.out_modes) or ins
            if step.kind == ElementKind.DETECTOR:
                continue
            for m in ins:
                edges.setdefault(m, set()).update(outs)
        detectors = set(self.detectors)
        for d in detectors:
            if edges.get(d):
                raise ValueError(f"detector mode {d!r} has outgoing steps")
        for slot in Slot:
            names = self.modes.modes(slot)
            seen = set(names[:2])
            frontier = list(names[:2])
            while frontier:
                m = frontier.pop()
                for n in edges.get(m, ()):
                    if n not in seen:
                        seen.add(n)
                        frontier.append(n)
            missing = [m for m in names if m not in seen]
            if missing:
                raise ValueError(f"modes unreachable from the inputs: {missing}")


def _photon_pass(slot: Slot, names: Sequence[str]) -> tuple[tuple[ElementStep, ...], ...]:
    """Element sequence for one photon through the network (stage 1, stage 2, detectors)."""
    x1, x2, x11, x12, x21, x22, d1, d2, d3 = names
    s = slot
    E = ElementStep
    stage1 = (
        E(ElementKind.PBS, (x1, None), (x11, x12), s, name="PBS1"),
        E(ElementKind.PBS, (x2, None), (x22, x21), s, name="PBS3"),
        E(ElementKind.CIRCULATOR, (x12,), (), s, name="C1"),
        E(ElementKind.QD_SCATTER, (x12,), (), s, spin=1, name="QD1"),
        E(ElementKind.HWP, (x12,), (), s, name="HWP1"),
        E(ElementKind.WFC, (x11,), (), s, name="WFC1"),
        E(ElementKind.CIRCULATOR, (x21,), (), s, name="C2"),
        E(ElementKind.QD_SCATTER, (x21,), (), s, spin=1, name="QD1"),
        E(ElementKind.WFC, (x22,), (), s, name="WFC2"),
    )
    stage2 = (
        E(ElementKind.PBS, (x11, x12), (x1, d1), s, name="PBS2"),
        E(ElementKind.WFC, (x1,), (), s, name="WFC3"),
        E(ElementKind.PBS, (x21, None), (x21, d2), s, name="PBS4"),
        E(ElementKind.CIRCULATOR, (x21,), (), s, name="C3"),
        E(ElementKind.QD_SCATTER, (x21,), (), s, spin=2, name="QD2"),
        E(ElementKind.CIRCULATOR, (x22,), (), s, name="C4"),
        E(ElementKind.QD_SCATTER, (x22,), (), s, spin=2, name="QD2"),
        E(ElementKind.HWP, (x22,), (), s, name="HWP2"),
        E(ElementKind.PBS, (x22, x21), (x2, d3), s, name="PBS5"),
    )
    herald = tuple(
        E(ElementKind.DETECTOR, (d,), (), s, name=f"D{i}") for i, d in enumerate((d1, d2, d3), 1)
    )
    return stage1, stage2, herald


def build_circuit(params: CavityParams | None = None, modes: ModeSet = DEFAULT_MODES) -> ModeGraph:
    """Assemble the network; ``params`` binds the emitter coefficients.

    Both photons traverse identical copies of the network, the target photon
    after both spins received a Hadamard.
    """
    if len(modes.control) != 9 or len(modes.target) != 9:
        raise ValueError("the network needs nine spatial modes per photon")
    c1, c2, ch = _photon_pass(Slot.CONTROL, modes.control)
    t1, t2, th = _photon_pass(Slot.TARGET, modes.target)
    hadamards = (
        ElementStep(ElementKind.SPIN_HADAMARD, spin=1, name="He1"),
        ElementStep(ElementKind.SPIN_HADAMARD, spin=2, name="He2"),
    )
    stages = dict(zip(STAGES, (c1, c2, ch, hadamards, t1, t2, th)))
    coeffs = None if params is None else emitter_coefficients(params)
    graph = ModeGraph(modes, stages, coeffs)
    graph.validate()
    return graph


def run_stages(state: SparseState, graph: ModeGraph, upto: str | None = None) -> dict[str, SparseState]:
    """Evolve ``state`` stage by stage; returns the state after each stage."""
    if graph.coeffs is None:
        raise ValueError("graph was built without cavity parameters")
    out = {}
    for name in STAGES:
        for step in graph.stages[name]:
            state = apply_step(state, step, graph.coeffs)
        out[name] = state
        if name == upto:
            break
    return out


def checkpoint_state(stage: str, input: SparseState, params: CavityParams) -> SparseState:
    """State at ``after_stage1``, ``after_stage2`` or ``after_target`` (post-selected)."""
    if stage not in CHECKPOINTS:
        raise ValueError(f"unknown checkpoint {stage!r}; expected one of {sorted(CHECKPOINTS)}")
    graph = build_circuit(params, input.modes)
    return run_stages(input, graph, CHECKPOINTS[stage])[CHECKPOINTS[stage]]


# ---------------------------------------------------------------------------
# closed-form term lists of the intermediate states
# ---------------------------------------------------------------------------


def _expand(terms, modes: ModeSet) -> SparseState:
    """Build a state from terms whose spins are given as 2-vectors over up/down."""
    items = []
    for amp, pc, mc, pt, mt, spin1, spin2 in terms:
        for s1 in Spin:
            for s2 in Spin:
                a = amp * spin1[s1] * spin2[s2]
                if a != 0:
                    items.append((HyperBasisLabel(pc, mc, pt, mt, s1, s2), a))
    return SparseState.from_amplitudes(items, modes)


def reference_checkpoint(
    stage: str,
    alpha: Sequence[complex],
    beta: Sequence[complex],
    lam: Sequence[complex],
    varpi: Sequence[complex],
    coeffs: EmitterCoeffs,
    modes: ModeSet = DEFAULT_MODES,
) -> SparseState:
    """Intermediate states written out term by term, independent of the simulator."""
    F, S = Polarization.F, Polarization.S
    a1, a2, a11, a12, a21, a22, ad1, ad2, ad3 = modes.control
    b1, b2 = modes.target[:2]
    c, f = coeffs.c, coeffs.f
    al1, al2 = alpha
    be1, be2 = beta
    up = np.array([1.0, 0.0])
    down = np.array([0.0, 1.0])

    def with_target(control_terms):
        # control part x (lambda_1 F + lambda_2 S)(varpi_1 b1 + varpi_2 b2)
        out = []
        for amp, pc, mc, sp1, sp2 in control_terms:
            for pt, l in zip((F, S), lam):
                for mt, w in zip((b1, b2), varpi):
                    out.append((amp * l * w, pc, mc, pt, mt, sp1, sp2))
        return out

    if stage == "after_stage1":
        terms = [
            (c * al1 * be1, F, a11, PLUS, PLUS),
            (c * al1 * be2, F, a22, PLUS, PLUS),
            (c * al2 * be1, S, a12, MINUS, PLUS),
            (f * al2 * be1, F, a12, PLUS, PLUS),
            (c * al2 * be2, F, a21, MINUS, PLUS),
            (f * al2 * be2, S, a21, PLUS, PLUS),
        ]
        return _expand(with_target(terms), modes)
    if stage == "after_stage2":
        terms = [
            (c * c * al1 * be1, F, a1, PLUS, PLUS),
            (c * c * al1 * be2, F, a2, PLUS, MINUS),
            (c * f * al1 * be2, S, ad3, PLUS, PLUS),
            (c * c * al2 * be1, S, a1, MINUS, PLUS),
            (f * al2 * be1, F, ad1, PLUS, PLUS),
            (c * c * al2 * be2, S, a2, MINUS, MINUS),
            (c * f * al2 * be2, F, ad3, MINUS, PLUS),
            (f * al2 * be2, S, ad2, PLUS, PLUS),
        ]
        return _expand(with_target(terms), modes)
    if stage == "after_target":
        c4 = c**4
        terms = []
        for amp, pc, mc, spin1, spin2 in (
            (al1 * be1, F, a1, up, up),
            (al1 * be2, F, a2, up, down),
            (al2 * be1, S, a1, down, up),
            (al2 * be2, S, a2, down, down),
        ):
            lsign = -1 if spin1 is down else 1
            wsign = -1 if spin2 is down else 1
            for pt, l in ((F, lam[0]), (S, lsign * lam[1])):
                for mt, w in ((b1, varpi[0]), (b2, wsign * varpi[1])):
                    terms.append((c4 * amp * l * w, pc, mc, pt, mt, spin1, spin2))
        return _expand(terms, modes)
    raise ValueError(f"unknown checkpoint {stage!r}")


# ---------------------------------------------------------------------------
# ideal gate and end-to-end run
# ---------------------------------------------------------------------------


def ideal_hyper_cpf(input: SparseState) -> SparseState:
    """CPF on polarization (flip on S,S) and on the spatial DOF (flip on a2,b2).

    Spins, if present, are spectators.
    """
    codes = input.codes
    pol_ss = (((codes >> POL_C_SHIFT) & 1) == 1) & (((codes >> POL_T_SHIFT) & 1) == 1)
    spat_22 = (((codes >> SPAT_C_SHIFT) & SPAT_MASK) == 1) & (((codes >> SPAT_T_SHIFT) & SPAT_MASK) == 1)
    sign = np.where(pol_ss, -1.0, 1.0) * np.where(spat_22, -1.0, 1.0)
    return input.evolve(codes, input.amps * sign)


def photon_part(input: SparseState) -> SparseState:
    """Photonic factor of an input whose spins are both prepared in ``|+>``."""
    return project_spins(input, ("+", "+"))


@dataclass(frozen=True)
class BranchResult:
    outcome: Outcome
    probability: float
    state: SparseState
    fidelity: float


@dataclass(frozen=True)
class GateResult:
    """Outcome of one gate invocation.

    ``success_probability`` is the squared norm surviving post-selection;
    together with the per-detector ``heralded_failure`` and ``unheralded_loss``
    it sums to the input norm.  ``output_state`` is the corrected photon state
    of the selected branch (``("+", "+")`` when all branches are reported),
    carrying the herald amplitude as its norm.
    """

    output_state: SparseState
    success_probability: float
    heralded_failure: dict[str, float]
    unheralded_loss: float
    fidelity_vs_ideal: float
    spin_branches: tuple[BranchResult, ...]
    coeffs: EmitterCoeffs
    ideal_state: SparseState = field(repr=False)

    @property
    def total_probability(self) -> float:
        return self.success_probability + sum(self.heralded_failure.values()) + self.unheralded_loss


def run_hyper_cpf(
    input: SparseState,
    params: CavityParams,
    outcome_policy: str | Outcome = "all",
) -> GateResult:
    """Run the heralded hyper-CPF gate on a product input.

    ``outcome_policy`` is ``"all"`` (report every spin branch) or a fixed
    outcome such as ``("+", "-")``.  Raises ``GateInoperativeError`` when
    ``|c| <= 1e-6``.
    """
    fixed = None if outcome_policy == "all" else parse_outcome(outcome_policy)
    graph = build_circuit(params, input.modes)
    coeffs = graph.coeffs
    if abs(coeffs.c) <= INOPERATIVE_THRESHOLD:
        raise GateInoperativeError(
            f"success amplitude |c| = {abs(coeffs.c):.3e} is below {INOPERATIVE_THRESHOLD:g}"
        )
    final = run_stages(input, graph)["target_herald"]
    success = final.norm_sq()
    if success == 0:
        raise GateInoperativeError("no amplitude survives post-selection")
    ideal = ideal_hyper_cpf(photon_part(input))
    branches = []
    for branch in measure_spins(final):
        corrected = apply_feed_forward(branch.state, branch.outcome)
        fid = fidelity(corrected, ideal) if branch.probability > 0 else float("nan")
        branches.append(BranchResult(branch.outcome, branch.probability, corrected, fid))
    if fixed is None:
        chosen = branches[OUTCOMES.index(("+", "+"))]
        fid = min(b.fidelity for b in branches if b.probability > 0)
    else:
        chosen = branches[OUTCOMES.index(fixed)]
        fid = chosen.fidelity
    return GateResult(
        output_state=chosen.state,
        success_probability=success,
        heralded_failure=dict(final.heralded),
        unheralded_loss=final.unheralded,
        fidelity_vs_ideal=fid,
        spin_branches=tuple(branches),
        coeffs=coeffs,
        ideal_state=ideal,
    )


# ---------------------------------------------------------------------------
# efficiency
# ---------------------------------------------------------------------------


def efficiency_from_coeffs(coeffs: EmitterCoeffs) -> float:
    return abs(coeffs.c) ** 8


def efficiency_pipeline(params: CavityParams) -> float:
    """``|c|^8`` from the reflection coefficients of ``params``."""
    return efficiency_from_coeffs(emitter_coefficients(params))


def efficiency_closed_form(g_over_kappa, kappa_s_over_kappa, p):
    """Efficiency on resonance with ``gamma = 0.1 kappa``, in units ``kappa = 1``.

    Accepts scalars or broadcastable arrays.
    """
    g = np.asarray(g_over_kappa, dtype=float)
    ks = np.asarray(kappa_s_over_kappa, dtype=float)
    p = np.asarray(p, dtype=float)
    num = 65536 * g**16 * p**8
    den = (ks + 1) ** 8 * (4 * g**2 + (ks + 1) / 10) ** 8
    out = num / den
    return float(out) if out.ndim == 0 else out


def closed_form_applies(params: CavityParams, tol: float = 1e-12) -> bool:
    """Whether the resonant ``gamma = 0.1 kappa`` closed form describes ``params``."""
    return params.on_resonance and math.isclose(params.gamma / params.kappa, 0.1, rel_tol=tol, abs_tol=0)
