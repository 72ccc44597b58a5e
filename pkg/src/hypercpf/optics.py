"""Optical elements of the hyper-CPF network as actions on ``SparseState``.

Every element is a pure state-in/state-out transformation.  Elements that
shrink the norm (wave-form correctors, imperfect scattering) book the
change in ``SparseState.unheralded``; detectors book the probability they
absorb under their own mode name in ``SparseState.heralded``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple

import numpy as np

from hypercpf import _kernels
from hypercpf.hyperstate import (
    INV_SQRT2,
    SPAT_C_SHIFT,
    SPAT_MASK,
    SPAT_T_SHIFT,
    SPIN_ABSENT,
    SPIN_MASK,
    ModeSet,
    Polarization,
    Slot,
    SparseState,
    ZeroNormError,
    slot_shift,
    spin_shift,
)
from hypercpf.qdcavity import EmitterCoeffs

N_LOCAL = 1 << _kernels.LOCAL_WIDTH

Outcome = tuple[str, str]
OUTCOMES: tuple[Outcome, ...] = (("+", "+"), ("+", "-"), ("-", "+"), ("-", "-"))


class ElementKind(str, Enum):
    PBS = "PBS"
    HWP = "HWP"
    WFC = "WFC"
    QD_SCATTER = "QDScatter"
    CIRCULATOR = "Circulator"
    DETECTOR = "Detector"
    SPIN_HADAMARD = "SpinHadamard"


@dataclass(frozen=True)
class ElementStep:
    """One element placement in the network.

    ``in_modes``/``out_modes`` name the spatial ports.  A PBS has two input
    ports, the second may be ``None`` for an unused (vacuum) port.
    ``slot`` picks the photon, ``spin`` the QD (1 or 2) where relevant.
    """

    kind: ElementKind
    in_modes: tuple[str | None, ...] = ()
    out_modes: tuple[str, ...] = ()
    slot: Slot | None = None
    spin: int | None = None
    name: str = ""

    def __post_init__(self) -> None:
        kind = ElementKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind == ElementKind.PBS:
            if len(self.in_modes) != 2 or len(self.out_modes) != 2:
                raise ValueError("a PBS has exactly two input and two output ports")
            if self.in_modes[0] is None or self.in_modes[0] == self.in_modes[1]:
                raise ValueError(f"PBS input ports collide: {self.in_modes}")
            if self.out_modes[0] == self.out_modes[1]:
                raise ValueError(f"PBS output ports collide: {self.out_modes}")
        elif kind == ElementKind.DETECTOR:
            if len(self.in_modes) != 1 or self.out_modes:
                raise ValueError("a detector has one input mode and no output")
        elif kind == ElementKind.SPIN_HADAMARD:
            if self.spin not in (1, 2):
                raise ValueError("spin Hadamard needs spin index 1 or 2")
        else:
            if len(self.in_modes) != 1 or tuple(self.out_modes) not in ((), tuple(self.in_modes)):
                raise ValueError(f"{kind.value} acts in place on exactly one mode")
            if kind == ElementKind.QD_SCATTER and self.spin not in (1, 2):
                raise ValueError("QD scattering references exactly one spin (1 or 2)")
        if kind != ElementKind.SPIN_HADAMARD and self.slot is None:
            raise ValueError(f"{kind.value} needs a photon slot")

    @property
    def mode(self) -> str:
        return self.in_modes[0]


class FeedForwardOp(str, Enum):
    NONE = "none"
    SPATIAL_SIGMA_Z = "spatial_sigma_z"
    POLARIZED_SIGMA_Z = "polarized_sigma_z"
    BOTH = "both"


# Spin outcome -> correction on the control photon; the target is never corrected.
FEED_FORWARD_TABLE: dict[Outcome, FeedForwardOp] = {
    ("+", "+"): FeedForwardOp.NONE,
    ("+", "-"): FeedForwardOp.SPATIAL_SIGMA_Z,
    ("-", "+"): FeedForwardOp.POLARIZED_SIGMA_Z,
    ("-", "-"): FeedForwardOp.BOTH,
}


class SpinBranch(NamedTuple):
    outcome: Outcome
    probability: float
    state: SparseState


def parse_outcome(value) -> Outcome:
    """Accept ``"+-"``, ``("+", "-")`` or ``(1, -1)``."""
    if isinstance(value, str):
        chars = tuple(value.replace(",", "").replace(" ", ""))
    else:
        chars = tuple(value)
    out = []
    for ch in chars:
        if ch in ("+", 1, "+1"):
            out.append("+")
        elif ch in ("-", -1, "-1"):
            out.append("-")
        else:
            raise ValueError(f"invalid spin outcome {value!r}")
    if len(out) != 2:
        raise ValueError(f"spin outcome needs two signs, got {value!r}")
    return out[0], out[1]


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _local(pol: int, mode_index: int) -> int:
    return pol | (mode_index << 1)


def _identity_tables():
    return np.arange(N_LOCAL, dtype=np.int64), np.ones(N_LOCAL, dtype=np.complex128)


def _monomial(state: SparseState, slot: Slot, new_local, factor, **ledger) -> SparseState:
    codes, amps = _kernels.monomial_map(state.codes, state.amps, slot_shift(slot), new_local, factor)
    return state.evolve(codes, amps, **ledger)


def _spat_shift(slot: Slot) -> int:
    return SPAT_C_SHIFT if slot == Slot.CONTROL else SPAT_T_SHIFT


def pbs_routing(in_modes, out_modes) -> dict[tuple[int, str], tuple[int, str]]:
    """Full port permutation of a PBS on (polarization, mode) pairs.

    F on ``in[0]`` goes to ``out[0]``, S on ``in[0]`` to ``out[1]``; F on
    ``in[1]`` to ``out[1]`` and S on ``in[1]`` to ``out[0]``.  Pairs on
    output-only modes (always empty in a physical run) are sent back to the
    vacated input pairs in sorted order, so the map is a bijection.
    """
    routing = {}
    i0, i1 = in_modes
    o0, o1 = out_modes
    routing[(0, i0)] = (0, o0)
    routing[(1, i0)] = (1, o1)
    if i1 is not None:
        routing[(0, i1)] = (0, o1)
        routing[(1, i1)] = (1, o0)
    ports = [m for m in (i0, i1, o0, o1) if m is not None]
    universe = sorted({(pol, m) for m in ports for pol in (0, 1)})
    images = set(routing.values())
    spare_sources = [x for x in universe if x not in routing]
    spare_targets = [x for x in universe if x not in images]
    routing.update(zip(spare_sources, spare_targets))
    return routing


def _check_mode(modes: ModeSet, slot: Slot, mode: str) -> int:
    return modes.index(slot, mode)


# ---------------------------------------------------------------------------
# elements
# ---------------------------------------------------------------------------


def apply_pbs(state: SparseState, in_modes, out_modes, photon: Slot) -> SparseState:
    """Polarizing beam splitter in the {F, S} basis: F transmits, S reflects."""
    in_modes = tuple(in_modes)
    out_modes = tuple(out_modes)
    if in_modes[0] is None or in_modes[0] == in_modes[1]:
        raise ValueError(f"PBS input ports collide: {in_modes}")
    if out_modes[0] == out_modes[1]:
        raise ValueError(f"PBS output ports collide: {out_modes}")
    new_local, factor = _identity_tables()
    for (pol, src), (new_pol, dst) in pbs_routing(in_modes, out_modes).items():
        i = _check_mode(state.modes, photon, src)
        j = _check_mode(state.modes, photon, dst)
        new_local[_local(pol, i)] = _local(new_pol, j)
    return _monomial(state, photon, new_local, factor)


def apply_hwp(state: SparseState, mode: str, photon: Slot) -> SparseState:
    """Half-wave plate at 0 degrees: swaps F and S on one mode."""
    m = _check_mode(state.modes, photon, mode)
    new_local, factor = _identity_tables()
    new_local[_local(0, m)] = _local(1, m)
    new_local[_local(1, m)] = _local(0, m)
    return _monomial(state, photon, new_local, factor)


def apply_wfc(state: SparseState, mode: str, photon: Slot, coeffs: EmitterCoeffs) -> SparseState:
    """Wave-form corrector: multiplies both polarizations on ``mode`` by ``c``."""
    m = _check_mode(state.modes, photon, mode)
    new_local, factor = _identity_tables()
    factor[_local(0, m)] = coeffs.c
    factor[_local(1, m)] = coeffs.c
    out = _monomial(state, photon, new_local, factor)
    loss = state.norm_sq() - out.norm_sq()
    return out.evolve(out.codes, out.amps, unheralded=state.unheralded + loss)


def _spin_hadamard_codes(codes, amps, spin_index: int, sel_mask: int = 0, sel_val: int = 0):
    shift = spin_shift(spin_index)
    keep = np.array([INV_SQRT2, -INV_SQRT2], dtype=np.complex128)
    flip = np.array([INV_SQRT2, INV_SQRT2], dtype=np.complex128)
    # spin present <=> high bit of the 2-bit spin field is clear
    mask = sel_mask | (2 << shift)
    return _kernels.two_term_map(codes, amps, mask, sel_val, shift, 1 << shift, keep, flip)


def apply_qd_scatter(
    state: SparseState,
    mode: str,
    photon: Slot,
    spin_index: int,
    coeffs: EmitterCoeffs,
) -> SparseState:
    """Photon--QD scattering on ``mode``, jointly on the photon polarization and one spin.

    In the {+, -} spin basis: ``F+ -> cS- + fF+``, ``F- -> cS+ + fF-``,
    ``S+ -> cF- + fS+``, ``S- -> cF+ + fS-``.
    """
    m = _check_mode(state.modes, photon, mode)
    shift = spin_shift(spin_index)
    sel_mask = SPAT_MASK << _spat_shift(photon)
    sel_val = m << _spat_shift(photon)
    # up/down -> +/- on the touched mode only
    codes, amps = _spin_hadamard_codes(state.codes, state.amps, spin_index, sel_mask, sel_val)
    codes, amps = _kernels.coalesce(codes, amps, 0.0)
    pol_bit = 1 << slot_shift(photon)
    keep = np.array([coeffs.f, coeffs.f], dtype=np.complex128)
    flip = np.array([coeffs.c, coeffs.c], dtype=np.complex128)
    mask = sel_mask | (2 << shift)
    codes, amps = _kernels.two_term_map(codes, amps, mask, sel_val, shift, pol_bit | (1 << shift), keep, flip)
    codes, amps = _kernels.coalesce(codes, amps, 0.0)
    codes, amps = _spin_hadamard_codes(codes, amps, spin_index, sel_mask, sel_val)
    out = state.evolve(codes, amps)
    loss = state.norm_sq() - out.norm_sq()
    return out.evolve(out.codes, out.amps, unheralded=state.unheralded + loss)


def apply_spin_hadamard(state: SparseState, spin_index: int) -> SparseState:
    """Electron-spin Hadamard: up -> (up + down)/sqrt2, down -> (up - down)/sqrt2."""
    codes, amps = _spin_hadamard_codes(state.codes, state.amps, spin_index)
    return state.evolve(codes, amps)


def detect_and_postselect(
    state: SparseState, detector_modes: Iterable[str]
) -> tuple[SparseState, dict[str, float]]:
    """Remove amplitude sitting on detector modes and book it as heralded failure."""
    keep = np.ones(state.codes.size, dtype=bool)
    masses = {}
    for mode in detector_modes:
        slot = state.modes.slot_of(mode)
        idx = state.modes.index(slot, mode)
        hit = ((state.codes >> _spat_shift(slot)) & SPAT_MASK) == idx
        a = state.amps[hit]
        masses[mode] = float(np.sum(a.real**2 + a.imag**2))
        keep &= ~hit
    heralded = dict(state.heralded)
    for mode, mass in masses.items():
        heralded[mode] = heralded.get(mode, 0.0) + mass
    out = state.evolve(state.codes[keep], state.amps[keep], heralded=heralded)
    return out, masses


def project_spins(state: SparseState, outcome) -> SparseState:
    """Unnormalized projection onto ``|s1>|s2>`` (s = +/-), spins factored out."""
    outcome = parse_outcome(outcome)
    codes, amps = _spin_hadamard_codes(state.codes, state.amps, 1)
    codes, amps = _kernels.coalesce(codes, amps, 0.0)
    codes, amps = _spin_hadamard_codes(codes, amps, 2)
    codes, amps = _kernels.coalesce(codes, amps, 0.0)
    # after the Hadamards, code 0 holds the |+> amplitude and code 1 the |->
    want1 = 0 if outcome[0] == "+" else 1
    want2 = 0 if outcome[1] == "+" else 1
    s1 = (codes >> spin_shift(1)) & SPIN_MASK
    s2 = (codes >> spin_shift(2)) & SPIN_MASK
    hit = (s1 == want1) & (s2 == want2)
    cleared = codes[hit] & ~np.int64((SPIN_MASK << spin_shift(1)) | (SPIN_MASK << spin_shift(2)))
    absent = (SPIN_ABSENT << spin_shift(1)) | (SPIN_ABSENT << spin_shift(2))
    return state.evolve(cleared | absent, amps[hit])


def measure_spins(state: SparseState) -> list[SpinBranch]:
    """Measure both spins in the {+, -} basis.

    Probabilities are relative to the current norm.  Each conditional state is
    rescaled to carry that same norm, so it reads as the post-measurement state
    of the surviving photons.
    """
    total = state.norm_sq()
    if total == 0:
        raise ZeroNormError("cannot measure spins of a zero-norm state")
    branches = []
    for outcome in OUTCOMES:
        projected = project_spins(state, outcome)
        prob = projected.norm_sq() / total
        if prob > 0:
            projected = projected.scaled(1 / math.sqrt(prob))
        branches.append(SpinBranch(outcome, prob, projected))
    return branches


def apply_sigma_z(state: SparseState, photon: Slot, op: FeedForwardOp) -> SparseState:
    op = FeedForwardOp(op)
    new_local, factor = _identity_tables()
    second = 1  # index of the second logical spatial mode (a2 / b2)
    for local in range(N_LOCAL):
        pol, mode = local & 1, local >> 1
        sign = 1.0
        if op in (FeedForwardOp.POLARIZED_SIGMA_Z, FeedForwardOp.BOTH) and pol == Polarization.S:
            sign = -sign
        if op in (FeedForwardOp.SPATIAL_SIGMA_Z, FeedForwardOp.BOTH) and mode == second:
            sign = -sign
        factor[local] = sign
    return _monomial(state, photon, new_local, factor)


def apply_feed_forward(state: SparseState, outcome) -> SparseState:
    """Outcome-conditioned sigma_z corrections on the control photon."""
    op = FEED_FORWARD_TABLE[parse_outcome(outcome)]
    if op == FeedForwardOp.NONE:
        return state
    return apply_sigma_z(state, Slot.CONTROL, op)


def apply_step(state: SparseState, step: ElementStep, coeffs: EmitterCoeffs | None = None) -> SparseState:
    kind = step.kind
    if kind == ElementKind.PBS:
        return apply_pbs(state, step.in_modes, step.out_modes, step.slot)
    if kind == ElementKind.HWP:
        return apply_hwp(state, step.mode, step.slot)
    if kind == ElementKind.CIRCULATOR:
        _check_mode(state.modes, step.slot, step.mode)
        return state
    if kind == ElementKind.SPIN_HADAMARD:
        return apply_spin_hadamard(state, step.spin)
    if kind == ElementKind.DETECTOR:
        return detect_and_postselect(state, step.in_modes)[0]
    if coeffs is None:
        raise ValueError(f"{kind.value} needs emitter coefficients")
    if kind == ElementKind.WFC:
        return apply_wfc(state, step.mode, step.slot, coeffs)
    if kind == ElementKind.QD_SCATTER:
        return apply_qd_scatter(state, step.mode, step.slot, step.spin, coeffs)
    raise ValueError(f"unhandled element kind {kind!r}")
