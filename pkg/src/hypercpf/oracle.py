"""Naive dense-matrix simulator used to cross-check the sparse path.

The dense basis enumerates every declared mode, so states can be compared
after each stage.  Flat index order (row-major)::

    (pol_c, spat_c, pol_t, spat_t, spin1, spin2)
    dims = (2, Nc, 2, Nt, 2, 2)

Every element is a small dense operator on the tensor factors it touches.
Evolution contracts that operator with the state tensor; the equivalent
full ``dim x dim`` matrix is available from ``dense_element_matrix``.
Nothing here calls the sparse kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from hypercpf.hyperstate import HyperBasisLabel, ModeSet, Polarization, Slot, Spin, SparseState
from hypercpf.optics import ElementKind, ElementStep
from hypercpf.qdcavity import EmitterCoeffs

# factor positions inside the flat index
POL_C, SPAT_C, POL_T, SPAT_T, SPIN1, SPIN2 = range(6)

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True)
class DenseBasis:
    modes: ModeSet

    @property
    def dims(self) -> tuple[int, ...]:
        return (2, len(self.modes.control), 2, len(self.modes.target), 2, 2)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, label: HyperBasisLabel) -> int:
        if label.spin1 is None or label.spin2 is None:
            raise ValueError("the dense basis has no slot for measured-out spins")
        digits = (
            int(label.pol_c),
            self.modes.control.index(label.spat_c),
            int(label.pol_t),
            self.modes.target.index(label.spat_t),
            int(label.spin1),
            int(label.spin2),
        )
        return int(np.ravel_multi_index(digits, self.dims))

    def label(self, index: int) -> HyperBasisLabel:
        pc, mc, pt, mt, s1, s2 = np.unravel_index(index, self.dims)
        return HyperBasisLabel(
            Polarization(int(pc)),
            self.modes.control[mc],
            Polarization(int(pt)),
            self.modes.target[mt],
            Spin(int(s1)),
            Spin(int(s2)),
        )


@dataclass(frozen=True, eq=False)
class DenseState:
    basis: DenseBasis
    vector: np.ndarray

    def __post_init__(self) -> None:
        if self.vector.shape != (self.basis.dim,):
            raise ValueError(f"vector has shape {self.vector.shape}, basis needs ({self.basis.dim},)")

    @classmethod
    def from_sparse(cls, state: SparseState) -> "DenseState":
        basis = DenseBasis(state.modes)
        vec = np.zeros(basis.dim, dtype=complex)
        for label, amp in state.amplitudes.items():
            vec[basis.index(label)] += amp
        return cls(basis, vec)

    def norm_sq(self) -> float:
        return float(np.vdot(self.vector, self.vector).real)


@dataclass(frozen=True)
class ComparisonReport:
    max_discrepancy: float
    label: HyperBasisLabel | None
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_discrepancy < self.tol


def compare_states(sparse: SparseState, dense: DenseState, tol: float = 1e-12) -> ComparisonReport:
    """Largest amplitude difference between the two representations."""
    if DenseBasis(sparse.modes) != dense.basis:
        raise ValueError(
            f"dimension mismatch: sparse state over {sparse.modes}, dense basis over {dense.basis.modes}"
        )
    diff = DenseState.from_sparse(sparse).vector - dense.vector
    k = int(np.argmax(np.abs(diff)))
    worst = float(abs(diff[k]))
    return ComparisonReport(worst, dense.basis.label(k) if worst > 0 else None, tol)


# ---------------------------------------------------------------------------
# element operators
# ---------------------------------------------------------------------------


def _slot_axes(slot: Slot) -> tuple[int, int]:
    return (POL_C, SPAT_C) if slot == Slot.CONTROL else (POL_T, SPAT_T)


def _spin_axis(index: int) -> int:
    return SPIN1 if index == 1 else SPIN2


def _photon_local(basis: DenseBasis, slot: Slot, transitions) -> np.ndarray:
    """Matrix on (pol, spat) of one photon from ``{(pol, mode): [(amp, pol', mode'), ...]}``.

    Unlisted (pol, mode) pairs map to themselves.
    """
    names = basis.modes.modes(slot)
    nm = len(names)
    local = np.eye(2 * nm, dtype=complex)
    for (pol, mode), targets in transitions.items():
        col = pol * nm + names.index(mode)
        local[:, col] = 0
        for amp, pol2, mode2 in targets:
            local[pol2 * nm + names.index(mode2), col] += amp
    return local


def _pbs_transitions(in_modes, out_modes):
    i0, i1 = in_modes
    o0, o1 = out_modes
    table = {(0, i0): (0, o0), (1, i0): (1, o1)}
    if i1 is not None:
        table[(0, i1)] = (0, o1)
        table[(1, i1)] = (1, o0)
    # unused pairs close the permutation in sorted order (empty in any real run)
    ports = [m for m in (i0, i1, o0, o1) if m is not None]
    pairs = sorted({(pol, m) for m in ports for pol in (0, 1)})
    free_src = [x for x in pairs if x not in table]
    free_dst = [x for x in pairs if x not in table.values()]
    table.update(zip(free_src, free_dst))
    return {src: [(1.0, *dst)] for src, dst in table.items()}


def _mode_projector(basis: DenseBasis, slot: Slot, mode: str) -> np.ndarray:
    names = basis.modes.modes(slot)
    proj = np.zeros((len(names), len(names)), dtype=complex)
    k = names.index(mode)
    proj[k, k] = 1
    return proj


def _scatter_local(basis: DenseBasis, step: ElementStep, coeffs: EmitterCoeffs) -> np.ndarray:
    """Operator on (pol, spat, spin) factors, ordered pol-major.

    The 4x4 map on (polarization x {+,-}) is ``f * I + c * (X (x) X)``; it is
    rotated into the up/down spin basis and applied on the one mode only.
    """
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    q_pm = coeffs.f * np.eye(4) + coeffs.c * np.kron(x, x)
    to_pm = np.kron(np.eye(2), _H)
    q = (to_pm @ q_pm @ to_pm).reshape(2, 2, 2, 2)  # [pol', spin', pol, spin]
    on = _mode_projector(basis, step.slot, step.mode)
    off = np.eye(on.shape[0]) - on
    # [pol', spat', spin', pol, spat, spin]
    op = np.einsum("aibj,xy->axibyj", q, on) + np.einsum("ab,xy,ij->axibyj", np.eye(2), off, np.eye(2))
    n = 2 * on.shape[0] * 2
    return op.reshape(n, n)


def element_operator(step: ElementStep, coeffs: EmitterCoeffs | None, basis: DenseBasis):
    """``(axes, local)``: the touched tensor factors and the operator on them."""
    kind = step.kind
    if kind == ElementKind.SPIN_HADAMARD:
        return (_spin_axis(step.spin),), _H
    axes = _slot_axes(step.slot)
    if kind == ElementKind.CIRCULATOR:
        return (), np.eye(1, dtype=complex)
    if kind == ElementKind.PBS:
        return axes, _photon_local(basis, step.slot, _pbs_transitions(step.in_modes, step.out_modes))
    if kind == ElementKind.HWP:
        m = step.mode
        return axes, _photon_local(basis, step.slot, {(0, m): [(1.0, 1, m)], (1, m): [(1.0, 0, m)]})
    if kind == ElementKind.DETECTOR:
        on = _mode_projector(basis, step.slot, step.mode)
        return (axes[1],), np.eye(on.shape[0]) - on
    if coeffs is None:
        raise ValueError(f"{kind.value} needs emitter coefficients")
    if kind == ElementKind.WFC:
        on = _mode_projector(basis, step.slot, step.mode)
        local = np.eye(on.shape[0]) + (coeffs.c - 1) * on
        return (axes[1],), local.astype(complex)
    if kind == ElementKind.QD_SCATTER:
        return axes + (_spin_axis(step.spin),), _scatter_local(basis, step, coeffs)
    raise ValueError(f"unhandled element kind {kind!r}")


def _apply_local(tensor: np.ndarray, axes: tuple[int, ...], local: np.ndarray) -> np.ndarray:
    """Contract ``local`` with the listed leading axes of ``tensor`` (extra trailing axes are batch)."""
    if not axes:
        return tensor
    moved = np.moveaxis(tensor, axes, range(len(axes)))
    shape = moved.shape
    n = int(np.prod(shape[: len(axes)]))
    out = (local @ moved.reshape(n, -1)).reshape(shape)
    return np.moveaxis(out, range(len(axes)), axes)


def apply_dense(state: DenseState, step: ElementStep, coeffs: EmitterCoeffs | None) -> DenseState:
    axes, local = element_operator(step, coeffs, state.basis)
    tensor = state.vector.reshape(state.basis.dims)
    return DenseState(state.basis, _apply_local(tensor, axes, local).reshape(-1))


def dense_element_matrix(step: ElementStep, coeffs: EmitterCoeffs | None, basis: DenseBasis) -> np.ndarray:
    """Full ``dim x dim`` matrix of one element; identity off the touched subspace."""
    axes, local = element_operator(step, coeffs, basis)
    eye = np.eye(basis.dim, dtype=complex).reshape(basis.dims + (basis.dim,))
    return _apply_local(eye, axes, local).reshape(basis.dim, basis.dim)


def run_dense(state: DenseState, graph, upto: str | None = None) -> dict[str, DenseState]:
    """Dense counterpart of :func:`hypercpf.gatecircuit.run_stages`."""
    from hypercpf.gatecircuit import STAGES

    out = {}
    for name in STAGES:
        for step in graph.stages[name]:
            state = apply_dense(state, step, graph.coeffs)
        out[name] = state
        if name == upto:
            break
    return out
