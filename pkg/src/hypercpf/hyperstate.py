"""Sparse, possibly sub-normalized amplitude tables over the joint basis.

A basis label fixes, for the control (``c``) and target (``t``) photon, a
polarization in the linear {F, S} basis and a spatial mode, plus the
{up, down} state of each QD electron spin.  Labels are packed into a single
integer code (layout below) so that element actions run as array kernels.

    bit  0      pol_c        bits  6-9   spat_t
    bits 1-4    spat_c       bits 10-11  spin1 (0 up, 1 down, 2 absent)
    bit  5      pol_t        bits 12-13  spin2

A spin marked *absent* has been measured and factored out of the state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from hypercpf import _kernels

ZERO_THRESHOLD = 1e-15
NORMALIZATION_TOL = 1e-9

POL_C_SHIFT = 0
SPAT_C_SHIFT = 1
POL_T_SHIFT = 5
SPAT_T_SHIFT = 6
SPIN1_SHIFT = 10
SPIN2_SHIFT = 12
SPAT_MASK = 0b1111
SPIN_MASK = 0b11
MAX_MODES = SPAT_MASK + 1
SPIN_ABSENT = 2

INV_SQRT2 = 1 / math.sqrt(2)


class Polarization(IntEnum):
    F = 0
    S = 1


class Spin(IntEnum):
    """Electron-spin storage basis; ``|+>`` and ``|->`` are derived from it."""

    UP = 0
    DOWN = 1


class Slot(IntEnum):
    CONTROL = 0
    TARGET = 1


# amplitudes <up|+>, <down|+> and <up|->, <down|->
PLUS = np.array([INV_SQRT2, INV_SQRT2])
MINUS = np.array([INV_SQRT2, -INV_SQRT2])


class ZeroNormError(ValueError):
    """A state that must be normalizable has zero norm."""


class ModeMismatchError(ValueError):
    """Two states live on different spatial-mode sets."""


@dataclass(frozen=True)
class ModeSet:
    """Spatial-mode names available to the control and target photon.

    The first two names of each slot are the logical input/output modes
    (``a1, a2`` and ``b1, b2``).
    """

    control: tuple[str, ...]
    target: tuple[str, ...]

    def __post_init__(self) -> None:
        for slot in (self.control, self.target):
            if len(slot) < 2:
                raise ValueError("each photon needs at least two spatial modes")
            if len(slot) > MAX_MODES:
                raise ValueError(f"at most {MAX_MODES} modes per photon are encodable")
        names = self.control + self.target
        if len(set(names)) != len(names):
            raise ValueError(f"mode names must be unique across photons: {names}")

    def modes(self, slot: Slot) -> tuple[str, ...]:
        return self.control if slot == Slot.CONTROL else self.target

    def index(self, slot: Slot, mode: str) -> int:
        try:
            return self.modes(slot).index(mode)
        except ValueError:
            raise ValueError(
                f"mode {mode!r} is not declared for the {Slot(slot).name.lower()} photon"
            ) from None

    def slot_of(self, mode: str) -> Slot:
        if mode in self.control:
            return Slot.CONTROL
        if mode in self.target:
            return Slot.TARGET
        raise ValueError(f"unknown mode {mode!r}")


CONTROL_MODES = ("a1", "a2", "a11", "a12", "a21", "a22", "aD1", "aD2", "aD3")
TARGET_MODES = tuple("b" + m[1:] for m in CONTROL_MODES)
DEFAULT_MODES = ModeSet(CONTROL_MODES, TARGET_MODES)


class HyperBasisLabel(NamedTuple):
    pol_c: Polarization
    spat_c: str
    pol_t: Polarization
    spat_t: str
    spin1: Spin | None
    spin2: Spin | None


def slot_shift(slot: Slot) -> int:
    """Bit offset of the 5-bit (polarization, spatial mode) field of a photon."""
    return POL_C_SHIFT if slot == Slot.CONTROL else POL_T_SHIFT


def spin_shift(index: int) -> int:
    if index == 1:
        return SPIN1_SHIFT
    if index == 2:
        return SPIN2_SHIFT
    raise ValueError(f"spin index must be 1 or 2, got {index}")


def encode(label: HyperBasisLabel, modes: ModeSet) -> int:
    s1 = SPIN_ABSENT if label.spin1 is None else int(Spin(label.spin1))
    s2 = SPIN_ABSENT if label.spin2 is None else int(Spin(label.spin2))
    return (
        int(Polarization(label.pol_c)) << POL_C_SHIFT
        | modes.index(Slot.CONTROL, label.spat_c) << SPAT_C_SHIFT
        | int(Polarization(label.pol_t)) << POL_T_SHIFT
        | modes.index(Slot.TARGET, label.spat_t) << SPAT_T_SHIFT
        | s1 << SPIN1_SHIFT
        | s2 << SPIN2_SHIFT
    )


def decode(code: int, modes: ModeSet) -> HyperBasisLabel:
    code = int(code)
    s1 = (code >> SPIN1_SHIFT) & SPIN_MASK
    s2 = (code >> SPIN2_SHIFT) & SPIN_MASK
    return HyperBasisLabel(
        Polarization((code >> POL_C_SHIFT) & 1),
        modes.control[(code >> SPAT_C_SHIFT) & SPAT_MASK],
        Polarization((code >> POL_T_SHIFT) & 1),
        modes.target[(code >> SPAT_T_SHIFT) & SPAT_MASK],
        None if s1 == SPIN_ABSENT else Spin(s1),
        None if s2 == SPIN_ABSENT else Spin(s2),
    )



@dataclass(frozen=True, eq=False)
class SparseState:
    """Immutable sparse amplitude table plus a ledger of removed probability.

    ``codes`` is sorted and duplicate-free and no stored amplitude is below
    ``ZERO_THRESHOLD`` in modulus.  ``heralded`` maps detector modes to the
    squared amplitude they absorbed; ``unheralded`` collects norm changes
    from attenuating elements (WFC, imperfect scattering).
    """

    modes: ModeSet
    codes: np.ndarray
    amps: np.ndarray
    heralded: Mapping[str, float] = field(default_factory=dict)
    unheralded: float = 0.0

    @classmethod
    def from_arrays(cls, modes, codes, amps, heralded=None, unheralded=0.0) -> "SparseState":
        codes, amps = _kernels.coalesce(
            np.asarray(codes, dtype=np.int64),
            np.asarray(amps, dtype=np.complex128),
            ZERO_THRESHOLD,
        )
        return cls(modes, codes, amps, dict(heralded or {}), float(unheralded))

    @classmethod
    def from_amplitudes(
        cls,
        amplitudes: Mapping[HyperBasisLabel, complex] | Iterable[tuple[HyperBasisLabel, complex]],
        modes: ModeSet = DEFAULT_MODES,
    ) -> "SparseState":
        items = amplitudes.items() if isinstance(amplitudes, Mapping) else amplitudes
        codes, amps = [], []
        for label, amp in items:
            codes.append(encode(HyperBasisLabel(*label), modes))
            amps.append(complex(amp))
        return cls.from_arrays(modes, codes, amps)

    @classmethod
    def empty(cls, modes: ModeSet = DEFAULT_MODES) -> "SparseState":
        return cls.from_arrays(modes, [], [])

    def evolve(self, codes, amps, *, heralded=None, unheralded=None) -> "SparseState":
        """New state with the same modes; ledgers carried over unless given."""
        return SparseState.from_arrays(
            self.modes,
            codes,
            amps,
            self.heralded if heralded is None else heralded,
            self.unheralded if unheralded is None else unheralded,
        )

    @property
    def amplitudes(self) -> dict[HyperBasisLabel, complex]:
        return {decode(c, self.modes): complex(a) for c, a in zip(self.codes, self.amps)}

    def __len__(self) -> int:
        return int(self.codes.size)

    def __iter__(self):
        return iter(self.amplitudes.items())

    def __getitem__(self, label: HyperBasisLabel) -> complex:
        code = encode(HyperBasisLabel(*label), self.modes)
        i = np.searchsorted(self.codes, code)
        if i < self.codes.size and self.codes[i] == code:
            return complex(self.amps[i])
        return 0j

    def norm_sq(self) -> float:
        return float(np.sum(self.amps.real**2 + self.amps.imag**2))

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())

    @property
    def heralded_total(self) -> float:
        return float(sum(self.heralded.values()))

    @property
    def dropped_mass(self) -> float:
        return self.heralded_total + self.unheralded

    def scaled(self, factor: complex) -> "SparseState":
        return self.evolve(self.codes, self.amps * complex(factor))

    def normalized(self) -> "SparseState":
        n = self.norm()
        if n == 0:
            raise ZeroNormError("cannot normalize a zero-norm state")
        return self.scaled(1 / n)

    # Linear combinations drop the loss ledgers; they are only meaningful for
    # states produced by a single evolution.
    def __add__(self, other: "SparseState") -> "SparseState":
        _check_modes(self, other)
        return SparseState.from_arrays(
            self.modes,
            np.concatenate((self.codes, other.codes)),
            np.concatenate((self.amps, other.amps)),
        )

    def __mul__(self, factor: complex) -> "SparseState":
        return SparseState.from_arrays(self.modes, self.codes, self.amps * complex(factor))

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"SparseState({len(self)} terms, norm_sq={self.norm_sq():.6g})"

    # -- serialization -----------------------------------------------------

    def to_records(self) -> list[dict]:
        records = []
        for label, amp in self.amplitudes.items():
            records.append(
                {
                    "pol_c": label.pol_c.name,
                    "spat_c": label.spat_c,
                    "pol_t": label.pol_t.name,
                    "spat_t": label.spat_t,
                    "spin1": None if label.spin1 is None else label.spin1.name.lower(),
                    "spin2": None if label.spin2 is None else label.spin2.name.lower(),
                    "re": amp.real,
                    "im": amp.imag,
                }
            )
        return records

    def to_json(self) -> dict:
        return {
            "modes": {"control": list(self.modes.control), "target": list(self.modes.target)},
            "amplitudes": self.to_records(),
            "heralded": dict(self.heralded),
            "unheralded": self.unheralded,
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "SparseState":
        modes = DEFAULT_MODES
        if "modes" in doc:
            modes = ModeSet(tuple(doc["modes"]["control"]), tuple(doc["modes"]["target"]))
        items = []
        for rec in doc["amplitudes"]:
            label = HyperBasisLabel(
                Polarization[rec["pol_c"]],
                rec["spat_c"],
                Polarization[rec["pol_t"]],
                rec["spat_t"],
                None if rec["spin1"] is None else Spin[rec["spin1"].upper()],
                None if rec["spin2"] is None else Spin[rec["spin2"].upper()],
            )
            items.append((label, complex(rec["re"], rec["im"])))
        state = cls.from_amplitudes(items, modes)
        return cls(
            modes,
            state.codes,
            state.amps,
            dict(doc.get("heralded", {})),
            float(doc.get("unheralded", 0.0)),
        )


def _check_modes(a: SparseState, b: SparseState) -> None:
    if a.modes != b.modes:
        raise ModeMismatchError("states are defined over different mode graphs")


def _check_pair(name: str, pair: Sequence[complex]) -> tuple[complex, complex]:
    if len(pair) != 2:
        raise ValueError(f"{name} must be a pair of amplitudes, got {len(pair)} values")
    x1, x2 = complex(pair[0]), complex(pair[1])
    norm = abs(x1) ** 2 + abs(x2) ** 2
    if abs(norm - 1) > NORMALIZATION_TOL:
        raise ValueError(f"{name} is not normalized: |{name}_1|^2 + |{name}_2|^2 = {norm!r}")
    return x1, x2


def make_input_state(
    alpha: Sequence[complex],
    beta: Sequence[complex],
    lam: Sequence[complex],
    varpi: Sequence[complex],
    modes: ModeSet = DEFAULT_MODES,
) -> SparseState:
    """Product input: control and target photon in both DOFs, both spins in ``|+>``.

    ``alpha``/``lam`` weight the F/S polarizations of the control/target
    photon, ``beta``/``varpi`` their first/second spatial modes.
    """
    alpha = _check_pair("alpha", alpha)
    beta = _check_pair("beta", beta)
    lam = _check_pair("lambda", lam)
    varpi = _check_pair("varpi", varpi)
    items = []
    for pc, a in zip(Polarization, alpha):
        for mc, b in zip(modes.control[:2], beta):
            for pt, l in zip(Polarization, lam):
                for mt, w in zip(modes.target[:2], varpi):
                    for s1 in Spin:
                        for s2 in Spin:
                            amp = a * b * l * w * PLUS[s1] * PLUS[s2]
                            items.append((HyperBasisLabel(pc, mc, pt, mt, s1, s2), amp))
    return SparseState.from_amplitudes(items, modes)


def inner_product(a: SparseState, b: SparseState) -> complex:
    """``<a|b>``, conjugate-linear in ``a``."""
    _check_modes(a, b)
    _, ia, ib = np.intersect1d(a.codes, b.codes, assume_unique=True, return_indices=True)
    return complex(np.sum(np.conj(a.amps[ia]) * b.amps[ib]))


def fidelity(real_state: SparseState, ideal_state: SparseState) -> float:
    """Overlap modulus of the two states after normalizing both."""
    na = real_state.norm()
    nb = ideal_state.norm()
    if na == 0:
        raise ZeroNormError("real_state has zero norm")
    if nb == 0:
        raise ZeroNormError("ideal_state has zero norm")
    value = abs(inner_product(real_state, ideal_state)) / (na * nb)
    return min(1.0, value)


def max_abs_difference(a: SparseState, b: SparseState) -> tuple[float, HyperBasisLabel | None]:
    """Largest ``|a[label] - b[label]|`` over the union of stored labels."""
    _check_modes(a, b)
    codes = np.union1d(a.codes, b.codes)
    va = np.zeros(codes.size, dtype=np.complex128)
    vb = np.zeros(codes.size, dtype=np.complex128)
    va[np.searchsorted(codes, a.codes)] = a.amps
    vb[np.searchsorted(codes, b.codes)] = b.amps
    if codes.size == 0:
        return 0.0, None
    d = np.abs(va - vb)
    k = int(np.argmax(d))
    return float(d[k]), decode(codes[k], a.modes)
