"""Hot kernels acting on sparse (code, amplitude) arrays.

Every optical element of the gate reduces to one of three array operations:

* ``monomial_map``  -- relabel a 5-bit photon-local field and multiply by a
  per-field factor (PBS, HWP, WFC, sigma_z corrections);
* ``two_term_map``  -- split each selected entry into a "keep" and a
  "flipped" entry (spin Hadamard, photon--QD scattering);
* ``coalesce``      -- sort, merge duplicate codes and prune tiny amplitudes.

Each kernel has a numba ``@njit`` implementation and a vectorised numpy
fallback.  The numba path is used when numba imports and the environment
variable ``HYPERCPF_DISABLE_NUMBA`` is unset (or ``0``).  ``set_backend``
switches at runtime, which the benchmarks and backend-parity tests use.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

LOCAL_WIDTH = 5
LOCAL_MASK = (1 << LOCAL_WIDTH) - 1


def _numba_requested() -> bool:
    flag = os.environ.get("HYPERCPF_DISABLE_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


try:
    if not _numba_requested():
        raise ImportError("numba disabled via HYPERCPF_DISABLE_NUMBA")
    import numba
except ImportError:
    numba = None

HAVE_NUMBA = numba is not None


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def _coalesce_np(codes, amps, threshold):
    if codes.size == 0:
        return codes.copy(), amps.copy()
    uniq, inverse = np.unique(codes, return_inverse=True)
    summed = np.zeros(uniq.size, dtype=np.complex128)
    np.add.at(summed, inverse, amps)
    keep = np.abs(summed) >= threshold
    return uniq[keep], summed[keep]


def _monomial_np(codes, amps, shift, new_local, factor):
    local = (codes >> shift) & LOCAL_MASK
    cleared = codes & ~np.int64(LOCAL_MASK << shift)
    return cleared | (new_local[local] << shift), amps * factor[local]


def _two_term_np(codes, amps, sel_mask, sel_val, ctx_shift, flip_mask, keep, flip):
    sel = (codes & sel_mask) == sel_val
    ctx = (codes[sel] >> ctx_shift) & 1
    picked = codes[sel]
    out_codes = np.concatenate((codes[~sel], picked, picked ^ flip_mask))
    out_amps = np.concatenate((amps[~sel], amps[sel] * keep[ctx], amps[sel] * flip[ctx]))
    return out_codes, out_amps


# ---------------------------------------------------------------------------
# loop implementations (compiled with numba when available)
# ---------------------------------------------------------------------------


def _coalesce_loop(codes, amps, threshold):
    n = codes.size
    out_codes = np.empty(n, dtype=np.int64)
    out_amps = np.empty(n, dtype=np.complex128)
    if n == 0:
        return out_codes, out_amps
    order = np.argsort(codes, kind="mergesort")
    m = 0
    current = codes[order[0]]
    acc = 0j
    for k in range(n):
        i = order[k]
        if codes[i] != current:
            if abs(acc) >= threshold:
                out_codes[m] = current
                out_amps[m] = acc
                m += 1
            current = codes[i]
            acc = 0j
        acc += amps[i]
    if abs(acc) >= threshold:
        out_codes[m] = current
        out_amps[m] = acc
        m += 1
    return out_codes[:m], out_amps[:m]


def _monomial_loop(codes, amps, shift, new_local, factor):
    n = codes.size
    out_codes = np.empty(n, dtype=np.int64)
    out_amps = np.empty(n, dtype=np.complex128)
    clear = ~(np.int64(LOCAL_MASK) << shift)
    for i in range(n):
        local = (codes[i] >> shift) & LOCAL_MASK
        out_codes[i] = (codes[i] & clear) | (new_local[local] << shift)
        out_amps[i] = amps[i] * factor[local]
    return out_codes, out_amps


def _two_term_loop(codes, amps, sel_mask, sel_val, ctx_shift, flip_mask, keep, flip):
    n = codes.size
    nsel = 0
    for i in range(n):
        if (codes[i] & sel_mask) == sel_val:
            nsel += 1
    rest = n - nsel
    out_codes = np.empty(n + nsel, dtype=np.int64)
    out_amps = np.empty(n + nsel, dtype=np.complex128)
    # same layout as the numpy path: untouched, kept, flipped
    j = 0
    k = rest
    for i in range(n):
        c = codes[i]
        if (c & sel_mask) == sel_val:
            ctx = (c >> ctx_shift) & 1
            out_codes[k] = c
            out_amps[k] = amps[i] * keep[ctx]
            out_codes[k + nsel] = c ^ flip_mask
            out_amps[k + nsel] = amps[i] * flip[ctx]
            k += 1
        else:
            out_codes[j] = c
            out_amps[j] = amps[i]
            j += 1
    return out_codes, out_amps


NUMPY = SimpleNamespace(
    name="numpy",
    coalesce=_coalesce_np,
    monomial=_monomial_np,
    two_term=_two_term_np,
)

if HAVE_NUMBA:
    NUMBA = SimpleNamespace(
        name="numba",
        coalesce=numba.njit(cache=True)(_coalesce_loop),
        monomial=numba.njit(cache=True)(_monomial_loop),
        two_term=numba.njit(cache=True)(_two_term_loop),
    )
else:
    NUMBA = None

_active = NUMBA if HAVE_NUMBA else NUMPY


def backend() -> str:
    return _active.name


def set_backend(name: str) -> str:
    """Select ``"numba"`` or ``"numpy"``; returns the previously active name."""
    global _active
    previous = _active.name
    if name == "numpy":
        _active = NUMPY
    elif name == "numba":
        if NUMBA is None:
            raise RuntimeError("numba backend unavailable (not installed or disabled)")
        _active = NUMBA
    else:
        raise ValueError(f"unknown backend {name!r}")
    return previous


def coalesce(codes: np.ndarray, amps: np.ndarray, threshold: float):
    """Sorted unique codes with summed amplitudes; drops ``|amp| < threshold``."""
    return _active.coalesce(codes, amps, threshold)


def monomial_map(codes, amps, shift: int, new_local: np.ndarray, factor: np.ndarray):
    """Apply a monomial (permutation times diagonal) map on one 5-bit field."""
    return _active.monomial(codes, amps, np.int64(shift), new_local, factor)


def two_term_map(codes, amps, sel_mask, sel_val, ctx_shift, flip_mask, keep, flip):
    """Map each selected entry ``x`` to ``keep[ctx]*x + flip[ctx]*(x ^ flip_mask)``.

    Entries with ``code & sel_mask != sel_val`` pass through.  ``ctx`` is the
    bit of the code at ``ctx_shift``.  Output is not coalesced.
    """
    return _active.two_term(
        codes,
        amps,
        np.int64(sel_mask),
        np.int64(sel_val),
        np.int64(ctx_shift),
        np.int64(flip_mask),
        keep,
        flip,
    )
