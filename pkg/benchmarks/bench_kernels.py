"""Compare the numba and pure-numpy kernel backends.

Run with ``python benchmarks/bench_kernels.py``.  Times the three sparse
kernels at a few array sizes and a full gate invocation under each backend.
Gate states hold at most a few hundred entries, so per-call overhead rather
than arithmetic dominates there; the large synthetic sizes show where the
compiled loops pull ahead.
"""

import argparse
import timeit

import numpy as np

from hypercpf import _kernels
from hypercpf.gatecircuit import run_hyper_cpf
from hypercpf.qdcavity import CavityParams
from hypercpf.verification import input_from, random_amplitudes


def kernel_cases(n, rng):
    codes = rng.integers(0, 1 << 14, size=n).astype(np.int64)
    amps = rng.normal(size=n) + 1j * rng.normal(size=n)
    new_local = rng.permutation(32).astype(np.int64)
    factor = rng.normal(size=32) + 0j
    keep = np.array([0.5, -0.5], dtype=complex)
    flip = np.array([0.5, 0.5], dtype=complex)
    return {
        "coalesce": lambda ns: ns.coalesce(codes, amps, 1e-15),
        "monomial": lambda ns: ns.monomial(codes, amps, np.int64(0), new_local, factor),
        "two_term": lambda ns: ns.two_term(
            codes, amps, np.int64(0b110), np.int64(0b010), np.int64(10), np.int64(1 << 10), keep, flip
        ),
    }


def best_of(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[256, 10_000, 1_000_000])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    backends = [_kernels.NUMPY] + ([_kernels.NUMBA] if _kernels.NUMBA is not None else [])
    if len(backends) == 1:
        print("numba not installed; timing the numpy backend only")
    rng = np.random.default_rng(0)

    print(f"{'kernel':<10}{'size':>10}" + "".join(f"{ns.name + ' [us]':>16}" for ns in backends) + f"{'speedup':>10}")
    for n in args.sizes:
        for name, call in kernel_cases(n, rng).items():
            for ns in backends:
                call(ns)  # compile outside the timed region
            times = [best_of(lambda ns=ns: call(ns), args.repeat) for ns in backends]
            speedup = f"{times[0] / times[1]:>10.2f}" if len(times) > 1 else ""
            print(f"{name:<10}{n:>10}" + "".join(f"{t * 1e6:>16.1f}" for t in times) + speedup)

    state = input_from(random_amplitudes(rng))
    params = CavityParams(g=1.2, kappa_s=0.3, gamma=0.2, p=0.9, omega_cavity=0.1)
    times = []
    previous = _kernels.backend()
    try:
        for ns in backends:
            _kernels.set_backend(ns.name)
            run_hyper_cpf(state, params)
            times.append(best_of(lambda: run_hyper_cpf(state, params), args.repeat))
    finally:
        _kernels.set_backend(previous)
    speedup = f"{times[0] / times[1]:>10.2f}" if len(times) > 1 else ""
    print(f"{'gate run':<10}{'':>10}" + "".join(f"{t * 1e6:>16.1f}" for t in times) + speedup)


if __name__ == "__main__":
    main()
