"""Command-line front end: single runs, efficiency sweeps, verification."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from hypercpf.gatecircuit import (
    GateInoperativeError,
    GateResult,
    closed_form_applies,
    efficiency_closed_form,
    efficiency_pipeline,
    run_hyper_cpf,
)
from hypercpf.hyperstate import INV_SQRT2, SparseState, make_input_state
from hypercpf.optics import parse_outcome
from hypercpf.qdcavity import CavityParams
from hypercpf.verification import run_verification

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INOPERATIVE = 3

AMPLITUDE_NAMES = ("alpha", "beta", "lambda", "varpi")
DEFAULT_AMPLITUDES = {name: (INV_SQRT2 + 0j, INV_SQRT2 + 0j) for name in AMPLITUDE_NAMES}
MICRO_EV_UNITS = ("ueV", "μeV", "micro_eV")
AXIS_NAMES = (
    "g_over_kappa",
    "kappa_s_over_kappa",
    "g_over_sqrt_kappa_gamma",
    "p_squared",
    "p",
    "gamma_over_kappa",
)
SWEEP_COLUMNS = ("eta_pipeline", "eta_closed_form", "fidelity")


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    count: int
    open_start: bool = False

    def values(self) -> np.ndarray:
        if self.open_start:
            return np.linspace(self.start, self.stop, self.count + 1)[1:]
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class RunConfig:
    """Resolved run configuration; cavity parameters are in units of kappa."""

    params: CavityParams
    amplitudes: Mapping[str, tuple[complex, complex]] = field(
        default_factory=lambda: dict(DEFAULT_AMPLITUDES)
    )
    axes: tuple[Axis, ...] = ()
    outcome: str | tuple[str, str] = "all"
    output_path: str | None = None
    output_format: str | None = None
    source_units: str = "kappa"

    def input_state(self) -> SparseState:
        a = self.amplitudes
        return make_input_state(a["alpha"], a["beta"], a["lambda"], a["varpi"])

    def header(self) -> dict:
        return {
            "units": "kappa",
            "source_units": self.source_units,
            "cavity": asdict(self.params),
            "input": {k: [[v.real, v.imag] for v in pair] for k, pair in self.amplitudes.items()},
            "outcome": self.outcome if self.outcome == "all" else "".join(self.outcome),
            "axes": [asdict(ax) for ax in self.axes],
        }


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def _number(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(name, f"must be finite, got {value!r}")
    return float(value)


def _complex(value: Any, name: str) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ConfigError(name, f"complex numbers are [re, im], got {value!r}")
        return complex(_number(value[0], name), _number(value[1], name))
    return complex(_number(value, name))


def _parse_cavity(doc: Mapping, name: str = "cavity") -> tuple[CavityParams, str]:
    if not isinstance(doc, Mapping):
        raise ConfigError(name, "expected an object")
    known = {"units", "g", "kappa", "kappa_s", "gamma", "p", "two_kappa_plus_kappa_s",
             "omega_photon", "omega_cavity", "omega_exciton"}
    for key in doc:
        if key not in known:
            raise ConfigError(f"{name}.{key}", "unknown field")
    units = doc.get("units", "kappa")
    if units not in ("kappa",) + MICRO_EV_UNITS:
        raise ConfigError(f"{name}.units", f"expected 'kappa' or 'ueV', got {units!r}")
    if "g" not in doc:
        raise ConfigError(f"{name}.g", "required")
    vals = {k: _number(doc[k], f"{name}.{k}") for k in known - {"units"} if k in doc}
    kappa_s = vals.get("kappa_s", 0.0)
    if units == "kappa":
        if "two_kappa_plus_kappa_s" in vals:
            raise ConfigError(f"{name}.two_kappa_plus_kappa_s", "only valid with units 'ueV'")
        kappa = vals.get("kappa", 1.0)
        gamma = vals.get("gamma", 0.1 * kappa)
    else:
        if "kappa" in vals:
            kappa = vals["kappa"]
        elif "two_kappa_plus_kappa_s" in vals:
            kappa = (vals["two_kappa_plus_kappa_s"] - kappa_s) / 2
        else:
            raise ConfigError(f"{name}.kappa", "required with units 'ueV' (or give two_kappa_plus_kappa_s)")
        if "gamma" not in vals:
            raise ConfigError(f"{name}.gamma", "required with units 'ueV'")
        gamma = vals["gamma"]
    try:
        params = CavityParams(
            g=vals["g"],
            kappa=kappa,
            kappa_s=kappa_s,
            gamma=gamma,
            p=vals.get("p", 1.0),
            omega_photon=vals.get("omega_photon", 0.0),
            omega_cavity=vals.get("omega_cavity", 0.0),
            omega_exciton=vals.get("omega_exciton", 0.0),
        )
    except ValueError as exc:
        raise ConfigError(name, str(exc)) from None
    return params.in_kappa_units(), ("kappa" if units == "kappa" else "ueV")


def _parse_amplitudes(doc: Mapping | None) -> dict[str, tuple[complex, complex]]:
    if doc is None:
        return dict(DEFAULT_AMPLITUDES)
    if not isinstance(doc, Mapping):
        raise ConfigError("input", "expected an object")
    out = {}
    for name in AMPLITUDE_NAMES:
        if name not in doc:
            raise ConfigError(f"input.{name}", "required")
        pair = doc[name]
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ConfigError(f"input.{name}", "expected a pair of complex amplitudes")
        out[name] = (_complex(pair[0], f"input.{name}[0]"), _complex(pair[1], f"input.{name}[1]"))
    try:
        make_input_state(out["alpha"], out["beta"], out["lambda"], out["varpi"])
    except ValueError as exc:
        raise ConfigError("input", str(exc)) from None
    return out


def _parse_axes(doc: Mapping | None) -> tuple[Axis, ...]:
    if doc is None:
        return ()
    axes_doc = doc.get("axes") if isinstance(doc, Mapping) else None
    if not isinstance(axes_doc, list):
        raise ConfigError("sweep.axes", "expected a list of axes")
    axes = []
    for i, ax in enumerate(axes_doc):
        where = f"sweep.axes[{i}]"
        if not isinstance(ax, Mapping):
            raise ConfigError(where, "expected an object")
        name = ax.get("name")
        if name not in AXIS_NAMES:
            raise ConfigError(f"{where}.name", f"expected one of {', '.join(AXIS_NAMES)}, got {name!r}")
        for key in ("start", "stop", "count"):
            if key not in ax:
                raise ConfigError(f"{where}.{key}", "required")
        count = ax["count"]
        if isinstance(count, bool) or not isinstance(count, int) or count < 2:
            raise ConfigError(f"{where}.count", f"must be an integer >= 2, got {count!r}")
        start = _number(ax["start"], f"{where}.start")
        stop = _number(ax["stop"], f"{where}.stop")
        if not start < stop:
            raise ConfigError(where, f"start must be below stop, got {start} >= {stop}")
        axes.append(Axis(name, start, stop, count, bool(ax.get("open_start", False))))
    return tuple(axes)


def parse_config(doc: Mapping) -> RunConfig:
    if not isinstance(doc, Mapping):
        raise ConfigError("<root>", "config must be a JSON object")
    if "cavity" not in doc:
        raise ConfigError("cavity", "required")
    params, units = _parse_cavity(doc["cavity"])
    outcome = doc.get("outcome", "all")
    if outcome != "all":
        try:
            outcome = parse_outcome(outcome)
        except ValueError as exc:
            raise ConfigError("outcome", str(exc)) from None
    output = doc.get("output", {}) or {}
    fmt = output.get("format")
    if fmt not in (None, "json", "csv"):
        raise ConfigError("output.format", f"expected 'json' or 'csv', got {fmt!r}")
    return RunConfig(
        params=params,
        amplitudes=_parse_amplitudes(doc.get("input")),
        axes=_parse_axes(doc.get("sweep")),
        outcome=outcome,
        output_path=output.get("path"),
        output_format=fmt,
        source_units=units,
    )


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_config(doc)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _cx(z: complex) -> list[float]:
    return [z.real, z.imag]


def result_to_json(result: GateResult, config: RunConfig) -> dict:
    c = result.coeffs
    return {
        "parameters": config.header(),
        "coefficients": {"r0": _cx(c.r0), "rh": _cx(c.rh), "c": _cx(c.c), "f": _cx(c.f)},
        "success_probability": result.success_probability,
        "heralded_failure": result.heralded_failure,
        "unheralded_loss": result.unheralded_loss,
        "total_probability": result.total_probability,
        "fidelity_vs_ideal": result.fidelity_vs_ideal,
        "spin_branches": [
            {
                "outcome": "".join(b.outcome),
                "probability": b.probability,
                "fidelity": b.fidelity,
                "state": b.state.to_records(),
            }
            for b in result.spin_branches
        ],
        "output_state": result.output_state.to_json(),
    }


def cmd_simulate(config: RunConfig) -> dict:
    result = run_hyper_cpf(config.input_state(), config.params, config.outcome)
    return result_to_json(result, config)


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def params_at(base: CavityParams, assignments: Sequence[tuple[str, float]]) -> CavityParams:
    """Apply axis values (in kappa units) to ``base``."""
    updates = {}
    gamma = base.gamma
    for name, value in assignments:
        if name == "gamma_over_kappa":
            gamma = value * base.kappa
            updates["gamma"] = gamma
    for name, value in assignments:
        if name == "g_over_kappa":
            updates["g"] = value * base.kappa
        elif name == "kappa_s_over_kappa":
            updates["kappa_s"] = value * base.kappa
        elif name == "g_over_sqrt_kappa_gamma":
            updates["g"] = value * math.sqrt(base.kappa * gamma)
        elif name == "p_squared":
            updates["p"] = math.sqrt(value)
        elif name == "p":
            updates["p"] = value
    return replace(base, **updates)


def sweep_point(base: CavityParams, assignments, amplitudes, with_fidelity: bool = True) -> tuple:
    params = params_at(base, assignments)
    eta = efficiency_pipeline(params)
    closed = None
    if closed_form_applies(params):
        closed = efficiency_closed_form(params.g / params.kappa, params.kappa_s / params.kappa, params.p)
    fid = None
    if with_fidelity:
        state = make_input_state(amplitudes["alpha"], amplitudes["beta"], amplitudes["lambda"], amplitudes["varpi"])
        try:
            fid = run_hyper_cpf(state, params).fidelity_vs_ideal
        except GateInoperativeError:
            fid = None
    return eta, closed, fid


def _sweep_chunk(args) -> list[tuple]:
    base, rows, amplitudes, with_fidelity = args
    return [sweep_point(base, row, amplitudes, with_fidelity) for row in rows]


def sweep_rows(config: RunConfig, workers: int | None = None, with_fidelity: bool = True) -> list[tuple]:
    """One tuple ``(axis1, axis2, eta_pipeline, eta_closed_form, fidelity)`` per grid point.

    Points are evaluated independently (optionally in a process pool) and
    returned in grid order, axis 1 outermost.
    """
    if len(config.axes) != 2:
        raise ConfigError("sweep.axes", f"exactly two axes are required, got {len(config.axes)}")
    ax1, ax2 = config.axes
    grid = [((ax1.name, float(x)), (ax2.name, float(y))) for x in ax1.values() for y in ax2.values()]
    amplitudes = dict(config.amplitudes)
    workers = workers or os.cpu_count() or 1
    chunk = max(1, math.ceil(len(grid) / (4 * workers)))
    tasks = [(config.params, grid[i:i + chunk], amplitudes, with_fidelity) for i in range(0, len(grid), chunk)]
    if workers == 1:
        results = [r for task in tasks for r in _sweep_chunk(task)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [r for part in pool.map(_sweep_chunk, tasks) for r in part]
    return [(a[1], b[1], *vals) for (a, b), vals in zip(grid, results)]


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def render_sweep_csv(config: RunConfig, rows: list[tuple]) -> str:
    buf = io.StringIO()
    for line in json.dumps(config.header(), indent=1, sort_keys=True).splitlines():
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([ax.name for ax in config.axes] + list(SWEEP_COLUMNS))
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def cmd_sweep(config: RunConfig, workers: int | None = None, with_fidelity: bool = True) -> str:
    return render_sweep_csv(config, sweep_rows(config, workers, with_fidelity))


def read_sweep_csv(text: str) -> tuple[list[str], np.ndarray]:
    """Parse a sweep table back into (column names, float array with NaN for blanks)."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    data = [[float(v) if v else math.nan for v in row] for row in reader]
    return header, np.array(data, dtype=float)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _write(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypercpf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the gate once and print the result as JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="write JSON here instead of stdout")

    p = sub.add_parser("sweep", help="efficiency/fidelity table over two parameter axes (CSV)")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="CSV path (default: output.path from the config, else stdout)")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: CPU count)")
    p.add_argument("--skip-fidelity", action="store_true", help="leave the fidelity column empty")

    p = sub.add_parser("verify", help="seeded randomized invariant suite")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--draws", type=int, required=True)

    p = sub.add_parser("closed-form", help="resonant efficiency with gamma = 0.1 kappa")
    p.add_argument("--g", type=float, required=True, help="g / kappa")
    p.add_argument("--ks", type=float, required=True, help="kappa_s / kappa")
    p.add_argument("--p", type=float, required=True, help="interaction completeness p")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            config = load_config(args.config)
            try:
                doc = cmd_simulate(config)
            except GateInoperativeError as exc:
                print(f"gate inoperative: {exc}", file=sys.stderr)
                return EXIT_INOPERATIVE
            _write(json.dumps(doc, indent=2) + "\n", args.out or config.output_path)
        elif args.command == "sweep":
            config = load_config(args.config)
            if args.workers is not None and args.workers < 1:
                raise ConfigError("--workers", "must be at least 1")
            text = cmd_sweep(config, args.workers, not args.skip_fidelity)
            _write(text, args.out or config.output_path)
        elif args.command == "verify":
            if args.draws < 1:
                raise ConfigError("--draws", "must be at least 1")
            report = run_verification(args.seed, args.draws)
            print(report.render())
            return EXIT_OK if report.passed else EXIT_FAILURE
        elif args.command == "closed-form":
            if not 0 < args.p <= 1:
                raise ConfigError("--p", f"must lie in (0, 1], got {args.p}")
            if args.g < 0 or args.ks < 0:
                raise ConfigError("--g/--ks", "must be non-negative")
            print(repr(efficiency_closed_form(args.g, args.ks, args.p)))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
