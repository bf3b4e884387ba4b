"""Command line front end: setup files, engine dispatch, CSV emission.

Setup files are JSON; complex matrices are row-major nested arrays whose
entries are either plain reals or two-element [re, im] pairs.  Distribution
tables are written as CSV with a single comment header line and columns
s_1[,s_2],P, floats at 17 significant digits so files round-trip exactly.

Exit codes: 0 success, 2 validation or input failure, 3 numerical guard trip.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import diffusion, fcs, stochastic
from .errors import (
    CwlmError,
    IncompatibleGrids,
    NumericalGuardError,
    ParseError,
    ValidationFailed,
)
from .model import MeasurementSetup, NoiseData, validate_setup
from .numerics import UniformGrid
from .separation import separate
from .tables import DistributionTable, ks_statistic, l1_distance


@dataclass
class RunConfig:
    setup_path: str
    engine: str
    t: float = 1.0
    dt: float | None = None
    chi_max: float | None = None
    chi_points: int = 128
    s_max: float | None = None
    s_points: int = 257
    n_traj: int = 10000
    aux: str = "qubit"
    seed: int = 0
    out: str | None = None
    samples: str | None = None

    def __post_init__(self):
        if self.t <= 0:
            raise ParseError("t must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ParseError("dt must be positive")
        if self.chi_points < 16 or self.s_points < 16:
            raise ParseError("grids need at least 16 points")
        if self.n_traj < 1:
            raise ParseError("n must be at least 1")


def _parse_matrix(node, name: str, square: bool = True) -> np.ndarray:
    try:
        rows = []
        for r, row in enumerate(node):
            vals = []
            for c, entry in enumerate(row):
                if isinstance(entry, (list, tuple)):
                    if len(entry) != 2:
                        raise ValueError(f"entry ({r},{c}) is not a [re, im] pair")
                    vals.append(complex(entry[0], entry[1]))
                else:
                    vals.append(complex(entry))
            rows.append(vals)
        m = np.array(rows, dtype=complex)
    except (TypeError, ValueError, IndexError) as exc:
        raise ParseError(f"field {name!r}: {exc}") from exc
    if m.ndim != 2 or (square and m.shape[0] != m.shape[1]):
        raise ParseError(f"field {name!r}: expected a {'square ' if square else ''}matrix")
    return m


def _parse_real_matrix(node, name: str) -> np.ndarray:
    m = _parse_matrix(node, name, square=False)
    if np.max(np.abs(m.imag)) > 0:
        raise ParseError(f"field {name!r}: must be real")
    return m.real


def parse_setup(doc: dict, origin: str = "<setup>"):
    """Build (setup, rho0) from a parsed JSON document."""
    try:
        h = _parse_matrix(doc["hamiltonian"], "hamiltonian")
        ops = [
            _parse_matrix(o, f"measured_ops[{k}]") for k, o in enumerate(doc.get("measured_ops", []))
        ]
        noise_doc = doc["noise"]
        noise = NoiseData.create(
            S_det=_parse_real_matrix(noise_doc["S_det"], "noise.S_det"),
            S_cross=_parse_real_matrix(noise_doc["S_cross"], "noise.S_cross")
            if "S_cross" in noise_doc
            else None,
            S_op=_parse_real_matrix(noise_doc["S_op"], "noise.S_op")
            if "S_op" in noise_doc
            else None,
            a_cross=_parse_real_matrix(noise_doc["a_cross"], "noise.a_cross")
            if "a_cross" in noise_doc
            else None,
            a_op=_parse_real_matrix(noise_doc["a_op"], "noise.a_op")
            if "a_op" in noise_doc
            else None,
        )
    except KeyError as exc:
        raise ParseError(f"{origin}: missing field {exc}") from exc
    try:
        setup = MeasurementSetup(
            hamiltonian=h, measured_ops=tuple(ops), noise=noise, label=doc.get("label", origin)
        )
    except ValueError as exc:
        raise ParseError(f"{origin}: {exc}") from exc
    if "rho0" in doc:
        rho0 = _parse_matrix(doc["rho0"], "rho0")
    else:
        rho0 = np.eye(setup.dim, dtype=complex) / setup.dim
    return setup, rho0


def load_setup(path: str, strict: bool = True):
    """Load and validate a setup file; returns (setup, rho0, report).

    Saturated inequalities are accepted with a warning.  With ``strict``
    (the default for engine runs) an overall-invalid setup raises
    :class:`ValidationFailed` naming the failed checks.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    setup, rho0 = parse_setup(doc, origin=path)
    report = validate_setup(setup)
    for check in report.warnings:
        warnings.warn(f"{path}: check {check.name} is saturated (margin {check.margin:.2e})")
    if strict and not report.overall:
        names = ", ".join(c.name for c in report.failed())
        raise ValidationFailed(f"{path}: validation failed: {names}", report=report)
    return setup, rho0, report


def fixture_path(name: str) -> str:
    """Path of a bundled example setup (qubit_sz, qubit_two_detectors, ...)."""
    if not name.endswith(".json"):
        name += ".json"
    return str(resources.files("cwlm.fixtures").joinpath(name))


def write_distribution_csv(table: DistributionTable, path: str) -> None:
    meta = table.meta
    engine = meta.get("engine", "unknown")
    t = meta.get("t", 0.0)
    seed = meta.get("seed", "")
    with open(path, "w") as fh:
        fh.write(f"# engine={engine}, t={t:.17g}, seed={seed}\n")
        cols = [f"s_{k + 1}" for k in range(table.ndim)] + ["P"]
        fh.write(",".join(cols) + "\n")
        mesh = np.meshgrid(*table.axes, indexing="ij")
        flat = [m.ravel() for m in mesh] + [table.values.ravel()]
        for row in zip(*flat):
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def read_distribution_csv(path: str) -> DistributionTable:
    meta = {}
    try:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    data_lines = []
    header = None
    for ln in lines:
        if ln.startswith("#"):
            for item in ln[1:].split(","):
                if "=" in item:
                    k, v = item.split("=", 1)
                    meta[k.strip()] = v.strip()
        elif header is None:
            header = ln.split(",")
        else:
            data_lines.append(ln)
    if header is None or not data_lines:
        raise ParseError(f"{path}: no tabular data found")
    ndim = len(header) - 1
    if ndim not in (1, 2):
        raise ParseError(f"{path}: expected 1 or 2 output columns, got {ndim}")
    raw = np.array([[float(x) for x in ln.split(",")] for ln in data_lines])
    if ndim == 1:
        order = np.argsort(raw[:, 0])
        return DistributionTable(axes=(raw[order, 0],), values=raw[order, 1], meta=meta)
    ax1 = np.unique(raw[:, 0])
    ax2 = np.unique(raw[:, 1])
    if len(ax1) * len(ax2) != raw.shape[0]:
        raise ParseError(f"{path}: 2D table is not a full tensor grid")
    values = np.full((len(ax1), len(ax2)), np.nan)
    i = np.searchsorted(ax1, raw[:, 0])
    j = np.searchsorted(ax2, raw[:, 1])
    values[i, j] = raw[:, 2]
    return DistributionTable(axes=(ax1, ax2), values=values, meta=meta)


def compare(path_a: str, path_b: str) -> dict:
    """L1 distance, KS statistic and moments of two distribution files."""
    a = read_distribution_csv(path_a)
    b = read_distribution_csv(path_b)
    mean_a, cov_a = a.moments()
    mean_b, cov_b = b.moments()
    metrics = {
        "l1": l1_distance(a, b),
        "mean_a": mean_a,
        "mean_b": mean_b,
        "var_a": np.diag(cov_a),
        "var_b": np.diag(cov_b),
    }
    if a.ndim == 1:
        metrics["ks"] = ks_statistic(a, b)
    return metrics


def _grid_from(config: RunConfig, setup, kind: str) -> UniformGrid:
    n = setup.n_detectors
    if kind == "chi":
        if config.chi_max is not None:
            return UniformGrid.make(config.chi_max, config.chi_points, ndim=n)
        return fcs.default_chi_grid(setup, config.t, points=config.chi_points)
    if config.s_max is not None:
        return UniformGrid.make(config.s_max, config.s_points, ndim=n)
    return fcs._default_s_grid(setup, config.t, points=config.s_points)


def _trajectory_dt(separated, t: float) -> float:
    b_norm = max((np.linalg.norm(b, 2) for b in separated.B_ops), default=0.0)
    if b_norm == 0.0:
        return t / 100.0
    dt = (0.05 / b_norm) ** 2 / separated.noise_scale
    return min(dt, t / 10.0)


def run(config: RunConfig) -> int:
    """Dispatch one engine run; returns the process exit code."""
    strict = config.engine != "validate"
    setup, rho0, report = load_setup(config.setup_path, strict=strict)

    if config.engine == "validate":
        print(report.summary())
        return 0 if report.overall else 2

    if config.engine == "fcs":
        table = fcs.output_distribution_fcs(
            setup,
            rho0,
            config.t,
            chi_grid=_grid_from(config, setup, "chi"),
            s_grid=_grid_from(config, setup, "s"),
            dt=config.dt,
        )
        table.meta["seed"] = config.seed
    elif config.engine == "diffusion":
        s_grid = _grid_from(config, setup, "s")
        h = float(np.min(s_grid.spacings))
        s_max_noise = float(np.max(np.linalg.eigvalsh(setup.noise.S_det)))
        dt = config.dt if config.dt is not None else 0.2 * h**2 / s_max_noise
        out_field = diffusion.evolve_field(setup, rho0, config.t, dt, s_grid)
        table = diffusion.marginal(out_field)
        table.meta["seed"] = config.seed
        print(f"boundary leakage: {out_field.leakage:.3e}")
    elif config.engine == "analytic":
        table = diffusion.commuting_marginal(setup, rho0, config.t, _grid_from(config, setup, "s"))
        table.meta["seed"] = config.seed
    elif config.engine == "trajectories":
        separated = separate(setup)
        dt = config.dt if config.dt is not None else _trajectory_dt(separated, config.t)
        result = stochastic.run_ensemble(
            separated,
            rho0,
            config.t,
            dt,
            config.n_traj,
            aux=config.aux,
            seed=config.seed,
            s_grid=_grid_from(config, setup, "s"),
            keep_samples=config.samples is not None,
        )
        table = result.histogram_table()
        table.meta["t"] = config.t
        if config.samples is not None:
            header = ",".join(f"s_{k + 1}" for k in range(separated.n_detectors))
            np.savetxt(
                config.samples,
                result.final_samples,
                delimiter=",",
                fmt="%.17g",
                header=header,
                comments="# ",
            )
    else:
        raise ParseError(f"unknown engine {config.engine!r}")

    if config.out:
        write_distribution_csv(table, config.out)
        print(f"wrote {config.out}")
    else:
        mean, cov = table.moments()
        print(f"mass={table.total_mass():.6f} mean={mean} var={np.diag(cov)}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cwlm",
        description="Continuous weak linear measurement simulator",
    )
    sub = parser.add_subparsers(dest="engine", required=True)
    engines = ("validate", "fcs", "diffusion", "trajectories", "analytic")
    for name in engines:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="setup JSON file")
        p.add_argument("--t", type=float, default=1.0, help="time horizon")
        p.add_argument("--dt", type=float, default=None, help="integrator step")
        p.add_argument("--chi-max", type=float, default=None)
        p.add_argument("--chi-points", type=int, default=128)
        p.add_argument("--s-max", type=float, default=None)
        p.add_argument("--s-points", type=int, default=257)
        p.add_argument("--n", type=int, default=10000, help="trajectory count")
        p.add_argument("--aux", choices=("qubit", "oscillator"), default="qubit")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="output CSV path")
        if name == "trajectories":
            p.add_argument("--samples", default=None, help="per-trajectory sample CSV")
    p = sub.add_parser("compare")
    p.add_argument("file_a")
    p.add_argument("file_b")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.engine == "compare":
            metrics = compare(args.file_a, args.file_b)
            print(f"L1 distance: {metrics['l1']:.6e}")
            if "ks" in metrics:
                print(f"KS statistic: {metrics['ks']:.6f}")
            print(f"mean A: {metrics['mean_a']}  var A: {metrics['var_a']}")
            print(f"mean B: {metrics['mean_b']}  var B: {metrics['var_b']}")
            return 0
        config = RunConfig(
            setup_path=args.config,
            engine=args.engine,
            t=args.t,
            dt=args.dt,
            chi_max=args.chi_max,
            chi_points=args.chi_points,
            s_max=args.s_max,
            s_points=args.s_points,
            n_traj=args.n,
            aux=args.aux,
            seed=args.seed,
            out=args.out,
            samples=getattr(args, "samples", None),
        )
        return run(config)
    except ValidationFailed as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        if exc.report is not None:
            print(exc.report.summary(), file=sys.stderr)
        return 2
    except (ParseError, IncompatibleGrids) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalGuardError as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return 3
    except CwlmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
