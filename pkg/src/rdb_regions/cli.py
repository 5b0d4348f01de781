"""Command-line entry point: ``rdb-regions <subcommand> INSTANCE [options]``.

Records go to standard output (or ``--out``); wall time and warnings go
to standard error so the record itself is reproducible byte for byte.
Exit codes: 0 positive verdict, 1 negative verdict, 2 input error,
3 unwritable output.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .gaussian import (
    DistortionPair,
    GaussianInputError,
    GaussianProblem,
    compare,
    crossover_interval,
    sweep_curve,
    write_sweep_csv,
)
from .info import JointDist, Kernel, ValidationError
from .regions import (
    DiscreteInstance,
    PreconditionError,
    RdbQuadruple,
    Status,
    det_distortion_region_certify,
    hamming,
    inner_bound_certify,
    outer_bound_exclude,
    single_receiver_necessary,
    ts_det_region,
    ts_region_certify,
)
from .search import SearchBudget, capacity

ROW_TOL = 1e-9
EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_OUTPUT = 0, 1, 2, 3


class InputError(ValueError):
    pass


class OutputError(OSError):
    pass


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


# ---------------------------------------------------------------- instance files

def _matrix(data, rows: int, cols: int, name: str) -> np.ndarray:
    try:
        m = np.asarray(data, dtype=float)
    except (TypeError, ValueError):
        raise InputError(f"{name} must be numeric") from None
    if m.size != rows * cols:
        raise InputError(f"{name} needs {rows}x{cols} entries, got {m.size}")
    return m.reshape(rows, cols)


def _stochastic(data, rows: int, cols: int, name: str, whole: bool = False) -> np.ndarray:
    """Validate row sums (or the total when ``whole``) to ROW_TOL and renormalize."""
    m = _matrix(data, rows, cols, name)
    if not np.all(np.isfinite(m)) or np.any(m < 0):
        raise InputError(f"{name} must contain finite nonnegative probabilities")
    sums = np.array([m.sum()]) if whole else m.sum(axis=1)
    dev = np.abs(sums - 1.0).max()
    if dev > ROW_TOL:
        raise InputError(f"{name} sums deviate from 1 by {dev:.3g} (tolerance {ROW_TOL:g})")
    if dev > 1e-12:
        _warn(f"{name} renormalized (sum deviation {dev:.3g})")
    return m / (m.sum() if whole else sums[:, None])


def _alphabet(alpha: dict, key: str, default=None) -> int:
    v = alpha.get(key, default)
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise InputError(f"alphabets.{key} must be a positive integer")
    return v


def parse_instance(raw: dict):
    """Return ('gaussian', GaussianProblem, {}) or ('discrete', DiscreteInstance, extras)."""
    if not isinstance(raw, dict):
        raise InputError("instance file must hold a JSON object")
    kind = raw.get("kind")
    if kind == "gaussian":
        try:
            p = GaussianProblem(
                float(raw["sigma_s2"]), float(raw["sigma_1_2"]), float(raw["sigma_2_2"]),
                power=None if raw.get("power") is None else float(raw["power"]),
                rho=float(raw.get("rho", 1.0)),
                allow_power_mismatch=bool(raw.get("allow_power_mismatch", False)),
            )
        except KeyError as exc:
            raise InputError(f"gaussian instance is missing {exc.args[0]!r}") from None
        return "gaussian", p, {}
    if kind != "discrete":
        raise InputError("kind must be 'gaussian' or 'discrete'")
    alpha = raw.get("alphabets")
    if not isinstance(alpha, dict):
        raise InputError("discrete instance needs an 'alphabets' object")
    ns, nt, nx, ny, nz = (_alphabet(alpha, k) for k in ("S", "T", "X", "Y", "Z"))
    na = _alphabet(alpha, "S_hat1", ns)
    nb = _alphabet(alpha, "S_hat2", ns)
    for key in ("p_st", "p_y_given_x", "p_z_given_y"):
        if key not in raw:
            raise InputError(f"discrete instance is missing {key!r}")
    p_st = _stochastic(raw["p_st"], ns, nt, "p_st", whole=True)
    py = _stochastic(raw["p_y_given_x"], nx, ny, "p_y_given_x")
    pz = _stochastic(raw["p_z_given_y"], ny, nz, "p_z_given_y")

    def dist(key, n):
        if raw.get(key) is None:
            if n != ns:
                raise InputError(f"{key} is required when the reconstruction alphabet differs from S")
            return hamming(ns)
        return _matrix(raw[key], ns, n, key)

    inst = DiscreteInstance(JointDist(p_st, ("S", "T")), Kernel(py), Kernel(pz), dist("d1", na), dist("d2", nb))
    extras = {}
    if raw.get("psi") is not None:
        psi = raw["psi"]
        if (not isinstance(psi, list) or len(psi) != ns
                or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in psi)):
            raise InputError("psi must list one nonnegative integer per source symbol")
        extras["psi"] = psi
    budget = raw.get("budget") or {}
    if not isinstance(budget, dict):
        raise InputError("budget must be an object")
    allowed = {"grid_resolution", "random_restarts", "refine_iterations", "seed", "time_limit"}
    unknown = set(budget) - allowed
    if unknown:
        raise InputError(f"unknown budget keys: {sorted(unknown)}")
    extras["budget"] = budget
    return "discrete", inst, extras


def load_instance(path: str):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read instance file: {exc}") from None
    try:
        raw = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"instance file is not valid JSON: {exc}") from None
    kind, obj, extras = parse_instance(raw)
    return kind, obj, extras, hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------- records

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _render(record: dict, as_json: bool) -> str:
    record = _clean(record)
    if as_json:
        return json.dumps(record, sort_keys=True, indent=2) + "\n"
    lines = []

    def walk(prefix, val):
        if isinstance(val, dict):
            for k in sorted(val):
                walk(f"{prefix}.{k}" if prefix else k, val[k])
        elif isinstance(val, list) and val and isinstance(val[0], (list, dict)):
            lines.append(f"{prefix}: {json.dumps(val)}")
        else:
            lines.append(f"{prefix}: {json.dumps(val) if isinstance(val, list) else val}")

    walk("", record)
    return "\n".join(lines) + "\n"


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise OutputError(f"cannot write {out}: {exc}") from None


# ---------------------------------------------------------------- commands

def _budget(args, extras) -> SearchBudget:
    b = SearchBudget(**extras.get("budget", {}))
    return b.replace(grid_resolution=args.budget_resolution, random_restarts=args.restarts, seed=args.seed)


def _need(kind, want):
    if kind != want:
        raise InputError(f"this command needs a {want} instance, got {kind}")


def _quad(args) -> RdbQuadruple:
    return RdbQuadruple(args.rate, args.d1, args.d2, args.rho)


def _verdict_result(v) -> tuple:
    code = EXIT_OK if v.status.positive else EXIT_NEGATIVE
    return v.to_dict(), code


def cmd_gaussian_compare(args, kind, obj, extras):
    _need(kind, "gaussian")
    d = DistortionPair(args.d1, args.d2)
    d.check(obj)
    c = compare(obj, d)
    res = {
        "d1": c.d1, "d2": c.d2, "r_uncoded": c.r_uncoded, "r_separation": c.r_separation,
        "uncoded_regime": str(c.uncoded_regime), "alpha_star": c.separation_alpha, "winner": str(c.winner),
        "equal_power": c.equal_power,
    }
    return res, EXIT_OK


PLOT_TEMPLATE = """# gnuplot script for {csv}
set datafile separator ','
set key autotitle columnhead
set xlabel 'D2'
set ylabel 'rate (bits)'
set title 'Uncoded vs separation at D1 = {d1}'
plot '{csv}' using 1:2 with lines title 'uncoded', \\
     '{csv}' using 1:3 with lines title 'separation'
"""


def cmd_gaussian_sweep(args, kind, obj, extras):
    _need(kind, "gaussian")
    if args.steps < 1:
        raise InputError("--steps must be >= 1")
    if not 0 < args.d2_min <= args.d2_max <= args.d1:
        raise InputError("need 0 < d2-min <= d2-max <= d1")
    DistortionPair(args.d1, args.d2_min).check(obj)
    grid = [args.d2_min] if args.steps == 1 else list(np.linspace(args.d2_min, args.d2_max, args.steps))
    rows = sweep_curve(obj, args.d1, grid)
    csv_path = Path(args.csv)
    plot_path = csv_path.with_suffix(".gp")
    try:
        with open(csv_path, "w", newline="") as fh:
            write_sweep_csv(rows, fh)
        plot_path.write_text(PLOT_TEMPLATE.format(csv=csv_path.name, d1=args.d1))
    except OSError as exc:
        raise OutputError(f"cannot write sweep output: {exc}") from None
    flips = [rows[i + 1].d2 for i in range(len(rows) - 1) if rows[i].winner != rows[i + 1].winner]
    interval = crossover_interval(obj, args.d1) if obj.equal_power else None
    res = {"rows": len(rows), "csv": csv_path.name, "plot_script": plot_path.name,
           "winner_changes_at": flips, "crossover_interval": interval}
    return res, EXIT_OK


def cmd_inner(args, kind, obj, extras):
    _need(kind, "discrete")
    return _verdict_result(inner_bound_certify(obj, _quad(args), _budget(args, extras)))


def cmd_outer(args, kind, obj, extras):
    _need(kind, "discrete")
    return _verdict_result(outer_bound_exclude(obj, _quad(args), _budget(args, extras)))


def cmd_cor1(args, kind, obj, extras):
    _need(kind, "discrete")
    return _verdict_result(ts_region_certify(obj, _quad(args), _budget(args, extras)))


def _psi(extras):
    if "psi" not in extras:
        raise InputError("this command needs 'psi' in the instance file")
    return extras["psi"]


def cmd_cor2(args, kind, obj, extras):
    _need(kind, "discrete")
    q = RdbQuadruple(args.rate, 0.0, 0.0, args.rho)
    return _verdict_result(det_distortion_region_certify(obj, _psi(extras), q, _budget(args, extras)))


def cmd_cor3(args, kind, obj, extras):
    _need(kind, "discrete")
    b = _budget(args, extras)
    rate = ts_det_region(obj, _psi(extras), args.d2, args.rho, b.grid_resolution)
    return {"minimal_rate": rate, "d2": args.d2, "rho": args.rho}, EXIT_OK


def cmd_single(args, kind, obj, extras):
    _need(kind, "discrete")
    cap = capacity(obj.p_y_given_x)
    v = single_receiver_necessary(obj.p_st, args.rate, args.distortion, args.rho, cap, obj.d1_matrix,
                                  _budget(args, extras))
    res, code = _verdict_result(v)
    res["capacity"] = cap
    return res, code


# ---------------------------------------------------------------- parser

def _nonneg(text):
    v = float(text)
    if not (math.isfinite(v) and v >= 0):
        raise argparse.ArgumentTypeError(f"expected a finite nonnegative number, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("instance", help="instance JSON file")
    common.add_argument("--seed", type=int, default=None, help="search seed (overrides the instance budget)")
    common.add_argument("--budget-resolution", type=int, default=None, help="grid resolution override")
    common.add_argument("--restarts", type=int, default=None, help="random restart count override")
    common.add_argument("--out", default=None, help="write the record here instead of stdout")
    common.add_argument("--json", action="store_true", help="emit the record as JSON")

    parser = argparse.ArgumentParser(prog="rdb-regions", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gaussian-compare", parents=[common], help="uncoded vs separation rates")
    p.add_argument("--d1", type=float, required=True)
    p.add_argument("--d2", type=float, required=True)
    p.set_defaults(func=cmd_gaussian_compare)

    p = sub.add_parser("gaussian-sweep", parents=[common], help="CSV sweep over d2 plus a plot script")
    p.add_argument("--d1", type=float, required=True)
    p.add_argument("--d2-min", type=float, required=True)
    p.add_argument("--d2-max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--csv", required=True, help="CSV output path; the plot script goes next to it")
    p.set_defaults(func=cmd_gaussian_sweep)

    for name, func, helptext in (
        ("inner-check", cmd_inner, "certify membership in the inner bound"),
        ("outer-check", cmd_outer, "heuristic exclusion through the outer bound"),
        ("cor1-check", cmd_cor1, "T = S separation region membership"),
    ):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--rate", type=_nonneg, required=True)
        p.add_argument("--d1", type=_nonneg, required=True)
        p.add_argument("--d2", type=_nonneg, required=True)
        p.add_argument("--rho", type=_nonneg, required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("cor2-check", parents=[common], help="lossless psi(S) at the weak receiver")
    p.add_argument("--rate", type=_nonneg, required=True)
    p.add_argument("--rho", type=_nonneg, required=True)
    p.set_defaults(func=cmd_cor2)

    p = sub.add_parser("cor3-rate", parents=[common], help="minimal rate for T = S with lossless psi(S)")
    p.add_argument("--d2", type=_nonneg, required=True)
    p.add_argument("--rho", type=_nonneg, required=True)
    p.set_defaults(func=cmd_cor3)

    p = sub.add_parser("single-receiver-check", parents=[common], help="single-receiver necessary condition")
    p.add_argument("--rate", type=_nonneg, required=True)
    p.add_argument("--distortion", type=_nonneg, required=True)
    p.add_argument("--rho", type=_nonneg, required=True)
    p.set_defaults(func=cmd_single)
    return parser


def _check_threads() -> None:
    raw = os.environ.get("RDB_REGIONS_THREADS")
    if raw is None:
        return
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise InputError("RDB_REGIONS_THREADS must be a positive integer")


def _echo(args) -> dict:
    skip = {"func", "out", "json", "instance"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        _check_threads()
        kind, obj, extras, digest = load_instance(args.instance)
        result, code = args.func(args, kind, obj, extras)
        record = {
            "tool": "rdb-regions",
            "version": __version__,
            "command": _echo(args),
            "input_sha256": digest,
            "seed": args.seed if args.seed is not None else extras.get("budget", {}).get("seed", 0),
            "result": result,
        }
        _emit(_render(record, args.json), args.out)
    except (InputError, ValidationError, GaussianInputError, PreconditionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    print(f"wall_time_s: {time.perf_counter() - start:.3f}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
