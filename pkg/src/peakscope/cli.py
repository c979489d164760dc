"""Command-line front end.

Usage::

    peakscope [--jobs N] [--out DIR] solve --config F --at "z1,z2,..."
    peakscope [--jobs N] [--out DIR] scan-sigma --config F
    peakscope [--jobs N] [--out DIR] locate --config F
    peakscope [--jobs N] [--out DIR] check --config F --profile P [--at "z1,..."]

Points with a leading minus sign need the ``--at=-1,0,0`` spelling.

Exit codes: 0 success, 1 configuration error, 2 solver failure, 3 check
failure.  The configuration is a flat ``key = value`` file with ``#``
comments; expressions are quoted.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from .coeff_lang import CoefficientField, ParseError, PositivityError, parse
from .energy import (
    Coordinate,
    energy_breakdown,
    nehari_residual,
    pohozaev_residual,
    pucci_serrin_residual,
)
from .locator import certify, necessary_vector, report_to_json, scan_candidates
from .model import InvalidInputError, PowerSum, ProblemParams, validate_params
from .radial_ode import (
    FrozenCoefficients,
    NoGroundStateError,
    SolverFailure,
    fit_decay_rate,
    read_profile_csv,
    write_profile_csv,
)
from .sigma import ground_states, sigma_grad_fd, sigma_value

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 1, 2, 3

CHECK_TOLERANCES = {"pohozaev": 1e-5, "nehari": 1e-5, "decay": 0.02, "coordinate": 1e-4}

_KNOWN_KEYS = {
    "n", "p", "q", "theta", "nonlinearity", "alpha", "V", "K", "box", "grid_n",
    "seed", "output", "test_mode", "tol_N", "tol_grad", "tol_residual",
}


class ConfigError(ValueError):
    """A configuration problem tied to a key and a byte offset in the file."""

    def __init__(self, key: str, offset: int, message: str):
        super().__init__(f"config error in {key!r} at byte offset {offset}: {message}")
        self.key = key
        self.offset = offset


@dataclass(frozen=True)
class RunConfig:
    params: ProblemParams
    alpha: str
    V: str
    K: str
    box: tuple
    grid_n: int = 8
    tolerances: dict = field(default_factory=dict, hash=False, compare=False)
    output: str = "."
    seed: int = 0

    def coefficients(self) -> CoefficientField:
        return _field(self.alpha, self.V, self.K, self.params.n)


_FIELDS: dict = {}


def _field(alpha, V, K, n) -> CoefficientField:
    key = (alpha, V, K, n)
    if key not in _FIELDS:
        _FIELDS[key] = CoefficientField.from_strings(alpha, V, K, n)
    return _FIELDS[key]


def _read_pairs(raw: bytes):
    """Yield ``(key, value, value_offset)`` from ``key = value`` lines."""
    pos = 0
    for line in raw.split(b"\n"):
        start = pos
        pos += len(line) + 1
        body = line.split(b"#", 1)[0] if b'"' not in line else _strip_comment(line)
        if not body.strip():
            continue
        if b"=" not in body:
            raise ConfigError("?", start, "expected 'key = value'")
        key_raw, value_raw = body.split(b"=", 1)
        key = key_raw.strip().decode()
        lead = len(value_raw) - len(value_raw.lstrip())
        value = value_raw.strip()
        offset = start + len(key_raw) + 1 + lead
        if value.startswith(b'"'):
            if len(value) < 2 or not value.endswith(b'"'):
                raise ConfigError(key, offset, "unterminated quoted value")
            value = value[1:-1]
            offset += 1
        yield key, value.decode(), offset


def _strip_comment(line: bytes) -> bytes:
    quoted = False
    for i, ch in enumerate(line):
        if ch == ord('"'):
            quoted = not quoted
        elif ch == ord("#") and not quoted:
            return line[:i]
    return line


def _number(key, text, offset, kind=float):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(key, offset, f"not a valid {kind.__name__}: {text!r}") from None


def _pairs_list(key, text, offset):
    out = []
    for chunk in text.split(","):
        parts = chunk.split(":")
        if len(parts) != 2:
            raise ConfigError(key, offset, f"expected 'lo:hi' pairs, got {chunk.strip()!r}")
        out.append((_number(key, parts[0], offset), _number(key, parts[1], offset)))
    return out


def parse_config(text: str | bytes) -> RunConfig:
    """Parse configuration text into a :class:`RunConfig`."""
    raw = text.encode() if isinstance(text, str) else text
    entries: dict = {}
    for key, value, offset in _read_pairs(raw):
        if key not in _KNOWN_KEYS:
            raise ConfigError(key, offset, "unknown key")
        if key in entries:
            raise ConfigError(key, offset, "duplicate key")
        entries[key] = (value, offset)
    for key in ("n", "p", "q", "theta", "alpha", "V", "K"):
        if key not in entries:
            raise ConfigError(key, len(raw), "missing required key")

    def get(key, kind=float, default=None):
        if key not in entries:
            return default
        value, offset = entries[key]
        return _number(key, value, offset, kind)

    n = get("n", int)
    p, q, theta = get("p"), get("q"), get("theta")
    test_mode = entries.get("test_mode", ("false", 0))[0].strip().lower() in ("1", "true", "yes")
    nonlinearity = None
    if "nonlinearity" in entries:
        value, offset = entries["nonlinearity"]
        if value.strip().lower() not in ("", "pure"):
            nonlinearity = PowerSum(_pairs_list("nonlinearity", value, offset))
    try:
        params = ProblemParams(n, p, q, theta, nonlinearity, test_mode)
    except InvalidInputError as exc:
        raise ConfigError("n", entries["n"][1], str(exc)) from None
    problems = validate_params(params)
    if problems:
        raise ConfigError("p", entries["p"][1], "; ".join(problems))

    for key in ("alpha", "V", "K"):
        value, offset = entries[key]
        try:
            parse(value, n)
        except ParseError as exc:
            raise ConfigError(key, offset + exc.offset, exc.message) from None

    if "box" in entries:
        value, offset = entries["box"]
        box = _pairs_list("box", value, offset)
        if len(box) == 1:
            box = box * n
        if len(box) != n:
            raise ConfigError("box", offset, f"expected {n} axis ranges, got {len(box)}")
        if any(not lo < hi for lo, hi in box):
            raise ConfigError("box", offset, "every axis needs lo < hi")
    else:
        box = [(-1.0, 1.0)] * n
    grid_n = get("grid_n", int, 8)
    if grid_n < 2:
        raise ConfigError("grid_n", entries["grid_n"][1], "grid_n must be at least 2")
    tolerances = {k: get(k) for k in ("tol_N", "tol_grad", "tol_residual") if k in entries}
    return RunConfig(
        params=params,
        alpha=entries["alpha"][0],
        V=entries["V"][0],
        K=entries["K"][0],
        box=tuple(box),
        grid_n=grid_n,
        tolerances=tolerances,
        output=entries.get("output", (".", 0))[0],
        seed=get("seed", int, 0),
    )


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_bytes())


def _point(text: str, n: int) -> np.ndarray:
    try:
        z = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ConfigError("--at", 0, f"not a point: {text!r}") from None
    if z.size != n:
        raise ConfigError("--at", 0, f"point has {z.size} coordinates, expected {n}")
    return z


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _pool_map(fn, items, jobs: int):
    """Order-preserving map, in-process for ``jobs == 1``."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def _grid(box, grid_n):
    axes = [np.linspace(lo, hi, grid_n) for lo, hi in box]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(box))


def _sigma_task(config: RunConfig, z):
    coefficients = config.coefficients()
    try:
        s = sigma_value(coefficients, config.params, z)
        g = sigma_grad_fd(coefficients, config.params, z)
        return s, g, ""
    except (PositivityError, SolverFailure, NoGroundStateError, ArithmeticError) as exc:
        return None, None, str(exc).replace(",", ";").replace("\n", " ")


def _necessary_task(config: RunConfig, z):
    return necessary_vector(config.coefficients(), config.params, z)


def _out_dir(args, config: RunConfig) -> Path:
    out = Path(args.out if args.out is not None else config.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(config: RunConfig) -> int:
    env = os.environ.get("PEAKSCOPE_SEED")
    return int(env) if env not in (None, "") else config.seed


def cmd_solve(args, config: RunConfig) -> int:
    z = _point(args.at, config.params.n)
    coefficients = config.coefficients()
    values = coefficients.values(z)
    for name, value in zip(("alpha", "V", "K"), values):
        if not value > 0:
            print(f"error: coefficient {name} = {value:.6g} is not positive at z", file=sys.stderr)
            return EXIT_CONFIG
    frozen = FrozenCoefficients(*values)
    try:
        profile = ground_states(config.params).profile(frozen)
    except (SolverFailure, NoGroundStateError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    out = _out_dir(args, config)
    write_profile_csv(profile, out / "profile.csv")
    breakdown = energy_breakdown(profile, frozen)
    (out / "energy.json").write_text(breakdown.to_json() + "\n")
    return EXIT_OK


def cmd_scan_sigma(args, config: RunConfig) -> int:
    n = config.params.n
    points = _grid(config.box, config.grid_n)
    rows = _pool_map(partial(_sigma_task, config), points, args.jobs)
    out = _out_dir(args, config)
    header = [f"z{i + 1}" for i in range(n)] + ["sigma"] + [f"grad{i + 1}" for i in range(n)]
    with open(out / "sigma_scan.csv", "w", newline="\n") as fh:
        fh.write(",".join(header + ["error"]) + "\n")
        for z, (s, g, err) in zip(points, rows):
            if err:
                cells = [_fmt(v) for v in z] + [""] * (n + 1) + [err]
            else:
                cells = [_fmt(v) for v in z] + [_fmt(s)] + [_fmt(v) for v in g] + [""]
            fh.write(",".join(cells) + "\n")
    return EXIT_OK


def cmd_locate(args, config: RunConfig) -> int:
    coefficients = config.coefficients()
    seed = _seed(config)
    evaluate = partial(_pool_map, partial(_necessary_task, config), jobs=args.jobs)
    try:
        result = scan_candidates(
            coefficients,
            config.params,
            config.box,
            max(config.grid_n, 4),
            tol=config.tolerances.get("tol_N"),
            seed=seed,
            evaluate=evaluate,
        )
    except (SolverFailure, NoGroundStateError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    out = _out_dir(args, config)
    with open(out / "candidates.jsonl", "w", newline="\n") as fh:
        if result.degenerate:
            record = {"degenerate_landscape": True, "grid_scale": result.grid_scale}
            fh.write(json.dumps(record, sort_keys=True) + "\n")
        for report in result:
            certify(
                report,
                coefficients,
                config.params,
                grad_tol=config.tolerances.get("tol_grad", 1e-4),
                seed=seed,
            )
            fh.write(report_to_json(report) + "\n")
    return EXIT_OK


def run_checks(profile, frozen) -> dict:
    """Residual checks on a stored profile; ``verdict`` is pass, fail or trivial."""
    if not np.any(profile.w > 0):
        return {"verdict": "trivial", "pass": False}
    record: dict = {}
    try:
        record["pohozaev"] = float(pohozaev_residual(profile, frozen))
        record["nehari"] = float(
            nehari_residual(energy_breakdown(profile, frozen), profile.params, frozen)
        )
        fitted, predicted = fit_decay_rate(profile, frozen)
        record["decay"] = float(abs(fitted - predicted) / abs(predicted))
        radii = [profile.r_max * f for f in (0.25, 0.5, 0.75)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            coordinate = [
                float(pucci_serrin_residual(profile, frozen, Coordinate(1, R))) for R in radii
            ]
    except (SolverFailure, ValueError, ArithmeticError) as exc:
        return {"verdict": "fail", "pass": False, "error": str(exc)}
    record["coordinate"] = coordinate
    passes = {
        "pohozaev": record["pohozaev"] <= CHECK_TOLERANCES["pohozaev"],
        "nehari": record["nehari"] <= CHECK_TOLERANCES["nehari"],
        "decay": record["decay"] <= CHECK_TOLERANCES["decay"],
        "coordinate": bool(
            all(b <= a for a, b in zip(coordinate, coordinate[1:]))
            and coordinate[-1] <= CHECK_TOLERANCES["coordinate"]
        ),
    }
    record["checks"] = passes
    record["pass"] = all(passes.values())
    record["verdict"] = "pass" if record["pass"] else "fail"
    return record


def cmd_check(args, config: RunConfig) -> int:
    n = config.params.n
    z = _point(args.at, n) if args.at else np.zeros(n)
    values = config.coefficients().values(z)
    if any(not v > 0 for v in values):
        print("error: nonpositive coefficient at the check point", file=sys.stderr)
        return EXIT_CONFIG
    frozen = FrozenCoefficients(*values)
    try:
        profile = read_profile_csv(args.profile, config.params, frozen)
    except (OSError, ValueError) as exc:
        print(f"error: cannot read profile: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    record = run_checks(profile, frozen)
    out = _out_dir(args, config)
    (out / "check.json").write_text(json.dumps(record, sort_keys=True) + "\n")
    return EXIT_OK if record["pass"] else EXIT_CHECK


COMMANDS = {
    "solve": cmd_solve,
    "scan-sigma": cmd_scan_sigma,
    "locate": cmd_locate,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="peakscope", description=__doc__.split("\n")[0])
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True)
        if name == "solve":
            cmd.add_argument("--at", required=True)
        if name == "check":
            cmd.add_argument("--profile", required=True)
            cmd.add_argument("--at", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        return COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
