"""Search a coefficient landscape for weak-concentration candidates.

A candidate is a zero of the necessary-condition vector ``N(z)``.  At such a
point the gradients of alpha, V and K admit the vanishing combination with
weights ``(A, B/p, -Phi)``, so they are linearly dependent.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from .coeff_lang import CoefficientField, PositivityError
from .energy import energy_breakdown, nehari_residual, pohozaev_residual
from .model import ProblemParams
from .radial_ode import FrozenCoefficients, fit_decay_rate
from .sigma import (
    GroundStates,
    clarke_estimate,
    condition_vector,
    default_step,
    ground_states,
    sigma_grad_fd,
)

__all__ = [
    "CandidateReport",
    "ScanResult",
    "necessary_vector",
    "gram_rank",
    "scan_candidates",
    "certify",
    "report_to_json",
    "GRAM_TOL",
    "MAX_NEWTON_STEPS",
]

GRAM_TOL = 1e-8
MAX_NEWTON_STEPS = 30
POLISH_STEPS = 3
GRAD_TOL = 1e-4
RESIDUAL_TOL = 1e-5
DECAY_RTOL = 0.02


def necessary_vector(
    coefficients: CoefficientField, params: ProblemParams, z, states: GroundStates | None = None
) -> np.ndarray:
    """``N(z) = grad alpha A + grad V B / p - grad K Phi``.

    ``N(z) . w`` is the directional derivative returned by
    :func:`peakscope.sigma.gamma_pm`.
    """
    return condition_vector(coefficients, params, z, states)


def gram_rank(coefficients: CoefficientField, z, tol: float = GRAM_TOL) -> tuple[int, bool]:
    """Numerical rank of ``[grad alpha; grad V; grad K]`` and the dependence flag."""
    G = coefficients.gradients(z)
    sv = np.linalg.svd(G, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0, True
    rank = int(np.sum(sv > tol * sv[0]))
    return rank, rank <= 2


@dataclass
class CandidateReport:
    z: np.ndarray
    N: np.ndarray
    N_norm: float
    gram_rank: int
    lin_dep: bool
    grad_sigma_fd: np.ndarray
    in_C_set: bool
    refinement_trace: list = field(default_factory=list)
    refined: bool = True
    clarke_only: bool = False
    degenerate_directions: list = field(default_factory=list)
    certification: Optional[dict] = None

    def __post_init__(self):
        if self.in_C_set and not self.lin_dep:
            raise AssertionError("a point with N = 0 must have dependent gradients")
        if not 0 <= self.gram_rank <= 3:
            raise AssertionError("gram rank out of range")

    def to_dict(self) -> dict:
        out = {
            "z": [float(v) for v in self.z],
            "N": [float(v) for v in self.N],
            "N_norm": float(self.N_norm),
            "gram_rank": int(self.gram_rank),
            "lin_dep": bool(self.lin_dep),
            "grad_sigma_fd": [float(v) for v in self.grad_sigma_fd],
            "in_C_set": bool(self.in_C_set),
            "refinement_trace": [
                [[float(v) for v in point], float(norm)] for point, norm in self.refinement_trace
            ],
            "refined": bool(self.refined),
            "clarke_only": bool(self.clarke_only),
            "degenerate_directions": [[float(v) for v in d] for d in self.degenerate_directions],
        }
        if self.certification is not None:
            out["certification"] = self.certification
        return out


def report_to_json(report: CandidateReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True)


@dataclass
class ScanResult:
    """Candidates from a scan, or a flag when ``N`` vanishes on the grid."""

    candidates: list
    degenerate: bool
    grid_scale: float
    tol: float

    def __iter__(self):
        return iter(self.candidates)

    def __len__(self):
        return len(self.candidates)


def _grid_points(box, grid_n):
    axes = [np.linspace(lo, hi, grid_n) for lo, hi in box]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return mesh


def _local_minima(norms: np.ndarray) -> list[tuple]:
    """Grid indices whose value is <= every axis-and-diagonal neighbour."""
    seeds = []
    shape = norms.shape
    offsets = [o for o in np.ndindex(*(3,) * norms.ndim) if any(v != 1 for v in o)]
    for idx in np.ndindex(shape):
        value = norms[idx]
        if not np.isfinite(value):
            continue
        ok = True
        for o in offsets:
            nb = tuple(i + d - 1 for i, d in zip(idx, o))
            if any(j < 0 or j >= s for j, s in zip(nb, shape)):
                continue
            if norms[nb] < value:
                ok = False
                break
        if ok:
            seeds.append(idx)
    return seeds


def _sign_change_cells(values: np.ndarray) -> list[tuple]:
    """Cells (by lower corner index) where every component of ``N`` changes sign."""
    n_axes = values.ndim - 1
    shape = values.shape[:-1]
    corners = list(np.ndindex(*(2,) * n_axes))
    cells = []
    for idx in np.ndindex(*(s - 1 for s in shape)):
        block = np.array([values[tuple(i + c for i, c in zip(idx, corner))] for corner in corners])
        if np.all(block.min(axis=0) <= 0) and np.all(block.max(axis=0) >= 0):
            cells.append(idx)
    return cells


def _jacobian(fn, z, h):
    n = z.size
    J = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        J[:, i] = (fn(z + e) - fn(z - e)) / (2 * h)
    return J


def _refine(fn, z0, tol, box, max_steps=MAX_NEWTON_STEPS):
    """Damped Newton on ``fn`` with a finite-difference Jacobian.

    Newton steps are clipped to the box.  When a step cannot reduce ``|fn|``
    (typically a seed on a face with the Newton direction pointing outward)
    the search continues with a bounded trust-region least-squares solve.
    """
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    z = np.asarray(z0, dtype=float).copy()
    value = fn(z)
    norm = float(np.linalg.norm(value))
    trace = [(z.copy(), norm)]
    J = None
    for _ in range(max_steps):
        if norm <= tol:
            return (*_polish(fn, z, value, norm, trace, lo, hi), True, J)
        J = _jacobian(fn, z, default_step(z))
        delta = np.linalg.lstsq(J, -value, rcond=None)[0]
        damping = 1.0
        while damping > 1e-6:
            trial = np.clip(z + damping * delta, lo, hi)
            try:
                trial_value = fn(trial)
            except PositivityError:
                damping *= 0.5
                continue
            trial_norm = float(np.linalg.norm(trial_value))
            if trial_norm < norm:
                break
            damping *= 0.5
        else:
            break
        z, value, norm = trial, trial_value, trial_norm
        trace.append((z.copy(), norm))
    if norm <= tol:
        return (*_polish(fn, z, value, norm, trace, lo, hi), True, J)
    return _trust_region(fn, z, value, norm, tol, lo, hi, trace, J)


def _polish(fn, z, value, norm, trace, lo, hi, steps=POLISH_STEPS):
    """Extra Newton steps past the tolerance, kept only while ``|fn|`` drops."""
    for _ in range(steps):
        J = _jacobian(fn, z, default_step(z))
        trial = np.clip(z + np.linalg.lstsq(J, -value, rcond=None)[0], lo, hi)
        try:
            trial_value = fn(trial)
        except PositivityError:
            break
        trial_norm = float(np.linalg.norm(trial_value))
        if not trial_norm < 0.5 * norm:
            break
        z, value, norm = trial, trial_value, trial_norm
        trace.append((z.copy(), norm))
    return z, value, trace


def _trust_region(fn, z, value, norm, tol, lo, hi, trace, J):
    try:
        result = least_squares(
            fn,
            z,
            jac=lambda x: _jacobian(fn, x, default_step(x)),
            bounds=(lo, hi),
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
            max_nfev=10 * MAX_NEWTON_STEPS,
        )
    except PositivityError:
        return z, value, trace, False, J
    new_norm = float(np.linalg.norm(result.fun))
    if new_norm < norm:
        z, value, norm = result.x, fn(result.x), new_norm
        trace.append((z.copy(), norm))
        J = result.jac
    if norm <= tol:
        z, value, trace = _polish(fn, z, value, norm, trace, lo, hi)
        return z, value, trace, True, J
    return z, value, trace, False, J


def _null_directions(J, scale):
    if J is None:
        return []
    _, sv, vt = np.linalg.svd(J)
    if sv[0] == 0.0:
        return [row for row in np.eye(J.shape[1])]
    return [vt[i] for i in range(len(sv)) if sv[i] <= 1e-6 * max(sv[0], scale)]


def scan_candidates(
    coefficients: CoefficientField,
    params: ProblemParams,
    box,
    grid_n: int,
    tol: float | None = None,
    states: GroundStates | None = None,
    seed: int = 0,
    evaluate=None,
) -> ScanResult:
    """Grid scan of ``|N|`` followed by Newton refinement from local minima.

    ``tol`` defaults to ``1e-6`` times the largest ``|N|`` on the grid.  When
    the grid median of ``|N|`` is already below ``tol`` the landscape is
    flagged degenerate and no candidates are returned.  ``evaluate`` maps the
    grid points to ``N`` values (used for parallel scans); it must preserve
    order.
    """
    if grid_n < 4:
        raise ValueError("grid_n must be at least 4")
    box = [(float(lo), float(hi)) for lo, hi in box]
    if any(not hi > lo for lo, hi in box):
        raise ValueError("box must be nondegenerate on every axis")
    states = ground_states(params) if states is None else states
    n = coefficients.n

    def N_at(x):
        return necessary_vector(coefficients, params, x, states)

    mesh = _grid_points(box, grid_n)
    flat = mesh.reshape(-1, n)
    if evaluate is None:
        values = [N_at(x) for x in flat]
    else:
        values = list(evaluate(flat))
    norms = np.array([np.linalg.norm(v) for v in values]).reshape(mesh.shape[:-1])
    scale = float(np.max(norms))
    tol = 1e-6 * scale if tol is None else tol
    if scale == 0.0 or np.median(norms) <= tol:
        return ScanResult([], True, scale, tol)

    spacing = min(hi - lo for lo, hi in box) / (grid_n - 1)
    merge_radius = 0.5 * spacing
    # seeds: grid minima of |N|, then centres of cells where N changes sign
    seeds = [mesh[idx] for idx in sorted(_local_minima(norms))]
    N_grid = np.asarray(values, dtype=float).reshape(mesh.shape)
    for idx in _sign_change_cells(N_grid):
        lower = mesh[idx]
        upper = mesh[tuple(i + 1 for i in idx)]
        seeds.append(0.5 * (lower + upper))
    found: list[CandidateReport] = []
    for seed_point in seeds:
        if any(_near(rep, seed_point, merge_radius) for rep in found):
            continue
        z, value, trace, converged, J = _refine(N_at, seed_point, tol, box)
        if not converged:
            continue
        if J is None:
            J = _jacobian(N_at, z, default_step(z))
        duplicate = False
        for rep in found:
            if np.linalg.norm(rep.z - z) <= merge_radius:
                duplicate = True
                break
        if duplicate:
            continue
        found.append(_report(coefficients, params, z, value, trace, tol, states, J, scale, seed))

    # points connected along a null direction of the Jacobian are one candidate set
    merged: list[CandidateReport] = []
    for rep in found:
        same = False
        for kept in merged:
            for d in kept.degenerate_directions:
                diff = rep.z - kept.z
                if np.linalg.norm(diff - (diff @ d) * d) <= merge_radius:
                    same = True
        if not same:
            merged.append(rep)
    return ScanResult(merged, False, scale, tol)


def _near(rep, point, radius) -> bool:
    """Within ``radius`` of the candidate or of its degenerate directions."""
    diff = point - rep.z
    for d in rep.degenerate_directions:
        diff = diff - (diff @ d) * d
    return bool(np.linalg.norm(diff) <= radius)


def _report(coefficients, params, z, value, trace, tol, states, J, scale, seed):
    rank, dep = gram_rank(coefficients, z)
    norm = float(np.linalg.norm(value))
    clarke_only = coefficients.nonsmooth_at(z)
    grad = sigma_grad_fd(coefficients, params, z, states=states)
    in_set = norm <= tol and dep
    return CandidateReport(
        z=np.asarray(z, dtype=float),
        N=np.asarray(value, dtype=float),
        N_norm=norm,
        gram_rank=rank,
        lin_dep=dep,
        grad_sigma_fd=grad,
        in_C_set=bool(in_set),
        refinement_trace=trace,
        refined=True,
        clarke_only=clarke_only,
        degenerate_directions=_null_directions(J, scale),
    )


def certify(
    report: CandidateReport,
    coefficients: CoefficientField,
    params: ProblemParams,
    states: GroundStates | None = None,
    grad_tol: float = GRAD_TOL,
    seed: int = 0,
    clarke_radius: float | None = None,
) -> dict:
    """Re-check a candidate; returns ``{check: {"value": ..., "pass": bool}}``.

    Failures are recorded rather than raised.
    """
    states = ground_states(params) if states is None else states
    z = np.asarray(report.z, dtype=float)
    checks: dict = {}
    try:
        values = coefficients.values(z)
        frozen = FrozenCoefficients(*values)
        profile = states.profile(frozen)
        poho = pohozaev_residual(profile, frozen)
        nehari = nehari_residual(energy_breakdown(profile, frozen), params, frozen)
        fitted, predicted = fit_decay_rate(profile, frozen)
        decay = abs(fitted - predicted) / abs(predicted)
        checks["pohozaev"] = {"value": float(poho), "pass": bool(poho <= RESIDUAL_TOL)}
        checks["nehari"] = {"value": float(nehari), "pass": bool(nehari <= RESIDUAL_TOL)}
        checks["decay"] = {"value": float(decay), "pass": bool(decay <= DECAY_RTOL)}
    except Exception as exc:  # recorded, not thrown
        checks["ground_state"] = {"value": str(exc), "pass": False}
    rank, dep = gram_rank(coefficients, z)
    checks["lin_dep"] = {"value": int(rank), "pass": bool(dep)}
    try:
        grad = sigma_grad_fd(coefficients, params, z, states=states)
        gnorm = float(np.linalg.norm(grad))
        checks["grad_sigma"] = {"value": gnorm, "pass": bool(gnorm <= grad_tol)}
        radius = default_step(z) * 10 if clarke_radius is None else clarke_radius
        est = clarke_estimate(
            coefficients, params, z, radius, 2 * z.size + 1, seed=seed, states=states
        )
        min_norm = float(np.linalg.norm(est.min_norm_point))
        checks["clarke"] = {
            "value": min_norm,
            "pass": bool(est.contains_zero or min_norm <= grad_tol),
        }
    except Exception as exc:
        checks["grad_sigma"] = {"value": str(exc), "pass": False}
    checks["all_pass"] = all(c["pass"] for c in checks.values())
    report.certification = checks
    return checks
