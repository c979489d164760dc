"""The ground-state function and its (generalized) derivatives.

``Sigma(z)`` is the least energy of the problem with coefficients frozen at
``z``.  On the unique-ground-state branch its gradient is the necessary
condition vector::

    N(z) = grad alpha(z) A + grad V(z) B / p - grad K(z) Phi

with ``(A, B, Phi)`` the integrals of the ground state at ``z``.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .coeff_lang import CoefficientField, PositivityError
from .energy import EnergyBreakdown, energy_breakdown
from .model import ProblemParams, PurePower
from .radial_ode import (
    CANONICAL,
    FrozenCoefficients,
    RadialProfile,
    scaling_factors,
    shoot_canonical,
    shoot_frozen,
    solve_frozen,
)

__all__ = [
    "GroundStates",
    "ground_states",
    "SigmaSample",
    "ClarkeEstimate",
    "sigma_closed_form",
    "sigma_value",
    "sigma_at",
    "sigma_grad_fd",
    "condition_vector",
    "gamma_pm",
    "min_norm_point",
    "clarke_estimate",
    "sigma_lipschitz_probe",
    "default_step",
]

CLOSED_FORM_RTOL = 1e-8
RICHARDSON_TRIGGER = 1e-4
CACHE_DIGITS = 12


def _cache_key(frozen: FrozenCoefficients):
    return tuple(float(f"{x:.{CACHE_DIGITS}g}") for x in frozen.as_tuple())


class GroundStates:
    """Ground states of one problem, keyed by frozen coefficients.

    Pure powers shoot once and scale; power sums shoot per frozen triple and
    cache the result.  Safe to share between threads.
    """

    def __init__(self, params: ProblemParams, canonical: RadialProfile | None = None):
        self.params = params
        self._canonical = canonical
        self._canonical_breakdown: EnergyBreakdown | None = None
        self._cache: dict = {}
        self._lock = threading.Lock()

    @property
    def pure(self) -> bool:
        return isinstance(self.params.nonlinearity, PurePower)

    @property
    def canonical(self) -> RadialProfile:
        if self._canonical is None:
            with self._lock:
                if self._canonical is None:
                    self._canonical = shoot_canonical(self.params)
        return self._canonical

    @property
    def canonical_breakdown(self) -> EnergyBreakdown:
        if self._canonical_breakdown is None:
            self._canonical_breakdown = energy_breakdown(self.canonical, CANONICAL)
        return self._canonical_breakdown

    def profile(self, frozen: FrozenCoefficients) -> RadialProfile:
        if self.pure:
            return solve_frozen(self.canonical, frozen)
        key = _cache_key(frozen)
        cached = self._cache.get(key)
        if cached is None:
            solved = shoot_frozen(self.params, FrozenCoefficients(*key))
            with self._lock:
                cached = self._cache.setdefault(key, (solved, energy_breakdown(solved)))
        return cached[0]

    def breakdown(self, frozen: FrozenCoefficients) -> EnergyBreakdown:
        if self.pure:
            gamma, lam = scaling_factors(self.params, frozen)
            return self.canonical_breakdown.scaled(self.params, frozen, gamma, lam)
        self.profile(frozen)
        return self._cache[_cache_key(frozen)][1]

    def sigma(self, frozen: FrozenCoefficients) -> float:
        return self.breakdown(frozen).I_value


_REGISTRY: dict = {}
_REGISTRY_LOCK = threading.Lock()


def ground_states(params: ProblemParams) -> GroundStates:
    """Process-wide :class:`GroundStates` for ``params``."""
    with _REGISTRY_LOCK:
        states = _REGISTRY.get(params)
        if states is None:
            states = _REGISTRY[params] = GroundStates(params)
    return states


def sigma_closed_form(params: ProblemParams, frozen: FrozenCoefficients, canonical: EnergyBreakdown):
    """Scaling formula for a pure power.

    ``a g^p l^{n-p} A_w + (V/p) g^p l^n B_w - (K/q) g^q l^n C_w`` with
    ``g = (V/K)^{1/(q-p)}`` and ``l = (a/V)^{1/p}``.
    """
    n, p, q = params.n, params.p, params.q
    g, lam = scaling_factors(params, frozen)
    return (
        frozen.a * g**p * lam ** (n - p) * canonical.A
        + frozen.V / p * g**p * lam**n * canonical.B
        - frozen.K / q * g**q * lam**n * canonical.C
    )


def _frozen_at(coefficients: CoefficientField, z) -> FrozenCoefficients:
    z = np.asarray(z, dtype=float)
    values = coefficients.values(z)
    for name, value in zip(("alpha", "V", "K"), values):
        if not value > 0:
            raise PositivityError(name, value, z)
    return FrozenCoefficients(*values)


def sigma_value(coefficients: CoefficientField, params: ProblemParams, z, states=None) -> float:
    """``Sigma(z)``; raises :class:`PositivityError` at rejected points."""
    states = ground_states(params) if states is None else states
    return states.sigma(_frozen_at(coefficients, z))


@dataclass
class SigmaSample:
    z: np.ndarray
    sigma: float
    grad_fd: Optional[np.ndarray]
    frozen: FrozenCoefficients
    ground_energy: EnergyBreakdown


def sigma_at(
    coefficients: CoefficientField,
    params: ProblemParams,
    z,
    states: GroundStates | None = None,
    with_gradient: bool = True,
) -> SigmaSample:
    """Freeze the coefficients at ``z`` and return the ground-state energy.

    The energy comes from quadrature of the ground-state profile at ``z``;
    for a pure power the scaling formula is evaluated as well and the two
    must agree to 1e-8 relative.
    """
    states = ground_states(params) if states is None else states
    z = np.asarray(z, dtype=float)
    frozen = _frozen_at(coefficients, z)
    profile = states.profile(frozen)
    breakdown = energy_breakdown(profile, frozen)
    sigma = breakdown.I_value
    if states.pure:
        closed = sigma_closed_form(params, frozen, states.canonical_breakdown)
        if abs(closed - sigma) > CLOSED_FORM_RTOL * abs(closed):
            raise AssertionError(
                f"closed-form Sigma {closed!r} disagrees with quadrature {sigma!r}"
            )
    grad = sigma_grad_fd(coefficients, params, z, states=states) if with_gradient else None
    return SigmaSample(z=z, sigma=sigma, grad_fd=grad, frozen=frozen, ground_energy=breakdown)


def default_step(z) -> float:
    return 1e-4 * (1.0 + float(np.linalg.norm(z)))


def _central(fn, z, h):
    grad = np.empty(z.size)
    for i in range(z.size):
        e = np.zeros(z.size)
        e[i] = h
        grad[i] = (fn(z + e) - fn(z - e)) / (2 * h)
    return grad


def sigma_grad_fd(
    coefficients: CoefficientField | None,
    params: ProblemParams | None,
    z,
    step: float | None = None,
    states: GroundStates | None = None,
    sigma_fn: Callable | None = None,
) -> np.ndarray:
    """Central-difference gradient of ``Sigma``.

    Two step sizes are compared; when they differ by more than 1e-4 relative
    the Richardson combination is returned.  ``sigma_fn`` replaces ``Sigma``
    by an arbitrary function of ``z`` (test seam).
    """
    z = np.asarray(z, dtype=float)
    if sigma_fn is None:
        states = ground_states(params) if states is None else states

        def sigma_fn(x):
            return sigma_value(coefficients, params, x, states)

    h = default_step(z) if step is None else step
    try:
        coarse = _central(sigma_fn, z, h)
        fine = _central(sigma_fn, z, h / 2)
    except PositivityError:
        h /= 10.0
        coarse = _central(sigma_fn, z, h)
        fine = _central(sigma_fn, z, h / 2)
    scale = max(np.max(np.abs(fine)), np.finfo(float).tiny)
    if np.max(np.abs(coarse - fine)) > RICHARDSON_TRIGGER * scale:
        return (4.0 * fine - coarse) / 3.0
    return fine


def condition_vector(
    coefficients: CoefficientField, params: ProblemParams, z, states: GroundStates | None = None
) -> np.ndarray:
    """``N(z) = grad alpha A + grad V B / p - grad K Phi``."""
    states = ground_states(params) if states is None else states
    frozen = _frozen_at(coefficients, z)
    b = states.breakdown(frozen)
    g_alpha, g_V, g_K = coefficients.gradients(z)
    return g_alpha * b.A + g_V * b.B / params.p - g_K * b.Phi


def gamma_pm(
    coefficients: CoefficientField,
    params: ProblemParams,
    z,
    w,
    states: GroundStates | None = None,
) -> tuple[float, float]:
    """``(Gamma^-(z; w), Gamma^+(z; w))`` on the ground-state branch.

    The sup and inf run over a single bound state here, so both components
    carry the same value.  For ``p > 2`` uniqueness of the ground state is
    not known and the value is that of the computed branch only.
    """
    w = np.asarray(w, dtype=float)
    if abs(np.linalg.norm(w) - 1.0) > 1e-9:
        raise ValueError("direction w must be a unit vector")
    value = float(condition_vector(coefficients, params, z, states) @ w)
    return value, value


def min_norm_point(points, tol: float = 1e-12, max_iter: int = 1000):
    """Minimum-norm point of the convex hull of ``points`` (Wolfe's method).

    Returns ``(x, weights)`` with ``weights >= 0`` summing to one and
    ``x = weights @ points``.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    m = P.shape[0]
    scale = max(np.max(np.sum(P * P, axis=1)), np.finfo(float).tiny)
    start = int(np.argmin(np.sum(P * P, axis=1)))
    S = [start]
    lam = np.array([1.0])
    x = P[start].copy()
    for _ in range(max_iter):
        j = int(np.argmin(P @ x))
        if x @ x - P[j] @ x <= tol * scale or j in S:
            break
        S.append(j)
        lam = np.append(lam, 0.0)
        while True:
            Q = P[S]
            k = len(S)
            kkt = np.zeros((k + 1, k + 1))
            kkt[:k, :k] = Q @ Q.T
            kkt[:k, k] = 1.0
            kkt[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            mu = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:k]
            if np.all(mu > 1e-14):
                lam = mu
                break
            shrinking = mu < lam
            ratios = np.where(shrinking, lam / np.where(shrinking, lam - mu, 1.0), np.inf)
            ratios[mu > 1e-14] = np.inf
            theta = min(1.0, float(np.min(ratios)))
            lam = (1 - theta) * lam + theta * mu
            keep = lam > 1e-14
            if not np.any(keep):
                keep[np.argmax(lam)] = True
            S = [s for s, kept in zip(S, keep) if kept]
            lam = lam[keep]
            lam = lam / lam.sum()
        x = lam @ P[S]
    weights = np.zeros(m)
    weights[S] = lam
    return weights @ P, weights


@dataclass
class ClarkeEstimate:
    center: np.ndarray
    sample_points: np.ndarray
    sample_gradients: np.ndarray
    min_norm_point: np.ndarray
    weights: np.ndarray
    contains_zero: bool
    tolerance: float
    degenerate: bool = False
    extra: dict = field(default_factory=dict)

    def negated(self) -> "ClarkeEstimate":
        """Estimate for ``-Sigma``: the generalized gradient flips sign."""
        return ClarkeEstimate(
            center=self.center,
            sample_points=self.sample_points,
            sample_gradients=-self.sample_gradients,
            min_norm_point=-self.min_norm_point,
            weights=self.weights,
            contains_zero=self.contains_zero,
            tolerance=self.tolerance,
            degenerate=self.degenerate,
        )

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "min_norm_point": self.min_norm_point.tolist(),
            "min_norm": float(np.linalg.norm(self.min_norm_point)),
            "contains_zero": bool(self.contains_zero),
            "tolerance": self.tolerance,
            "degenerate": self.degenerate,
            "sample_points": self.sample_points.tolist(),
            "sample_gradients": self.sample_gradients.tolist(),
            "weights": self.weights.tolist(),
        }


def clarke_estimate(
    coefficients: CoefficientField | None,
    params: ProblemParams | None,
    z,
    radius: float,
    sample_count: int,
    seed: int = 0,
    sigma_fn: Callable | None = None,
    step: float | None = None,
    states: GroundStates | None = None,
    rel_tol: float = 1e-3,
) -> ClarkeEstimate:
    """Sampled generalized gradient of ``Sigma`` near ``z``.

    Gradients are taken at ``z`` and at ``sample_count - 1`` points drawn
    uniformly from the ball of the given radius.  Zero is declared inside the
    estimate when the minimum-norm point of their convex hull has norm at most
    ``rel_tol`` times the largest sampled gradient norm.
    """
    z = np.asarray(z, dtype=float)
    n = z.size
    if radius <= 0:
        raise ValueError("radius must be positive")
    if sample_count < 2 * n + 1:
        raise ValueError(f"sample_count must be at least 2n + 1 = {2 * n + 1}")
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((sample_count - 1, n))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius * rng.random(sample_count - 1) ** (1.0 / n)
    points = np.vstack([z, z + directions * radii[:, None]])

    if step is None:
        step = min(default_step(z), radius / 10.0)
    grads = np.array(
        [
            sigma_grad_fd(coefficients, params, x, step=step, states=states, sigma_fn=sigma_fn)
            for x in points
        ]
    )
    norms = np.linalg.norm(grads, axis=1)
    tolerance = rel_tol * float(norms.max())
    degenerate = bool(np.all(np.abs(grads - grads[0]) <= 1e-12 * max(norms.max(), 1.0)))
    if degenerate:
        weights = np.zeros(len(points))
        weights[0] = 1.0
        point = grads[0]
    else:
        point, weights = min_norm_point(grads)
    return ClarkeEstimate(
        center=z,
        sample_points=points,
        sample_gradients=grads,
        min_norm_point=point,
        weights=weights,
        contains_zero=bool(np.linalg.norm(point) <= tolerance),
        tolerance=tolerance,
        degenerate=degenerate,
    )


def _grid(box, grid_n):
    axes = [np.linspace(lo, hi, grid_n) for lo, hi in box]
    return axes, np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def sigma_lipschitz_probe(
    coefficients: CoefficientField,
    params: ProblemParams,
    box,
    grid_n: int,
    states: GroundStates | None = None,
) -> float:
    """Largest difference quotient of ``Sigma`` over adjacent grid nodes."""
    if grid_n < 3:
        raise ValueError("grid_n must be at least 3")
    states = ground_states(params) if states is None else states
    _, mesh = _grid(box, grid_n)
    values = np.empty(mesh.shape[:-1])
    for idx in np.ndindex(values.shape):
        values[idx] = sigma_value(coefficients, params, mesh[idx], states)
    best = 0.0
    for axis in range(values.ndim):
        spacing = (box[axis][1] - box[axis][0]) / (grid_n - 1)
        quotient = np.abs(np.diff(values, axis=axis)) / spacing
        best = max(best, float(quotient.max()))
    return best

