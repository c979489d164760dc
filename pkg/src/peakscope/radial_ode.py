"""Radial ground states of ``-a Delta_p u + V u^{p-1} = K f(u)`` by shooting.

The radial equation is integrated as a first-order system in ``w`` and the
flux ``psi = |w'|^{p-2} w'``::

    w'   = sign(psi) |psi|^{1/(p-1)}
    psi' = -(n-1) psi / r + (V w^{p-1} - K f(w)) / a

which never divides by ``|w'|^{p-2}``.  The shooting value ``w(0)`` is
bisected between undershoots (``w'`` turns positive) and overshoots (``w``
crosses zero).  Forward integration loses the decaying branch once the
growing mode amplified from the bracket width takes over, so the profile is
completed past a split radius by integrating backwards from far out, where
the decaying branch is the stable one.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import make_interp_spline
from scipy.optimize import brentq

from .model import ProblemParams, PurePower, df_values, f_values, validate_params

__all__ = [
    "FrozenCoefficients",
    "RadialProfile",
    "NoGroundStateError",
    "SolverFailure",
    "shoot_canonical",
    "shoot_frozen",
    "solve_frozen",
    "scaling_factors",
    "ode_residual",
    "fit_decay_rate",
    "predicted_decay_rate",
    "tail_power",
    "write_profile_csv",
    "read_profile_csv",
]

RTOL = 1e-12
BISECTION_WIDTH = 1e-12
R_MAX_DECAY_LENGTHS = 30.0
GRID_PER_DECAY_LENGTH = 200
SEARCH_FACTOR = 1e6
ORIGIN_NODES = 40


class NoGroundStateError(RuntimeError):
    """No undershoot/overshoot bracket in the search range."""


class SolverFailure(RuntimeError):
    """The converged profile violates a ground-state invariant."""


@dataclass(frozen=True)
class FrozenCoefficients:
    """Values ``(alpha(z), V(z), K(z))`` of the coefficients at a point."""

    a: float
    V: float
    K: float

    def __post_init__(self):
        for name in ("a", "V", "K"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"frozen coefficient {name} = {value!r} must be positive")

    def as_tuple(self):
        return (self.a, self.V, self.K)


CANONICAL = FrozenCoefficients(1.0, 1.0, 1.0)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Discrete radial profile with its shooting metadata.

    ``r`` starts at a small ``r0 > 0``; ``w[0]`` equals ``w(0)`` up to a
    correction of order ``r0^{p/(p-1)}``.  ``r_split`` is where the forward
    shot hands over to the backward tail.
    """

    r: np.ndarray
    w: np.ndarray
    w_prime: np.ndarray
    params: ProblemParams
    frozen: FrozenCoefficients
    shooting_value: float
    r_split: float = math.nan
    junction_mismatch: float = 0.0
    decay_rate_fit: float = math.nan
    bisection_width: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    @property
    def flux(self) -> np.ndarray:
        return flux_from_slope(self.w_prime, self.params.p)

    def evaluate(self, radii):
        """``(w, w')`` at arbitrary radii; asymptotic tail past ``r_max``."""
        radii = np.asarray(radii, dtype=float)
        w = np.interp(radii, self.r, self.w)
        dw = np.interp(radii, self.r, self.w_prime)
        inside = radii <= self.r_max
        if np.all(inside):
            spline_w = make_interp_spline(self.r, self.w, k=3)
            spline_dw = make_interp_spline(self.r, self.w_prime, k=3)
            return spline_w(radii), spline_dw(radii)
        spline_w = make_interp_spline(self.r, self.w, k=3)
        spline_dw = make_interp_spline(self.r, self.w_prime, k=3)
        w[inside] = spline_w(radii[inside])
        dw[inside] = spline_dw(radii[inside])
        out = ~inside
        s = predicted_decay_rate(self.params.p, self.frozen)
        m = tail_power(self.params.n, self.params.p)
        rr = radii[out]
        w_tail = self.w[-1] * (self.r_max / rr) ** m * np.exp(-s * (rr - self.r_max))
        w[out] = w_tail
        dw[out] = -(s + m / rr) * w_tail
        return w, dw


def flux_from_slope(w_prime, p):
    w_prime = np.asarray(w_prime, dtype=float)
    return np.sign(w_prime) * np.abs(w_prime) ** (p - 1)


def slope_from_flux(psi, p):
    return np.sign(psi) * np.abs(psi) ** (1.0 / (p - 1))


def predicted_decay_rate(p: float, frozen: FrozenCoefficients) -> float:
    """Exponential rate ``(V / (a (p-1)))^{1/p}`` of the linearized far field."""
    return (frozen.V / (frozen.a * (p - 1))) ** (1.0 / p)


def tail_power(n: int, p: float) -> float:
    """Algebraic prefactor exponent: ``w ~ r^{-m} exp(-s r)``."""
    return (n - 1) / (p * (p - 1))


def _rhs(params: ProblemParams, frozen: FrozenCoefficients):
    n, p = params.n, params.p
    a, V, K = frozen.a, frozen.V, frozen.K
    terms = params.nonlinearity.terms

    def rhs(r, y):
        w, psi = y
        wp = math.copysign(abs(psi) ** (1.0 / (p - 1)), psi)
        wpos = w if w > 0 else 0.0
        f = 0.0
        for c, e in terms:
            f += c * wpos ** (e - 1)
        dpsi = (V * wpos ** (p - 1) - K * f) / a
        if n > 1:
            dpsi -= (n - 1) * psi / r
        return [wp, dpsi]

    return rhs


def _start(params, frozen, w0, r0):
    """Series start at ``r0`` from the integrated flux."""
    n, p = params.n, params.p
    f0 = float(f_values(params, w0))
    psi0 = (r0 / n) * (frozen.V * w0 ** (p - 1) - frozen.K * f0) / frozen.a
    wp0 = float(slope_from_flux(psi0, p))
    w_start = w0 + (p - 1) / p * r0 * wp0
    return w_start, psi0


def _threshold(params, frozen) -> float:
    """Root of ``K f(w) = V w^{p-1}``; below it the flux starts nonnegative."""
    p = params.p
    if isinstance(params.nonlinearity, PurePower):
        return (frozen.V / frozen.K) ** (1.0 / (params.q - p))

    def g(w):
        return frozen.K * float(f_values(params, w)) / w ** (p - 1) - frozen.V

    lo, hi = 1e-12, 1.0
    while g(hi) <= 0:
        hi *= 2.0
        if hi > 1e12:
            raise NoGroundStateError("K f(w) never dominates V w^{p-1}")
    while g(lo) >= 0:
        lo /= 2
    return brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


class _Shooter:
    def __init__(self, params, frozen, r_end):
        self.params = params
        self.frozen = frozen
        self.rhs = _rhs(params, frozen)
        self.s = predicted_decay_rate(params.p, frozen)
        self.r0 = 1e-6 * (1.0 + 1.0 / self.s)
        self.r_end = r_end

        def crossing(r, y):
            return y[0]

        crossing.terminal = True
        crossing.direction = -1

        def turning(r, y):
            return y[1]

        turning.terminal = True
        turning.direction = 1
        self.events = (crossing, turning)

    def integrate(self, w0, dense=False, rtol=RTOL):
        w_start, psi0 = _start(self.params, self.frozen, w0, self.r0)
        if psi0 >= 0:
            return -1, None
        sol = self._solve(self.r0, [w_start, psi0], w0, dense, rtol)
        return self._verdict(sol), sol

    def _solve(self, r_start, y_start, w0, dense, rtol=RTOL):
        atol = 1e-16 * max(1.0, w0)
        return solve_ivp(
            self.rhs,
            (r_start, self.r_end),
            y_start,
            method="DOP853",
            rtol=rtol,
            atol=[atol, atol ** (self.params.p - 1) if self.params.p < 2 else atol],
            events=self.events,
            dense_output=dense,
        )

    @staticmethod
    def _verdict(sol):
        if sol.t_events[0].size:
            return 1
        if sol.t_events[1].size:
            return -1
        return 0

    def trajectory(self, w0, r_inner):
        """Dense forward solution as a callable on radii, plus its reach.

        The segment ``[r0, r_inner]`` is integrated in ``log r`` so the steps
        follow the geometric nodes near the origin.
        """
        w_start, psi0 = _start(self.params, self.frozen, w0, self.r0)
        rhs = self.rhs

        def log_rhs(t, y):
            r = math.exp(t)
            return [r * v for v in rhs(r, y)]

        inner = solve_ivp(
            log_rhs,
            (math.log(self.r0), math.log(r_inner)),
            [w_start, psi0],
            method="DOP853",
            rtol=RTOL,
            atol=1e-300,
            dense_output=True,
        )
        outer = self._solve(r_inner, inner.y[:, -1], w0, dense=True)

        def evaluate(radii):
            radii = np.asarray(radii, dtype=float)
            out = np.empty((2, radii.size))
            near = radii <= r_inner
            out[:, near] = inner.sol(np.log(radii[near]))
            out[:, ~near] = outer.sol(radii[~near])
            return out

        return evaluate, outer.t[-1]


def shoot_frozen(
    params: ProblemParams,
    frozen: FrozenCoefficients = CANONICAL,
    tol: float = BISECTION_WIDTH,
    search_factor: float = SEARCH_FACTOR,
    grid_per_decay_length: int = GRID_PER_DECAY_LENGTH,
) -> RadialProfile:
    """Shoot the ground state of the frozen equation directly.

    Works for every nonlinearity family.  ``tol`` is the final bracket width
    on ``w(0)``, relative to ``max(1, w(0))``.
    """
    problems = validate_params(params)
    if problems:
        raise ValueError("invalid parameters: " + "; ".join(problems))

    s = predicted_decay_rate(params.p, frozen)
    r_max = R_MAX_DECAY_LENGTHS / s
    shooter = _Shooter(params, frozen, r_end=2 * r_max)

    lo = _threshold(params, frozen)
    hi = 2.0 * lo
    while True:
        verdict, _ = shooter.integrate(hi)
        if verdict == 1:
            break
        lo = hi
        hi *= 2.0
        if hi > search_factor * _threshold(params, frozen):
            raise NoGroundStateError(
                f"no overshoot for w(0) up to {hi:.3g}; widen the search range"
            )

    bracket = (lo, hi)
    lo, hi = _bisect(shooter, lo, hi, tol, adaptive=True)
    # loose early steps must not have misclassified a shot
    if lo != hi and (shooter.integrate(lo)[0] != -1 or shooter.integrate(hi)[0] != 1):
        lo, hi = _bisect(shooter, *bracket, tol, adaptive=False)

    w0 = 0.5 * (lo + hi)
    width = hi - lo
    return _assemble(params, frozen, shooter, lo, hi, w0, width, r_max, grid_per_decay_length)


def _bisect(shooter, lo, hi, tol, adaptive):
    """Bisect the undershoot/overshoot bracket down to relative width ``tol``.

    With ``adaptive`` the integrator tolerance follows the bracket width
    (``1e-2`` of it, clamped to ``[RTOL, 1e-6]``); shots far from the
    threshold are classified reliably at that accuracy.
    """
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        rtol = RTOL
        if adaptive:
            rtol = min(1e-6, max(RTOL, 1e-2 * (hi - lo) / hi))
        verdict, _ = shooter.integrate(mid, rtol=rtol)
        if verdict == 1:
            hi = mid
        elif verdict == -1:
            lo = mid
        else:
            lo = hi = mid
            break
    return lo, hi


def _assemble(params, frozen, shooter, lo, hi, w0, width, r_max, grid_per_decay_length):
    p, n = params.p, params.n
    s = shooter.s
    h = 1.0 / (s * grid_per_decay_length)
    # geometric nodes resolve the r^{p/(p-1)} behaviour at the origin
    inner = shooter.r0 * (h / shooter.r0) ** (np.arange(ORIGIN_NODES) / ORIGIN_NODES)
    r = np.concatenate([inner, np.arange(1, int(round(r_max / h)) + 1) * h])

    # forward part: trust the shot while the bracket ends agree
    ends = (w0, w0) if lo == hi else (lo, hi)
    runs = [shooter.trajectory(x, r_inner=h) for x in ends]
    reach = min(run[1] for run in runs)
    mask = r <= reach
    ys = [run[0](r[mask]) for run in runs]
    w_fwd = 0.5 * (ys[0][0] + ys[1][0])
    psi_fwd = 0.5 * (ys[0][1] + ys[1][1])
    spread = np.abs(ys[0][0] - ys[1][0]) / np.maximum(np.abs(w_fwd), 1e-300)
    bad = np.nonzero((spread > 1e-7) | (w_fwd <= 0) | (psi_fwd >= 0))[0]
    last_ok = (bad[0] - 1) if bad.size else int(mask.sum()) - 1
    deep = np.nonzero(w_fwd <= 1e-4 * w0)[0]
    split = min(last_ok, deep[0]) if deep.size else last_ok
    if split < 1 or w_fwd[split] > 0.05 * w0:
        raise SolverFailure(
            f"forward shot diverges at r = {r[max(split, 0)]:.3g} before reaching the tail"
        )
    r_split = r[split]

    # backward tail from beyond r_max, amplitude matched at r_split
    r_far = r_max + 10.0 / s
    m = tail_power(n, p)
    y_rate = s + m / r_far
    eps = w_fwd[split] * math.exp(-s * (r_far - r_split)) * (r_split / r_far) ** m
    t_back = r[split:][::-1]
    for _ in range(8):
        start = [eps, -((y_rate * eps) ** (p - 1))]
        back = solve_ivp(
            shooter.rhs,
            (r_far, r_split),
            start,
            method="DOP853",
            rtol=RTOL,
            atol=1e-300,
            t_eval=t_back,
        )
        if not back.success:
            raise SolverFailure(f"tail integration failed: {back.message}")
        ratio = w_fwd[split] / back.y[0][-1]
        eps *= ratio
        if abs(ratio - 1.0) < 1e-14:
            break
    w_tail = back.y[0][::-1]
    psi_tail = back.y[1][::-1]
    mismatch = abs(psi_tail[0] - psi_fwd[split]) / abs(psi_fwd[split])

    w = np.concatenate([w_fwd[:split], w_tail])
    psi = np.concatenate([psi_fwd[:split], psi_tail])
    w_prime = slope_from_flux(psi, p)

    # ties near r0 are rounding: w changes by O(r0^{p/(p-1)}) there
    if np.any(w <= 0) or np.any(np.diff(w) > 0) or np.any(w_prime[1:] >= 0):
        raise SolverFailure("converged profile is not positive and strictly decreasing")

    return RadialProfile(
        r=r,
        w=w,
        w_prime=w_prime,
        params=params,
        frozen=frozen,
        shooting_value=w0,
        r_split=float(r_split),
        junction_mismatch=float(mismatch),
        bisection_width=float(width),
    )


def shoot_canonical(params: ProblemParams, tol: float = BISECTION_WIDTH) -> RadialProfile:
    """Ground state of ``-Delta_p w + w^{p-1} = f(w)``."""
    return shoot_frozen(params, CANONICAL, tol=tol)


def scaling_factors(params: ProblemParams, frozen: FrozenCoefficients) -> tuple[float, float]:
    """``(gamma, lam)`` with ``u(x) = gamma w(x / lam)`` for pure powers."""
    p, q = params.p, params.q
    gamma = (frozen.V / frozen.K) ** (1.0 / (q - p))
    lam = (frozen.a / frozen.V) ** (1.0 / p)
    return gamma, lam


def solve_frozen(canonical: RadialProfile, frozen: FrozenCoefficients) -> RadialProfile:
    """Map the canonical ground state to frozen coefficients.

    Pure powers use the exact scaling ``u(x) = gamma w(x / lam)``; a power sum
    has no such reduction and is shot directly.
    """
    params = canonical.params
    if not isinstance(params.nonlinearity, PurePower):
        return shoot_frozen(params, frozen)
    if canonical.frozen != CANONICAL:
        raise ValueError("solve_frozen expects the a = V = K = 1 profile")
    gamma, lam = scaling_factors(params, frozen)
    return replace(
        canonical,
        r=canonical.r * lam,
        w=canonical.w * gamma,
        w_prime=canonical.w_prime * (gamma / lam),
        frozen=frozen,
        shooting_value=canonical.shooting_value * gamma,
        r_split=canonical.r_split * lam,
        decay_rate_fit=math.nan,
        bisection_width=canonical.bisection_width * gamma,
        meta={"gamma": gamma, "lam": lam},
    )


def ode_residual(profile: RadialProfile, frozen: FrozenCoefficients | None = None) -> float:
    """Scaled sup norm of the pointwise radial residual.

    The flux is rebuilt from ``w_prime`` and differentiated with a quintic
    interpolating spline, so profiles read back from CSV can be checked.
    """
    frozen = profile.frozen if frozen is None else frozen
    params = profile.params
    n, p = params.n, params.p
    r = np.asarray(profile.r, dtype=float)
    w = np.asarray(profile.w, dtype=float)
    if r.shape != w.shape or r.shape != np.shape(profile.w_prime):
        raise ValueError("profile arrays have mismatched shapes")
    psi = flux_from_slope(profile.w_prime, p)
    dpsi = make_interp_spline(r, psi, k=5).derivative()(r)
    wpos = np.maximum(w, 0.0)
    residual = -frozen.a * dpsi + frozen.V * wpos ** (p - 1) - frozen.K * f_values(params, wpos)
    if n > 1:
        residual -= frozen.a * (n - 1) * psi / r
    scale = max(1.0, abs(w[0]) ** (params.q - 1))
    return float(np.max(np.abs(residual)) / scale)


def fit_decay_rate(profile: RadialProfile, frozen: FrozenCoefficients | None = None):
    """Fitted and predicted exponential tail slopes of ``log w``.

    The fit regresses ``log w + m log r`` on ``r`` over
    ``[0.6 r_max, 0.9 r_max]``, removing the algebraic prefactor
    ``r^{-m}`` (``m = (n-1)/(p(p-1))``) that the far field carries in
    dimension ``n > 1``.
    """
    frozen = profile.frozen if frozen is None else frozen
    params = profile.params
    r_max = profile.r_max
    window = (profile.r >= 0.6 * r_max) & (profile.r <= 0.9 * r_max)
    w = profile.w[window]
    if w.size < 3 or np.any(w <= 0) or not np.all(np.isfinite(np.log(w))):
        raise SolverFailure("tail underflow in the fit window; widen the window")
    r = profile.r[window]
    m = tail_power(params.n, params.p)
    slope = np.polyfit(r, np.log(w) + m * np.log(r), 1)[0]
    return float(slope), -predicted_decay_rate(params.p, frozen)


def write_profile_csv(profile: RadialProfile, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["r", "w", "w_prime"])
        for row in zip(profile.r, profile.w, profile.w_prime):
            writer.writerow([f"{x:.17g}" for x in row])


def read_profile_csv(path, params: ProblemParams, frozen: FrozenCoefficients) -> RadialProfile:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return RadialProfile(
        r=data[:, 0],
        w=data[:, 1],
        w_prime=data[:, 2],
        params=params,
        frozen=frozen,
        shooting_value=float(data[0, 1]),
    )


def _linearization(params, w):
    """``(p-1) w^{p-2} - f'(w)``, used by diagnostics."""
    return (params.p - 1) * w ** (params.p - 2) - df_values(params, w)
