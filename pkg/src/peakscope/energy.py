"""Energy integrals, Nehari projection and Pohozaev-type residuals.

With ``beta(xi) = |xi|^p / p`` the frozen functional reads::

    I(u) = a A + (V/p) B - K Phi
    A = int |grad u|^p / p,  B = int |u|^p,  Phi = int F(u)

Radial integrals carry the weight ``omega r^{n-1}`` with
``omega = 2 pi^{n/2} / Gamma(n/2)`` (``omega = 2`` on the line).
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Union

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq
from scipy.special import gamma as gamma_fn

from .model import F_values, ProblemParams, PurePower, f_values
from .radial_ode import (
    FrozenCoefficients,
    RadialProfile,
    predicted_decay_rate,
    shoot_frozen,
    solve_frozen,
)

__all__ = [
    "EnergyBreakdown",
    "Dilation",
    "Coordinate",
    "surface_measure",
    "half_sphere_moment",
    "radial_integral",
    "energy_breakdown",
    "energy_of",
    "nehari_residual",
    "nehari_project",
    "max_along_ray",
    "mountain_pass_level",
    "perturbed_directions",
    "minimax_crosscheck",
    "pohozaev_residual",
    "pucci_serrin_residual",
    "cutoff",
    "cutoff_derivative",
]


def surface_measure(n: int) -> float:
    """Area of the unit sphere in R^n; 2 for the two-point 'sphere' of R^1."""
    return 2.0 * math.pi ** (n / 2) / gamma_fn(n / 2)


def half_sphere_moment(n: int) -> float:
    """``int x_k dS`` over the unit half-sphere ``{x_k > 0}``."""
    return math.pi ** ((n - 1) / 2) / gamma_fn((n + 1) / 2)


def radial_integral(r, g, n: int) -> float:
    """``int_{R^n} g(|x|) dx`` for samples of ``g`` on the radial grid.

    Composite Simpson on the (nonuniform) grid; the ball ``|x| < r[0]`` is
    added with ``g`` frozen at ``r[0]`` and the tail past ``r[-1]`` is closed
    with the exponential rate of the last two samples.
    """
    r = np.asarray(r, dtype=float)
    g = np.asarray(g, dtype=float)
    weighted = g * r ** (n - 1)
    total = simpson(weighted, x=r)
    total += g[0] * r[0] ** n / n
    last, prev = weighted[-1], weighted[-2]
    if last != 0 and prev != 0 and np.sign(last) == np.sign(prev) and abs(last) < abs(prev):
        rate = math.log(prev / last) / (r[-1] - r[-2])
        total += last / rate
    return surface_measure(n) * total


@dataclass(frozen=True)
class EnergyBreakdown:
    """The integrals entering the frozen functional and its value.

    ``C`` is ``int |u|^q`` with ``q`` the growth exponent of the problem;
    ``f_u_u`` is ``int f(u) u``, which equals ``C`` for a pure power.
    """

    A: float
    B: float
    C: float
    Phi: float
    I_value: float
    f_u_u: float

    def to_json(self) -> str:
        data = {k: float(v) for k, v in asdict(self).items() if k != "f_u_u"}
        return json.dumps(data, indent=2, sort_keys=False)

    def scaled(self, params: ProblemParams, frozen: FrozenCoefficients, gamma, lam):
        """Breakdown of ``gamma u(x / lam)`` for a pure power."""
        n, p, q = params.n, params.p, params.q
        A = gamma**p * lam ** (n - p) * self.A
        B = gamma**p * lam**n * self.B
        C = gamma**q * lam**n * self.C
        Phi = gamma**q * lam**n * self.Phi
        I_value = frozen.a * A + frozen.V / p * B - frozen.K * Phi
        return EnergyBreakdown(*(float(x) for x in (A, B, C, Phi, I_value, C)))


def _breakdown_arrays(r, u, du, params: ProblemParams, frozen: FrozenCoefficients):
    n, p, q = params.n, params.p, params.q
    u = np.maximum(np.asarray(u, dtype=float), 0.0)
    du = np.asarray(du, dtype=float)
    A = radial_integral(r, np.abs(du) ** p / p, n)
    B = radial_integral(r, u**p, n)
    C = radial_integral(r, u**q, n)
    Phi = radial_integral(r, F_values(params, u), n)
    fuu = radial_integral(r, f_values(params, u) * u, n)
    I_value = frozen.a * A + frozen.V / p * B - frozen.K * Phi
    return EnergyBreakdown(*(float(x) for x in (A, B, C, Phi, I_value, fuu)))


def energy_breakdown(
    profile: RadialProfile, frozen: FrozenCoefficients | None = None
) -> EnergyBreakdown:
    """Quadrature of ``A, B, C, Phi`` and the energy of a radial profile."""
    frozen = profile.frozen if frozen is None else frozen
    return _breakdown_arrays(profile.r, profile.w, profile.w_prime, profile.params, frozen)


def energy_of(breakdown: EnergyBreakdown, params: ProblemParams, frozen: FrozenCoefficients):
    return frozen.a * breakdown.A + frozen.V / params.p * breakdown.B - frozen.K * breakdown.Phi


def nehari_residual(
    breakdown: EnergyBreakdown, params: ProblemParams, frozen: FrozenCoefficients
) -> float:
    """Relative defect of ``I'(u)[u] = 0``."""
    kfu = frozen.K * breakdown.f_u_u
    return abs(params.p * frozen.a * breakdown.A + frozen.V * breakdown.B - kfu) / kfu


def nehari_project(
    direction: RadialProfile, frozen: FrozenCoefficients | None = None
) -> float:
    """The ``theta* > 0`` maximizing ``theta -> I(theta u)``.

    Closed form for a pure power; otherwise the scalar root of
    ``d/dtheta I(theta u) = 0``, bracketed and bisected to relative 1e-12.
    """
    frozen = direction.frozen if frozen is None else frozen
    b = energy_breakdown(direction, frozen)
    return _theta_star(direction.r, direction.w, b, direction.params, frozen)


def _theta_star(r, u, b: EnergyBreakdown, params: ProblemParams, frozen: FrozenCoefficients):
    p, q = params.p, params.q
    quadratic = p * frozen.a * b.A + frozen.V * b.B
    if b.C <= 0 or quadratic <= 0:
        raise ValueError("direction is identically zero")
    if isinstance(params.nonlinearity, PurePower):
        return (quadratic / (frozen.K * b.C)) ** (1.0 / (q - p))

    u = np.maximum(np.asarray(u, dtype=float), 0.0)

    def g(theta):
        # d/dtheta I(theta u) / theta^{p-1}; increasing nonlinear part
        fu = radial_integral(r, f_values(params, theta * u) * u, params.n)
        return quadratic - frozen.K * fu / theta ** (p - 1)

    lo, hi = 1.0, 1.0
    while g(lo) <= 0:
        lo /= 2.0
    while g(hi) >= 0:
        hi *= 2.0
    return brentq(g, lo, hi, xtol=1e-300, rtol=1e-12)


def max_along_ray(direction: RadialProfile, frozen: FrozenCoefficients | None = None) -> float:
    """``max_{theta >= 0} I(theta u)``."""
    frozen = direction.frozen if frozen is None else frozen
    return _ray_max(direction.r, direction.w, direction.w_prime, direction.params, frozen)


def _ray_max(r, u, du, params, frozen):
    b = _breakdown_arrays(r, u, du, params, frozen)
    theta = _theta_star(r, u, b, params, frozen)
    scaled = _breakdown_arrays(r, theta * np.asarray(u), theta * np.asarray(du), params, frozen)
    return scaled.I_value


def mountain_pass_level(
    frozen: FrozenCoefficients,
    params: ProblemParams,
    canonical: RadialProfile | None = None,
) -> float:
    """``c_z`` as the energy of the Nehari-projected ground state."""
    if isinstance(params.nonlinearity, PurePower):
        if canonical is None:
            from .radial_ode import shoot_canonical

            canonical = shoot_canonical(params)
        profile = solve_frozen(canonical, frozen)
    else:
        profile = shoot_frozen(params, frozen)
    return max_along_ray(profile, frozen)


def _bump(t):
    t = np.asarray(t, dtype=float)
    return np.where(t < 1.0, (1.0 - t * t) ** 2, 0.0)


def _bump_derivative(t):
    t = np.asarray(t, dtype=float)
    return np.where(t < 1.0, -4.0 * t * (1.0 - t * t), 0.0)


def perturbed_directions(
    profile: RadialProfile,
    amplitudes=(-0.2, -0.1, 0.1, 0.2),
    widths=(0.5, 1.0, 2.0),
):
    """Yield ``(s, rho, u, u')`` for ``u = w (1 + s bump(r / rho))``.

    ``rho`` is measured in decay lengths of the profile.
    """
    r, w, dw = profile.r, profile.w, profile.w_prime
    length = 1.0 / predicted_decay_rate(profile.params.p, profile.frozen)
    for rho in widths:
        rho_r = rho * length
        b = _bump(r / rho_r)
        db = _bump_derivative(r / rho_r) / rho_r
        for s in amplitudes:
            yield s, rho, w * (1 + s * b), dw * (1 + s * b) + w * s * db


def minimax_crosscheck(profile: RadialProfile, frozen: FrozenCoefficients | None = None):
    """Minimum of ``max_theta I(theta u)`` over the perturbed family.

    Every member is an upper bound for the mountain-pass level, so the result
    must not fall below the ground-state energy beyond quadrature error.
    """
    frozen = profile.frozen if frozen is None else frozen
    best = max_along_ray(profile, frozen)
    for _, _, u, du in perturbed_directions(profile):
        best = min(best, _ray_max(profile.r, u, du, profile.params, frozen))
    return best


def pohozaev_residual(profile: RadialProfile, frozen: FrozenCoefficients | None = None) -> float:
    """``|(n-p) a A + n (V/p) B - n K Phi| / (n K Phi)``."""
    frozen = profile.frozen if frozen is None else frozen
    params = profile.params
    n, p = params.n, params.p
    b = energy_breakdown(profile, frozen)
    defect = (n - p) * frozen.a * b.A + n * frozen.V / p * b.B - n * frozen.K * b.Phi
    return abs(defect) / (n * frozen.K * b.Phi)


@dataclass(frozen=True)
class Dilation:
    """Test field ``h(x) = x``."""


@dataclass(frozen=True)
class Coordinate:
    """Test field ``h = T(x / R) e_k`` with the C^1 cutoff ``T``."""

    k: int
    cutoff_radius: float


TestField = Union[Dilation, Coordinate]


def cutoff(t):
    """``T = 1`` on ``[0, 1]``, ``0`` on ``[2, inf)``, cubic C^1 bridge."""
    t = np.asarray(t, dtype=float)
    u = np.clip(t - 1.0, 0.0, 1.0)
    return 1.0 - u * u * (3.0 - 2.0 * u)


def cutoff_derivative(t):
    t = np.asarray(t, dtype=float)
    u = np.clip(t - 1.0, 0.0, 1.0)
    return -6.0 * u * (1.0 - u)


def _lagrangian(params, frozen, u, du):
    p = params.p
    return frozen.a * np.abs(du) ** p / p + frozen.V * u**p / p - frozen.K * F_values(params, u)


def pucci_serrin_residual(
    profile: RadialProfile,
    frozen: FrozenCoefficients | None = None,
    h_field: TestField = Dilation(),
    nodes_per_radius: int = 4000,
) -> float:
    """Defect of the Pucci-Serrin identity for constant coefficients.

    With ``L = a beta(xi) + V s^p / p - K F(s)`` and right-hand side zero the
    identity reads ``sum_ij int d_i h^j L_{xi_i} d_j u - int div(h) L = 0``.

    * ``Dilation``: the left side is ``int a |grad u|^p - n int L``; the
      defect is normalized by ``n K Phi`` and coincides with
      :func:`pohozaev_residual`.
    * ``Coordinate(k, R)``: over the whole space the integrand is odd in
      ``x_k`` and cancels exactly for radial ``u``.  The returned value is the
      left side restricted to the half-space ``{x_k > 0}``, which measures the
      cutoff (boundary) contributions that vanish as ``R`` grows; it is
      normalized by ``a A + (V/p) B + K Phi``.  Past ``r_max`` the profile is
      continued by its asymptotic tail.
    """
    frozen = profile.frozen if frozen is None else frozen
    params = profile.params
    n, p = params.n, params.p
    r, u, du = profile.r, np.maximum(profile.w, 0.0), profile.w_prime

    if isinstance(h_field, Dilation):
        integrand = frozen.a * np.abs(du) ** p - n * _lagrangian(params, frozen, u, du)
        lhs = radial_integral(r, integrand, n)
        Phi = radial_integral(r, F_values(params, u), n)
        if Phi == 0:
            return 0.0
        return abs(lhs) / (n * frozen.K * Phi)

    if not 1 <= h_field.k <= n:
        raise ValueError(f"coordinate index {h_field.k} outside 1..{n}")
    R = float(h_field.cutoff_radius)
    if not 0 < R <= profile.r_max:
        raise ValueError(f"cutoff radius {R} must lie in (0, r_max = {profile.r_max}]")
    if np.max(u) > 0 and np.interp(R, r, u) > 1e-2 * np.max(u):
        warnings.warn(
            "cutoff radius inside the profile core; boundary terms dominate", stacklevel=2
        )
    b = energy_breakdown(profile, frozen)
    scale = frozen.a * b.A + frozen.V / p * b.B + frozen.K * b.Phi
    if scale == 0:
        return 0.0
    rr = np.linspace(R, 2 * R, nodes_per_radius + 1)
    if np.max(u) > 0:
        uu, duu = profile.evaluate(rr)
    else:
        uu = duu = np.zeros_like(rr)
    uu = np.maximum(uu, 0.0)
    core = frozen.a * np.abs(duu) ** p - _lagrangian(params, frozen, uu, duu)
    radial = cutoff_derivative(rr / R) / R * core * rr ** (n - 1)
    lhs = half_sphere_moment(n) * simpson(radial, x=rr)
    return abs(lhs) / scale
