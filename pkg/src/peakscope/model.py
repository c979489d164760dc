"""Problem parameters, the nonlinearity families and hypothesis checks.

The gradient term is fixed to ``beta(xi) = |xi|^p / p`` so that
``grad beta(xi) = |xi|^{p-2} xi`` and ``grad beta(xi) . xi = p beta(xi)``.
This satisfies the two-sided growth bounds with ``nu = c1 = 1/p`` and
``c2 = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, Union

import numpy as np

__all__ = [
    "PurePower",
    "PowerSum",
    "ProblemParams",
    "NonlinearityEval",
    "InvalidInputError",
    "critical_exponent",
    "eval_nonlinearity",
    "validate_params",
]

AR_TOLERANCE = 1e-12
SAMPLE_GRID = np.logspace(-6, 6, 241)


class InvalidInputError(ValueError):
    """Raised for non-finite or out-of-domain inputs."""


@dataclass(frozen=True)
class PurePower:
    """``f(s) = s^{q-1}``."""

    q: float

    @property
    def terms(self) -> tuple[tuple[float, float], ...]:
        return ((1.0, float(self.q)),)


@dataclass(frozen=True)
class PowerSum:
    """``f(s) = sum_i c_i s^{e_i - 1}`` with ``c_i >= 0``.

    Each term is ``(coefficient, exponent)``; the exponent plays the role of
    ``q`` for that term, so ``F(s) = sum_i c_i s^{e_i} / e_i``.
    """

    terms: tuple[tuple[float, float], ...]

    def __init__(self, terms: Sequence[tuple[float, float]]):
        object.__setattr__(
            self, "terms", tuple((float(c), float(e)) for c, e in terms)
        )


Nonlinearity = Union[PurePower, PowerSum]


def critical_exponent(n: int, p: float) -> float:
    """Sobolev exponent ``np/(n-p)``, infinite when ``n <= p``."""
    if n <= p:
        return math.inf
    return n * p / (n - p)


@dataclass(frozen=True)
class ProblemParams:
    """Dimension, exponents and nonlinearity of the problem.

    ``q`` is the growth exponent bounding the nonlinearity at infinity; for a
    :class:`PurePower` it must equal ``nonlinearity.q``.  ``test_mode`` admits
    ``n`` in {1, 2} (and ``p >= n``) for closed-form solver oracles.
    """

    n: int
    p: float
    q: float
    theta: float
    nonlinearity: Nonlinearity = field(default=None)  # type: ignore[assignment]
    test_mode: bool = False

    def __post_init__(self):
        for name in ("p", "q", "theta"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise InvalidInputError(f"{name} must be a finite real, got {value!r}")
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise InvalidInputError(f"n must be a positive integer, got {self.n!r}")
        if self.nonlinearity is None:
            object.__setattr__(self, "nonlinearity", PurePower(self.q))
        for c, e in self.nonlinearity.terms:
            if not (math.isfinite(c) and math.isfinite(e)):
                raise InvalidInputError("nonlinearity terms must be finite")

    @property
    def p_star(self) -> float:
        return critical_exponent(self.n, self.p)

    @property
    def is_pure_power(self) -> bool:
        return isinstance(self.nonlinearity, PurePower)


class NonlinearityEval(NamedTuple):
    f: float
    F: float
    df: float


def _as_array(s):
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0):
        raise InvalidInputError("nonlinearity is defined for s >= 0 only")
    return arr


def f_values(params: ProblemParams, s):
    """Vectorized ``f(s)``."""
    s = _as_array(s)
    out = np.zeros_like(s)
    for c, e in params.nonlinearity.terms:
        out = out + c * s ** (e - 1)
    return out


def F_values(params: ProblemParams, s):
    """Vectorized antiderivative ``F(s)`` with ``F(0) = 0``."""
    s = _as_array(s)
    out = np.zeros_like(s)
    for c, e in params.nonlinearity.terms:
        out = out + c * s**e / e
    return out


def df_values(params: ProblemParams, s):
    s = _as_array(s)
    out = np.zeros_like(s)
    for c, e in params.nonlinearity.terms:
        with np.errstate(divide="ignore"):
            term = np.where(s > 0, c * (e - 1) * s ** (e - 2), 0.0 if e > 2 else np.inf)
        out = out + term
    return out


def eval_nonlinearity(params: ProblemParams, s: float) -> NonlinearityEval:
    """Return ``(f(s), F(s), f'(s))`` for the configured family."""
    if not math.isfinite(s):
        raise InvalidInputError(f"s must be finite, got {s!r}")
    if s < 0:
        raise InvalidInputError(f"s must be nonnegative, got {s!r}")
    return NonlinearityEval(
        float(f_values(params, s)),
        float(F_values(params, s)),
        float(df_values(params, s)),
    )


def validate_params(params: ProblemParams) -> list[str]:
    """List every violated standing hypothesis; empty when all hold."""
    problems = []
    n, p, q, theta = params.n, params.p, params.q, params.theta
    p_star = params.p_star

    if not p > 1:
        problems.append(f"p = {p} must exceed 1")
    if n < 3 and not params.test_mode:
        problems.append(f"n = {n} requires test_mode (n >= 3 otherwise)")
    if not p < n and not params.test_mode:
        problems.append(f"p = {p} must be below n = {n}")
    if not p < q < p_star:
        problems.append(f"q = {q} must lie strictly inside (p, p*) = ({p}, {p_star})")
    if not theta > p:
        problems.append(f"theta = {theta} must exceed p = {p}")

    terms = params.nonlinearity.terms
    if isinstance(params.nonlinearity, PurePower):
        if params.nonlinearity.q != q:
            problems.append(
                f"PurePower exponent {params.nonlinearity.q} differs from q = {q}"
            )
    else:
        if not terms or not any(c > 0 for c, _ in terms):
            problems.append("PowerSum needs at least one positive coefficient")
        for c, e in terms:
            if c < 0:
                problems.append(f"PowerSum coefficient {c} is negative")
            if not p < e < p_star:
                problems.append(
                    f"PowerSum exponent {e} must lie strictly inside (p, p*) = ({p}, {p_star})"
                )
            if e > q:
                problems.append(f"PowerSum exponent {e} exceeds the growth bound q = {q}")

    if problems:
        return problems

    s = SAMPLE_GRID
    f = f_values(params, s)
    F = F_values(params, s)
    gap = theta * F - f * s
    # relative to the size of f(s)s so the check is scale-free
    bad = gap > AR_TOLERANCE * np.maximum(f * s, np.finfo(float).tiny)
    if np.any(bad):
        worst = s[np.argmax(np.where(bad, gap / (f * s), -np.inf))]
        problems.append(
            f"Ambrosetti-Rabinowitz condition theta*F(s) <= f(s)s fails, e.g. at s = {worst:.3g}"
        )
    if np.any(F <= 0):
        problems.append("F(s) must be positive for s > 0")

    small = s[s <= 1e-3]
    ratio_small = f_values(params, small) / small ** (p - 1)
    if not ratio_small[0] < 1e-3 * max(1.0, ratio_small[-1]):
        problems.append("f(s)/s^(p-1) does not vanish as s -> 0+")
    large = s[s >= 1e3]
    ratio_large = f_values(params, large) / large ** (q - 1)
    if not np.all(np.diff(ratio_large) <= 1e-12 * ratio_large[:-1]):
        problems.append("f(s)/s^(q-1) is not bounded as s -> infinity")
    return problems
