import math

import numpy as np
import pytest
from dataclasses import replace

from peakscope.model import PowerSum, ProblemParams
from peakscope.radial_ode import (
    CANONICAL,
    FrozenCoefficients,
    NoGroundStateError,
    fit_decay_rate,
    ode_residual,
    predicted_decay_rate,
    read_profile_csv,
    scaling_factors,
    shoot_canonical,
    shoot_frozen,
    solve_frozen,
    write_profile_csv,
)

from fixtures import SOLITON_W0, W0_3D_CUBIC


def test_soliton_shooting_value(soliton):
    assert soliton.shooting_value == pytest.approx(SOLITON_W0, abs=1e-8)


def test_soliton_profile_is_sech(soliton):
    r = soliton.r[soliton.r < 20]
    w = soliton.w[: r.size]
    assert np.max(np.abs(w - math.sqrt(2) / np.cosh(r))) < 1e-7


def test_three_dimensional_value_matches_oracle(canonical3):
    assert canonical3.shooting_value == pytest.approx(W0_3D_CUBIC, abs=1e-8)


def test_profile_invariants(canonical3):
    assert np.all(canonical3.w > 0)
    assert np.all(np.diff(canonical3.w) <= 0)
    assert canonical3.w_prime[0] < 0
    assert canonical3.w[-1] < 1e-8 * canonical3.w[0]


def test_small_radius_slope_matches_series(canonical3):
    # w'(r) ~ -(r/n)(f(w0) - w0) near the origin for p = 2
    w0 = canonical3.w[0]
    r0 = canonical3.r[0]
    expected = -(r0 / 3) * (w0**3 - w0)
    assert canonical3.w_prime[0] == pytest.approx(expected, rel=1e-4)


def test_canonical_residual(canonical3, soliton):
    assert ode_residual(canonical3) <= 1e-6
    assert ode_residual(soliton) <= 1e-6


def test_perturbed_node_raises_residual(canonical3):
    w = canonical3.w.copy()
    # a node near the peak, where the reaction term is largest
    w[np.searchsorted(canonical3.r, 0.1)] += 1e-2
    assert ode_residual(replace(canonical3, w=w)) > 1e-3


def test_zero_profile_has_zero_residual(canonical3):
    zero = replace(canonical3, w=np.zeros_like(canonical3.w), w_prime=np.zeros_like(canonical3.w))
    assert ode_residual(zero) == 0.0


def test_identity_scaling(canonical3):
    u = solve_frozen(canonical3, CANONICAL)
    np.testing.assert_array_equal(u.w, canonical3.w)
    np.testing.assert_array_equal(u.r, canonical3.r)


@pytest.mark.parametrize(
    "frozen, gamma, lam",
    [((1, 4, 1), 2.0, 0.5), ((4, 1, 1), 1.0, 2.0)],
)
def test_scaling_examples(cubic3, canonical3, frozen, gamma, lam):
    frozen = FrozenCoefficients(*frozen)
    assert scaling_factors(cubic3, frozen) == pytest.approx((gamma, lam))
    u = solve_frozen(canonical3, frozen)
    np.testing.assert_allclose(u.w, gamma * canonical3.w)
    np.testing.assert_allclose(u.r, lam * canonical3.r)
    assert ode_residual(u) <= 1e-6


def test_scaling_invariance_random_triples(canonical3):
    rng = np.random.default_rng(7)
    for _ in range(10):
        frozen = FrozenCoefficients(*np.exp(rng.uniform(-1, 1, 3)))
        assert ode_residual(solve_frozen(canonical3, frozen)) <= 1e-6


def test_decay_canonical(canonical3):
    fitted, predicted = fit_decay_rate(canonical3)
    assert predicted == -1.0
    assert fitted == pytest.approx(-1.0, rel=0.02)


def test_decay_scaled(canonical3):
    fitted, predicted = fit_decay_rate(solve_frozen(canonical3, FrozenCoefficients(1, 4, 1)))
    assert predicted == pytest.approx(-2.0)
    assert fitted == pytest.approx(-2.0, rel=0.02)


def test_decay_soliton(soliton):
    fitted, _ = fit_decay_rate(soliton)
    assert fitted == pytest.approx(-1.0, abs=1e-6)


def test_predicted_rate_formula():
    assert predicted_decay_rate(3.0, FrozenCoefficients(2.0, 8.0, 1.0)) == pytest.approx(
        (8.0 / (2.0 * 2.0)) ** (1 / 3)
    )


@pytest.mark.parametrize("n, p, q", [(3, 1.5, 2.5), (4, 3.0, 5.0)])
def test_non_quadratic_p(n, p, q):
    params = ProblemParams(n=n, p=p, q=q, theta=q)
    prof = shoot_canonical(params)
    assert np.all(prof.w > 0) and np.all(np.diff(prof.w) <= 0)
    assert ode_residual(prof) <= 1e-6
    fitted, predicted = fit_decay_rate(prof)
    assert fitted == pytest.approx(predicted, rel=0.02)


def test_power_sum_direct_shooting():
    params = ProblemParams(n=3, p=2, q=4, theta=3, nonlinearity=PowerSum([(1, 3), (1, 4)]))
    frozen = FrozenCoefficients(1.0, 2.0, 1.5)
    prof = shoot_frozen(params, frozen)
    assert ode_residual(prof) <= 1e-6
    assert solve_frozen(shoot_canonical(params), frozen).shooting_value == pytest.approx(
        prof.shooting_value, rel=1e-12
    )


def test_refinement_stability(cubic3, canonical3):
    coarse = shoot_frozen(cubic3, grid_per_decay_length=100)
    assert abs(coarse.shooting_value - canonical3.shooting_value) <= 10 * 1e-12 * W0_3D_CUBIC


def test_tiny_search_range_reports_no_ground_state(cubic3):
    with pytest.raises(NoGroundStateError):
        shoot_frozen(cubic3, search_factor=1.01)


def test_csv_round_trip(tmp_path, canonical3, cubic3):
    path = tmp_path / "profile.csv"
    write_profile_csv(canonical3, path)
    text = path.read_bytes()
    assert text.startswith(b"r,w,w_prime\n") and b"\r" not in text
    back = read_profile_csv(path, cubic3, CANONICAL)
    np.testing.assert_array_equal(back.w, canonical3.w)
    np.testing.assert_array_equal(back.w_prime, canonical3.w_prime)
    np.testing.assert_array_equal(back.r, canonical3.r)
