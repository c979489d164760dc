import math

import numpy as np
import pytest
from scipy.optimize import minimize

from peakscope.coeff_lang import CoefficientField, PositivityError
from peakscope.energy import energy_breakdown
from peakscope.model import PowerSum, ProblemParams
from peakscope.radial_ode import FrozenCoefficients, shoot_frozen, solve_frozen
from peakscope.sigma import (
    GroundStates,
    clarke_estimate,
    gamma_pm,
    ground_states,
    min_norm_point,
    sigma_at,
    sigma_closed_form,
    sigma_grad_fd,
    sigma_lipschitz_probe,
    sigma_value,
)

import fixtures as fx

WELL = "1 + x1^2 + x2^2 + x3^2"


def field(alpha="1", V="1", K="1", n=3):
    return CoefficientField.from_strings(alpha, V, K, n)


@pytest.fixture(scope="module")
def sigma1(cubic3):
    return ground_states(cubic3).canonical_breakdown.I_value


def test_constant_field_is_flat(cubic3, sigma1):
    f = field()
    for z in ([0, 0, 0], [0.5, -2, 3]):
        sample = sigma_at(f, cubic3, z)
        assert sample.sigma == pytest.approx(sigma1, rel=1e-12)
        assert sample.sigma > 0
        assert sample.sigma == pytest.approx(sample.ground_energy.I_value, rel=1e-8)
        np.testing.assert_array_equal(sample.grad_fd, 0.0)


def test_one_dimensional_V_ratio(soliton_params):
    low = sigma_at(field(V="1", n=1), soliton_params, [0.0], with_gradient=False).sigma
    high = sigma_at(field(V="4", n=1), soliton_params, [0.0], with_gradient=False).sigma
    assert low == pytest.approx(fx.SOLITON_ENERGY, abs=1e-9)
    assert high == pytest.approx(8 * fx.SOLITON_ENERGY, abs=1e-8)


def test_K_doubling_halves_sigma(cubic3, sigma1):
    assert sigma_value(field(K="2"), cubic3, [0, 0, 0]) == pytest.approx(sigma1 / 2, rel=1e-12)


def test_closed_form_matches_quadrature_random_triples(cubic3):
    st = ground_states(cubic3)
    rng = np.random.default_rng(11)
    for _ in range(25):
        frozen = FrozenCoefficients(*np.exp(rng.uniform(-1.5, 1.5, 3)))
        closed = sigma_closed_form(cubic3, frozen, st.canonical_breakdown)
        direct = energy_breakdown(solve_frozen(st.canonical, frozen)).I_value
        assert closed == pytest.approx(direct, rel=1e-8)


def test_rejected_point(cubic3):
    with pytest.raises(PositivityError) as info:
        sigma_at(field(V="x1"), cubic3, [-1.0, 0, 0])
    assert info.value.name == "V"


def test_gradient_vanishes_at_well_bottom(cubic3):
    grad = sigma_grad_fd(field(V=WELL), cubic3, [0, 0, 0])
    assert np.max(np.abs(grad)) <= 1e-6


def test_gradient_matches_chain_rule(cubic3, sigma1):
    # Sigma = sigma1 * V^{1/2} for a = K = 1, p = 2, q = 4, n = 3
    grad = sigma_grad_fd(field(V=WELL), cubic3, [1.0, 0, 0])
    dsigma_dV = sigma1 / (2 * math.sqrt(2.0))
    assert grad[0] == pytest.approx(dsigma_dV * 2.0, rel=1e-4)
    assert abs(grad[1]) < 1e-8 and abs(grad[2]) < 1e-8


def test_gradient_shrinks_step_near_boundary(cubic3):
    # V = x1 is positive for x1 > 0; a default step at 1e-5 would cross zero
    grad = sigma_grad_fd(field(V="x1"), cubic3, [5e-5, 0, 0])
    assert np.all(np.isfinite(grad))


def test_gradient_richardson_on_surrogate():
    grad = sigma_grad_fd(None, None, np.array([0.3, -0.4]), step=0.1,
                         sigma_fn=lambda z: np.exp(z[0]) * np.sin(z[1]))
    exact = np.array([np.exp(0.3) * np.sin(-0.4), np.exp(0.3) * np.cos(-0.4)])
    np.testing.assert_allclose(grad, exact, rtol=1e-6)


def test_gamma_constant_field(cubic3):
    assert gamma_pm(field(), cubic3, [0.2, 0.1, 0], [1, 0, 0]) == (0.0, 0.0)


def test_gamma_well_direction(cubic3, canonical3):
    z = np.array([1.0, 0, 0])
    B = energy_breakdown(solve_frozen(canonical3, FrozenCoefficients(1, 2, 1))).B
    lo, hi = gamma_pm(field(V=WELL), cubic3, z, [1, 0, 0])
    assert lo == hi == pytest.approx(2 * B / 2, rel=1e-10)


def test_gamma_is_odd_in_direction(cubic3):
    f = field(alpha="1 + 0.2*sin(x2)", V=WELL, K="1 + 0.1*x3")
    w = np.array([1.0, 2.0, -2.0]) / 3.0
    z = [0.3, -0.5, 0.2]
    assert gamma_pm(f, cubic3, z, -w)[0] == pytest.approx(-gamma_pm(f, cubic3, z, w)[0])


def test_gamma_requires_unit_direction(cubic3):
    with pytest.raises(ValueError):
        gamma_pm(field(), cubic3, [0, 0, 0], [1, 1, 0])


def test_gamma_matches_directional_difference(cubic3):
    f = field(alpha="1 + 0.2*sin(x2)", V=WELL, K="1 + 0.1*x3")
    rng = np.random.default_rng(3)
    for _ in range(5):
        z = rng.uniform(-1, 1, 3)
        w = rng.standard_normal(3)
        w /= np.linalg.norm(w)
        h = 1e-4
        fd = (sigma_value(f, cubic3, z + h * w) - sigma_value(f, cubic3, z - h * w)) / (2 * h)
        s = sigma_value(f, cubic3, z)
        assert abs(gamma_pm(f, cubic3, z, w)[0] - fd) <= max(1e-4, 1e-3 * abs(s))


@pytest.mark.parametrize("name, sign", [("alpha", 1), ("V", 1), ("K", -1)])
def test_monotone_in_each_coefficient(cubic3, name, sign):
    kw = {"alpha": "1", "V": "1", "K": "1"}
    kw[name] = "exp(x1)"
    f = field(**kw)
    values = [sigma_value(f, cubic3, [t, 0, 0]) for t in np.linspace(-1, 1, 9)]
    assert np.all(sign * np.diff(values) >= 0)


def test_power_sum_landscape_and_cache():
    params = ProblemParams(n=3, p=2, q=4, theta=3, nonlinearity=PowerSum([(1, 3), (1, 4)]))
    states = GroundStates(params)
    f = field(V="1 + 0.5*x1^2")
    sample = sigma_at(f, params, [0.4, 0, 0], states=states, with_gradient=False)
    direct = energy_breakdown(shoot_frozen(params, sample.frozen)).I_value
    assert sample.sigma == pytest.approx(direct, rel=1e-10)
    before = len(states._cache)
    sigma_value(f, params, [0.4, 0, 0], states)
    assert len(states._cache) == before


def _qp_min_norm(P):
    m = P.shape[0]
    res = minimize(
        lambda lam: float(np.sum((lam @ P) ** 2)),
        np.full(m, 1.0 / m),
        jac=lambda lam: 2 * P @ (lam @ P),
        bounds=[(0, 1)] * m,
        constraints=[{"type": "eq", "fun": lambda lam: lam.sum() - 1}],
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 500},
    )
    return res.x @ P


def test_min_norm_point_against_generic_qp():
    rng = np.random.default_rng(5)
    for _ in range(30):
        P = rng.standard_normal((rng.integers(2, 9), rng.integers(1, 5))) + rng.uniform(-2, 2)
        x, weights = min_norm_point(P)
        assert np.all(weights >= 0) and weights.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(weights @ P, x, atol=1e-12)
        ref = _qp_min_norm(P)
        assert np.linalg.norm(x) <= np.linalg.norm(ref) + 1e-7


def test_min_norm_point_simple_cases():
    x, _ = min_norm_point([[1.0, 0.0], [-1.0, 0.0]])
    np.testing.assert_allclose(x, [0, 0], atol=1e-15)
    x, _ = min_norm_point([[1.0, 1.0], [1.0, -1.0]])
    np.testing.assert_allclose(x, [1, 0], atol=1e-15)


def test_clarke_surrogate_absolute_value():
    est = clarke_estimate(None, None, np.zeros(3), 0.1, 9, seed=4, sigma_fn=lambda z: abs(z[0]))
    assert est.contains_zero
    assert set(np.round(est.sample_gradients[1:, 0], 6)) == {-1.0, 1.0}
    np.testing.assert_array_equal(est.sample_gradients[:, 1:], 0.0)


def test_clarke_quadratic_well():
    well = lambda z: float(np.sum((z - 0.3) ** 2))
    assert clarke_estimate(None, None, np.full(3, 0.3), 1e-3, 7, sigma_fn=well).contains_zero
    off = clarke_estimate(None, None, np.zeros(3), 1e-3, 7, sigma_fn=well)
    assert not off.contains_zero


def test_clarke_smooth_point_collapses_to_gradient(cubic3):
    f = field(V=WELL)
    z = np.array([0.5, 0.2, -0.1])
    radius = 1e-3
    est = clarke_estimate(f, cubic3, z, radius, 7, seed=2)
    grads = est.sample_gradients
    diameter = max(np.linalg.norm(a - b) for a in grads for b in grads)
    # Hessian of Sigma is bounded by a few times sigma1 on this landscape
    assert diameter <= 10 * radius * 2 * np.max(np.abs(grads))
    np.testing.assert_allclose(est.min_norm_point, sigma_grad_fd(f, cubic3, z), rtol=1e-2)
    assert not est.contains_zero


def test_clarke_negation_symmetry():
    fn = lambda z: abs(z[0]) + 0.3 * z[1]
    est = clarke_estimate(None, None, np.zeros(2), 0.1, 9, seed=8, sigma_fn=fn)
    neg = clarke_estimate(None, None, np.zeros(2), 0.1, 9, seed=8, sigma_fn=lambda z: -fn(z))
    np.testing.assert_allclose(neg.sample_gradients, -est.sample_gradients)
    np.testing.assert_allclose(neg.min_norm_point, -est.min_norm_point, atol=1e-15)
    np.testing.assert_allclose(est.negated().min_norm_point, neg.min_norm_point, atol=1e-15)


def test_clarke_seed_stable():
    fn = lambda z: abs(z[0]) + z[1] ** 2
    a = clarke_estimate(None, None, np.zeros(2), 0.1, 9, seed=21, sigma_fn=fn)
    b = clarke_estimate(None, None, np.zeros(2), 0.1, 9, seed=21, sigma_fn=fn)
    np.testing.assert_array_equal(a.sample_points, b.sample_points)
    assert a.to_dict() == b.to_dict()


def test_clarke_identical_samples_collapse():
    est = clarke_estimate(None, None, np.zeros(2), 0.1, 5, sigma_fn=lambda z: 2 * z[0])
    assert est.degenerate
    np.testing.assert_allclose(est.min_norm_point, [2.0, 0.0])


def test_clarke_preconditions():
    with pytest.raises(ValueError):
        clarke_estimate(None, None, np.zeros(3), 0.1, 6, sigma_fn=lambda z: 0.0)
    with pytest.raises(ValueError):
        clarke_estimate(None, None, np.zeros(3), 0.0, 7, sigma_fn=lambda z: 0.0)


def test_lipschitz_constant_field(cubic3):
    assert sigma_lipschitz_probe(field(), cubic3, [(-1, 1)] * 3, 3) == 0.0


def test_lipschitz_well_matches_closed_form(cubic3, sigma1):
    box = [(-1, 1)] * 3
    coarse = sigma_lipschitz_probe(field(V=WELL), cubic3, box, 5)
    fine = sigma_lipschitz_probe(field(V=WELL), cubic3, box, 9)
    # axis difference quotients are bounded by max |d Sigma / d z_k| = sigma1 / sqrt(2)
    bound = sigma1 / math.sqrt(2)
    assert abs(fine - bound) <= 0.25 * bound
    assert abs(fine - coarse) <= 0.2 * fine


def test_lipschitz_refinement_stable_on_smooth_field(cubic3):
    f = field(alpha="1 + 0.3*sin(x1)", V="2 + cos(x2)", K="1 + 0.2*x3^2")
    box = [(-1, 1)] * 3
    coarse = sigma_lipschitz_probe(f, cubic3, box, 5)
    fine = sigma_lipschitz_probe(f, cubic3, box, 9)
    assert np.isfinite(fine) and abs(fine - coarse) <= 0.2 * fine
