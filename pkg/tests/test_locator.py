import numpy as np
import pytest

from peakscope.coeff_lang import CoefficientField
from peakscope.energy import energy_breakdown
from peakscope.locator import (
    CandidateReport,
    certify,
    gram_rank,
    necessary_vector,
    report_to_json,
    scan_candidates,
)
from peakscope.radial_ode import CANONICAL, FrozenCoefficients, solve_frozen
from peakscope.sigma import ground_states, sigma_grad_fd, sigma_value

Z_STAR = np.array([0.3, -0.2, 0.1])
WELL_AT_STAR = "1 + (x1-0.3)^2 + (x2+0.2)^2 + (x3-0.1)^2"


def field(alpha="1", V="1", K="1", n=3):
    return CoefficientField.from_strings(alpha, V, K, n)


@pytest.fixture(scope="module")
def well_scan(cubic3):
    f = field(V=WELL_AT_STAR)
    return f, scan_candidates(f, cubic3, [(-1, 1)] * 3, 8)


def test_necessary_vector_vanishes_at_well_bottom(cubic3):
    np.testing.assert_array_equal(
        necessary_vector(field(V="1 + x1^2 + x2^2 + x3^2"), cubic3, [0, 0, 0]), 0.0
    )


def test_necessary_vector_off_center(cubic3, canonical3):
    f = field(V="1 + x1^2 + x2^2 + x3^2")
    z = np.array([1.0, 0, 0])
    N = necessary_vector(f, cubic3, z)
    B = energy_breakdown(solve_frozen(canonical3, FrozenCoefficients(1, 2, 1))).B
    np.testing.assert_allclose(N, [B, 0, 0], rtol=1e-10, atol=1e-14)
    h = 1e-4
    e = np.array([1.0, 0, 0])
    fd = (sigma_value(f, cubic3, z + h * e) - sigma_value(f, cubic3, z - h * e)) / (2 * h)
    assert N[0] == pytest.approx(fd, rel=1e-6)


def test_constructed_cancellation(cubic3):
    b = ground_states(cubic3).breakdown(CANONICAL)
    slope = (b.B / 2) / b.Phi
    f = field(V="1 + x1", K=f"1 + {slope!r}*x1")
    N = necessary_vector(f, cubic3, [0, 0, 0])
    grads = f.gradients([0, 0, 0])
    assert np.linalg.norm(grads[1]) > 0 and np.linalg.norm(grads[2]) > 0
    assert np.max(np.abs(N)) <= 1e-12


def test_gram_rank_cases():
    assert gram_rank(field(V="1 + x1", K="2 + 3*x1"), [0.2, 0, 0]) == (1, True)
    assert gram_rank(field(alpha="1 + x3", V="1 + x1", K="1 + x2"), [0, 0, 0]) == (3, False)
    assert gram_rank(field(alpha="1 + x1 + x2", V="1 + x1", K="1 + x2"), [0, 0, 0]) == (2, True)
    assert gram_rank(field(), [0, 0, 0]) == (0, True)


def test_report_invariants_enforced():
    with pytest.raises(AssertionError):
        CandidateReport(
            z=np.zeros(3), N=np.zeros(3), N_norm=0.0, gram_rank=3, lin_dep=False,
            grad_sigma_fd=np.zeros(3), in_C_set=True,
        )


def test_well_has_single_candidate(well_scan):
    f, result = well_scan
    assert not result.degenerate
    assert len(result) == 1
    (rep,) = result
    assert np.linalg.norm(rep.z - Z_STAR) <= 1e-6
    assert np.linalg.norm(rep.grad_sigma_fd) <= 1e-4
    assert rep.lin_dep and rep.in_C_set
    assert rep.refinement_trace[-1][1] <= result.tol


def test_well_candidate_certifies(cubic3, well_scan):
    f, result = well_scan
    checks = certify(result.candidates[0], f, cubic3)
    assert checks["all_pass"], checks
    assert '"certification"' in report_to_json(result.candidates[0])


def test_candidate_consistency_with_gradient(cubic3, well_scan):
    f, result = well_scan
    for rep in result:
        tol = np.maximum(1e-3, 1e-2 * np.abs(rep.N) + 1e-2 * np.abs(rep.grad_sigma_fd))
        assert np.all(np.abs(rep.N - rep.grad_sigma_fd) <= tol)


def test_constant_field_is_degenerate(cubic3):
    result = scan_candidates(field(), cubic3, [(-1, 1)] * 3, 4)
    assert result.degenerate and len(result) == 0


def test_line_of_zeros_reported_once_with_direction(cubic3):
    result = scan_candidates(field(V="1 + x1^2", K="1 + x2^2"), cubic3, [(-1, 1)] * 3, 5)
    assert len(result) == 1
    (rep,) = result
    assert abs(rep.z[0]) <= 1e-6 and abs(rep.z[1]) <= 1e-6
    assert len(rep.degenerate_directions) == 1
    np.testing.assert_allclose(np.abs(rep.degenerate_directions[0]), [0, 0, 1], atol=1e-8)


def test_candidates_equal_critical_points_of_V(cubic3):
    # two wells along x1; V critical points at -0.5, 0 (max) and 0.5 restricted to x2 = x3 = 0
    f = field(V="1 + (x1^2 - 0.25)^2 + x2^2 + x3^2")
    result = scan_candidates(f, cubic3, [(-1, 1)] * 3, 9)
    found = sorted(round(float(r.z[0]), 6) for r in result)
    assert found == [-0.5, 0.0, 0.5]
    for rep in result:
        np.testing.assert_allclose(rep.z[1:], 0, atol=1e-6)


def test_nonsmooth_point_marked_clarke_only(cubic3):
    result = scan_candidates(field(V="1 + abs(x1) + x2^2 + x3^2"), cubic3, [(-1, 1)] * 3, 5)
    assert any(r.clarke_only for r in result)


def test_forced_non_candidate_fails_gradient_check(cubic3):
    f = field(V=WELL_AT_STAR)
    z = np.array([-1.0, 1.0, 1.0])
    N = necessary_vector(f, cubic3, z)
    rank, dep = gram_rank(f, z)
    rep = CandidateReport(
        z=z, N=N, N_norm=float(np.linalg.norm(N)), gram_rank=rank, lin_dep=dep,
        grad_sigma_fd=sigma_grad_fd(f, cubic3, z), in_C_set=False, refined=False,
    )
    checks = certify(rep, f, cubic3)
    assert not checks["grad_sigma"]["pass"]
    assert not checks["all_pass"]
    assert checks["pohozaev"]["pass"]


def test_constant_field_point_certifies(cubic3):
    f = field()
    z = np.array([0.1, 0.2, 0.3])
    rep = CandidateReport(
        z=z, N=np.zeros(3), N_norm=0.0, gram_rank=0, lin_dep=True,
        grad_sigma_fd=np.zeros(3), in_C_set=True,
    )
    assert certify(rep, f, cubic3)["all_pass"]


def test_scan_preconditions(cubic3):
    with pytest.raises(ValueError):
        scan_candidates(field(), cubic3, [(-1, 1)] * 3, 3)
    with pytest.raises(ValueError):
        scan_candidates(field(), cubic3, [(1, 1), (-1, 1), (-1, 1)], 4)
