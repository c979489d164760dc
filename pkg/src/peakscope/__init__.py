"""Ground states, ground-state energies and concentration-point search for
quasilinear elliptic problems with spatially varying coefficients."""
from .coeff_lang import CoefficientField, ParseError, PositivityError, parse
from .energy import (
    Coordinate,
    Dilation,
    EnergyBreakdown,
    energy_breakdown,
    mountain_pass_level,
    nehari_project,
    nehari_residual,
    pohozaev_residual,
    pucci_serrin_residual,
)
from .locator import CandidateReport, certify, gram_rank, necessary_vector, scan_candidates
from .model import PowerSum, ProblemParams, PurePower, validate_params
from .radial_ode import (
    FrozenCoefficients,
    RadialProfile,
    shoot_canonical,
    shoot_frozen,
    solve_frozen,
)
from .sigma import (
    clarke_estimate,
    gamma_pm,
    sigma_at,
    sigma_grad_fd,
    sigma_lipschitz_probe,
)

__version__ = "0.1.0"
