"""Energies and the identities a ground state must satisfy.

With beta(xi) = |xi|^p / p the energy of u is
    I(u) = a A + (V/p) B - K Phi,
A = int |grad u|^p / p, B = int u^p, Phi = int F(u).
A ground state sits on the Nehari manifold and satisfies the Pohozaev
identity; a non-solution, even a slightly rescaled one, does not.
"""
from dataclasses import replace

from peakscope.energy import (
    Coordinate,
    energy_breakdown,
    minimax_crosscheck,
    mountain_pass_level,
    nehari_project,
    nehari_residual,
    pohozaev_residual,
    pucci_serrin_residual,
)
from peakscope.model import ProblemParams
from peakscope.radial_ode import CANONICAL, FrozenCoefficients, shoot_canonical

soliton_params = ProblemParams(n=1, p=2, q=4, theta=4, test_mode=True)
soliton = shoot_canonical(soliton_params)
b = energy_breakdown(soliton)
print(f"soliton: A = {b.A:.12f} (2/3), B = {b.B:.12f} (4), Phi = {b.Phi:.12f} (4/3)")
print(f"         I = {b.I_value:.12f} (4/3)")
ratio = mountain_pass_level(FrozenCoefficients(1, 4, 1), soliton_params, soliton) / b.I_value
print(f"         level at V = 4 over level at V = 1: {ratio:.12f} (4^(3/2) = 8)")

params = ProblemParams(n=3, p=2, q=4, theta=4)
w = shoot_canonical(params)
b = energy_breakdown(w)
print(f"\n3-D ground state: I = {b.I_value:.10f}")
print(f"  Nehari residual   {nehari_residual(b, params, CANONICAL):.1e}")
print(f"  Pohozaev residual {pohozaev_residual(w):.1e}")
print(f"  Nehari projection theta* = {nehari_project(w):.12f}")
print(f"  perturbed family minimum {minimax_crosscheck(w):.10f} (never below I)")

bumped = replace(w, w=1.1 * w.w, w_prime=1.1 * w.w_prime)
print(f"  1.1 * ground state: Pohozaev residual {pohozaev_residual(bumped):.3f}")

# Coordinate test fields h = T(x/R) e_k: over all of R^n the identity is
# trivially balanced by symmetry; on a half-space what is left are the
# cutoff terms, which die off as R grows.
for frac in (0.25, 0.5, 0.75):
    R = frac * w.r_max
    print(f"  half-space coordinate residual at R = {R:5.1f}: "
          f"{pucci_serrin_residual(w, h_field=Coordinate(1, R)):.2e}")
