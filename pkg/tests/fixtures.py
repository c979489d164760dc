"""Frozen oracle values.

``W0_3D_CUBIC`` comes from ``tests/oracle_shooting.py`` (fixed-step RK4 with
h = 1e-4, multisection to a 6.6e-12 bracket), computed before the package
solver existed.
"""
import math

W0_3D_CUBIC = 4.337387679976786

# 1-D soliton w = sqrt(2) sech(x) of -w'' + w = w^3, integrals over the line
SOLITON_W0 = math.sqrt(2.0)
SOLITON_A = 2.0 / 3.0  # int |w'|^2 / 2
SOLITON_B = 4.0  # int w^2
SOLITON_C = 16.0 / 3.0  # int w^4
SOLITON_PHI = 4.0 / 3.0  # int w^4 / 4
SOLITON_ENERGY = 4.0 / 3.0
