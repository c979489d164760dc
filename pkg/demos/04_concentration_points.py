"""Searching for concentration points.

A concentration point must be a zero of
    N(z) = grad alpha A + grad V B / p - grad K Phi,
so grad alpha, grad V and grad K are linearly dependent there.  N is the
gradient of Sigma on the ground-state branch; at kinks of Sigma the role of
the gradient is taken by the sampled Clarke generalized gradient.
"""
import numpy as np

from peakscope.coeff_lang import CoefficientField
from peakscope.locator import certify, gram_rank, scan_candidates
from peakscope.model import ProblemParams
from peakscope.sigma import clarke_estimate

params = ProblemParams(n=3, p=2, q=4, theta=4)

well = CoefficientField.from_strings("1", "1 + (x1-0.3)^2 + (x2+0.2)^2 + (x3-0.1)^2", "1", 3)
result = scan_candidates(well, params, [(-1, 1)] * 3, 8)
for rep in result:
    checks = certify(rep, well, params)
    print(f"candidate {np.round(rep.z, 9)}: |N| = {rep.N_norm:.1e}, rank {rep.gram_rank}, "
          f"{len(rep.refinement_trace)} iterates")
    for name, check in checks.items():
        if name != "all_pass":
            print(f"  {name:10s} {'pass' if check['pass'] else 'FAIL'}  {check['value']}")

# Competing alpha and K slopes move the zero of N away from the bottom of V.
tilted = CoefficientField.from_strings("1 + 0.2*x1", "1 + x1^2 + x2^2 + x3^2", "1 + 0.2*x2", 3)
for rep in scan_candidates(tilted, params, [(-1, 1)] * 3, 6):
    print(f"\ntilted landscape: candidate {np.round(rep.z, 6)}, gradient rank {rep.gram_rank}")

# A line of zeros is reported once, with the direction it extends in.
line = CoefficientField.from_strings("1", "1 + x1^2", "1 + x2^2", 3)
for rep in scan_candidates(line, params, [(-1, 1)] * 3, 5):
    print(f"line of zeros through {np.round(rep.z, 6) + 0.0}, direction {np.round(rep.degenerate_directions, 6).tolist()}")

print("\ngradient ranks of three constructed triples:")
for alpha, V, K in (("1", "1 + x1", "1 + 2*x1"), ("1 + x3", "1 + x1", "1 + x2"), ("1 + x1 + x2", "1 + x1", "1 + x2")):
    print(f"  alpha={alpha!r:12} V={V!r:10} K={K!r:10} -> {gram_rank(CoefficientField.from_strings(alpha, V, K, 3), np.zeros(3))}")

# The Clarke estimator on a kink: |z1| has gradients +-e1 on either side.
est = clarke_estimate(None, None, np.zeros(2), 0.1, 7, seed=1, sigma_fn=lambda z: abs(z[0]))
print(f"\n|z1| at the origin: min-norm point {est.min_norm_point}, contains zero: {est.contains_zero}")
est = clarke_estimate(None, None, np.array([0.5, 0.0]), 0.1, 7, seed=1, sigma_fn=lambda z: abs(z[0]))
print(f"|z1| at (0.5, 0): min-norm point {est.min_norm_point}, contains zero: {est.contains_zero}")
