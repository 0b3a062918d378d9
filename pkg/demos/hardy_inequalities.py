"""Hardy and dual Hardy ratios with graded quadrature."""
import numpy as np
from scipy.special import gamma

from obliquereg.norms import PiecewiseConstant, dual_hardy_check, hardy_check

one = lambda t: np.ones_like(t)
for p in (1.0, 1.5, 2.0, 3.0, 4.0):
    print(f"p = {p:3.1f}  dual ratio {dual_hardy_check(one, p):.10f}  Gamma(p+1)^(1/p) {gamma(p + 1) ** (1 / p):.10f}")

rng = np.random.default_rng(1)
for p in (1.5, 2.0, 4.0):
    worst = max(hardy_check(PiecewiseConstant.random(rng), p) for _ in range(200))
    print(f"p = {p:3.1f}  max Hardy ratio over 200 step functions {worst:.4f}  <=  p/(p-1) = {p / (p - 1):.4f}")
