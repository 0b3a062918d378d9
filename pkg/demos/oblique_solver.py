"""Manufactured-solution convergence of the oblique derivative solver and the model-problem probe."""
import math

import numpy as np

from obliquereg.geometry import GraphDomain, ObliqueField, cyl_neighborhood
from obliquereg.solver import EllipticOperator, manufactured, probe_main_estimate, probe_model_problem, solve_oblique

op = EllipticOperator.laplacian()
bc = ObliqueField.constant([math.sin(0.3), -math.cos(0.3)])
exact, f, g = manufactured("sin_cosh", op, bc)
cyl = cyl_neighborhood(GraphDomain.flat(0.0, delta=0.9, base_radius=10.0), np.zeros(2), 1.0)

prev = None
for n in (17, 33, 65, 129):
    sol = solve_oblique(op, bc, g, cyl, n=n, f=f, dirichlet=exact)
    err = float(np.max(np.abs(sol.values - exact(sol.y))))
    N = probe_main_estimate(cyl, op, bc, f, g, n=n, dirichlet=exact)["N_emp"]
    order = "" if prev is None else f"order {math.log2(prev / err):.2f}"
    print(f"n = {n:3d}  max error {err:.3e}  N_emp {N:.4f}  {order}")
    prev = err

for eps0 in (0.01, 0.05, 0.1):
    cyl = cyl_neighborhood(GraphDomain.sawtooth(eps0, 0.5, phase=0.1, delta=1.0, base_radius=10.0),
                           np.zeros(2), 1.0)
    rep = probe_model_problem(cyl, n=65)
    print(f"eps0 = {eps0:4.2f}  estimate ratio {rep['ratio']:.4f}  Hardy term {rep['hardy_ratio']:.5f}  "
          f"coupling term {rep['coupling_ratio']:.5f}")
