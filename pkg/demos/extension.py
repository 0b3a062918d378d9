"""Neumann extension of boundary data: trace residual and the extension constant under refinement."""
import numpy as np

from obliquereg.extension import extend_neumann
from obliquereg.geometry import GraphDomain, cyl_neighborhood
from obliquereg.regdist import RegDistField

cyl = cyl_neighborhood(GraphDomain.sawtooth(0.05, 0.5, phase=0.1, delta=1.0, base_radius=10.0),
                       np.zeros(2), 1.0)
rd = RegDistField(cyl.domain)
g = lambda yp: np.sin(3 * yp[..., 0])
print("   n   sup|D_d v - g|      N_ext")
for n in (17, 33, 65, 129):
    res = extend_neumann(g, cyl, rd, p=2.0, n=n)
    print(f"{n:4d}   {res.trace_residual_sup:.3e}    {res.N_ext:.4f}")
