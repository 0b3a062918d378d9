"""Mollification along the regularized distance: Young-type bounds and the Jacobian of the shift."""
import numpy as np

from obliquereg.geometry import GraphDomain, cyl_neighborhood
from obliquereg.mollification import verify_young_bounds
from obliquereg.regdist import RegDistField

cyl = cyl_neighborhood(GraphDomain.sawtooth(0.05, 0.5, phase=0.1, delta=1.0, base_radius=10.0),
                       np.zeros(2), 1.0)
rd = RegDistField(cyl.domain, nodes=17)
for p in (2.0, 4.0):
    rep = verify_young_bounds(rd, cyl, p, trials=50)
    print(f"p = {p:g}: ||g~||/||g|| <= {rep['lp_ratio_max']:.4f}, gradients <= {rep['w1p_ratio_max']:.4f}, "
          f"bound 2^(1/p) = {2 ** (1 / p):.4f}, min Jacobian {rep['jacobian_min']:.4f}")
