"""Truncated-norm certificates for the cusp and wedge examples."""
import math

from obliquereg.counterexamples import CuspExample, WedgeExample, certify_cusp, certify_wedge, cusp_window

print("cusp window p = 8, eps = 1:", cusp_window(8, 1))
for name, rep in (("cusp", certify_cusp(CuspExample())),
                  ("wedge", certify_wedge(WedgeExample(theta0=3 * math.pi / 4)))):
    print(f"\n{name}")
    for row in rep.verdicts:
        print(f"  {row['quantity']:>16s}  observed {row['observed']:>10s}  expected {row['expected']:>10s}  "
              f"slope {row['slope']:8.4f}  increment slope {row['increment_slope']:8.4f}  "
              f"analytic {row['analytic_exponent']:8.4f}")
    for w in rep.warnings:
        print("  warning:", w)
