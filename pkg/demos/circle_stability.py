"""
Projecting onto the unit circle as a generalized equation
=========================================================

u in x + N(x) with N the normal space of the circle is solved by x = u/|u|.
At u = (2, 0) the solution is nondegenerate, metrically regular, and its
localization has Jacobian diag(0, 1/2).
"""

import numpy as np

from varpoly import catalog
from varpoly.geneq import (
    GeneralizedEquation,
    localization_probe,
    regularity_spot_check,
    solve_ge,
    stability_report,
)
from varpoly.smooth import PolyMap

ge = GeneralizedEquation(PolyMap.identity(2), catalog.circle_problem(), [2.0, 0.0])
x_bar = np.array([1.0, 0.0])

rep = stability_report(ge, x_bar)
print("nondegenerate:", rep.nondegenerate, " mr:", rep.mr, " smr:", rep.smr)
print("A =\n", rep.A)
print("basis of the critical subspace:", rep.B.ravel())
print("Jacobian of the localization:\n", rep.sigma_jacobian)

# the solution map near u = (2, 0) really is the radial projection
for u in ([1.9, 0.1], [2.05, -0.2], [2.0, 0.3]):
    x = solve_ge(ge, u, x_bar)
    print(u, "->", x, " |x| =", np.linalg.norm(x))

probe = localization_probe(ge, x_bar, radius=1e-3)
print("\nfinite-difference Jacobian:\n", probe.fd_jacobian)
print("deviation from the formula:", probe.deviation)

spot = regularity_spot_check(ge, x_bar)
print(f"\nregularity estimate with kappa = {spot.kappa:.3f}: "
      f"{spot.violations} violations in {spot.pairs} sampled pairs")
