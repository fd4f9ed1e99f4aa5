"""
Where the prox of |x| stops being smooth
========================================

The prox of r|x| is soft-thresholding.  Around x = r v it is smooth exactly
when v sits strictly inside [-1, 1]; at v = 1 the kink of soft-thresholding
lands on x = r.
"""

import numpy as np

from varpoly import catalog
from varpoly.prox import ProxProblem, moreau_gradient, prox_c1_check, prox_compute

r = 0.5

# a few prox values next to the closed form
pp = ProxProblem(catalog.abs_problem(0.0), r, rho_user=0.0, radius=np.inf)
print(" x      prox    sign(x)max(|x|-r,0)")
for x in np.linspace(-1.5, 1.5, 7):
    p = prox_compute(pp, [x])[0]
    print(f"{x:5.2f}  {p:6.3f}  {np.sign(x) * max(abs(x) - r, 0) + 0.0:6.3f}")

# the Moreau envelope is differentiable everywhere, its gradient is (x - prox)/r
print("\nMoreau gradient at 2.0:", moreau_gradient(pp, [2.0]))

# differentiability of the prox at r * v for a ri point and an endpoint
for v in (0.0, 0.3, 1.0):
    rep = prox_c1_check(ProxProblem(catalog.abs_problem(v), r, rho_user=0.0))
    where = "" if rep.jump_location is None else f", jump at {float(np.ravel(rep.jump_location)[0]):.6f}"
    print(f"v = {v}: {rep.verdict} (probe {rep.status}, discontinuity {rep.discontinuity:.3g}{where})")
