"""
Second subderivatives: formula against brute force
==================================================

For each catalog problem the chain-rule value is printed next to the minimum
of sampled difference quotients.  Infinite formula values show up as quotients
that blow up as t shrinks.
"""

import numpy as np

from varpoly import catalog
from varpoly.epi_oracle import QuotientGrid, sampled_d2, sampled_strict_d2
from varpoly.second_order import second_subderivative, strict_second_subderivative


def fmt(x):
    return "inf" if np.isinf(x) else f"{x + 0.0:.6f}"


print(f"{'problem':22s} {'w':>14s} {'d2':>10s} {'sampled':>10s} {'strict':>10s} {'sampled':>10s}")
for name, cp, ws in catalog.chain_rule_catalog():
    grid = QuotientGrid.default(cp.n)
    for w in ws:
        d2 = second_subderivative(cp, cp.x_bar, cp.v_bar, w)
        ds = strict_second_subderivative(cp, cp.x_bar, cp.v_bar, w)
        s1 = sampled_d2(cp, cp.x_bar, cp.v_bar, w, grid).value
        s2 = sampled_strict_d2(cp, cp.x_bar, cp.v_bar, w, grid).value
        print(f"{name:22s} {str(w):>14s} {fmt(d2):>10s} {fmt(s1):>10s} {fmt(ds):>10s} {fmt(s2):>10s}")

# the level-wise minima show how a finite limit is approached
cp = catalog.abs_quadratic_problem(-1.0)
s = sampled_d2(cp, [0.0], [-1.0], [-1.0], QuotientGrid.default(1))
print("\n|x^2 - x| at (0, -1), w = -1, minima per level:", [round(m, 6) for m in s.level_minima])
