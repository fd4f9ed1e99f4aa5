"""
Do the second-order quotients epi-converge?
===========================================

For |x| the quotient functions at the base pair (0, 0) settle on the
indicator of {0}.  At (0, 1) they keep jumping between two different cones,
and the truncated epigraph distance stays put.  Writes the quotient samples
to quotients.csv for plotting.
"""

from varpoly import catalog
from varpoly.epi_oracle import epi_convergence_probe, write_quotient_csv

for v in (0.0, 1.0):
    probe = epi_convergence_probe(catalog.abs_problem(v), [0.0], [v])
    print(f"v = {v}: {probe.status}, {probe.pattern} (ri verdict {probe.ri_verdict})")
    for t, d in zip(probe.t_levels, probe.distances):
        print(f"   t = {t:.0e}   distance {d:.4f}")

probe = epi_convergence_probe(catalog.circle_problem(), [1.0, 0.0], [0.0, 0.0])
write_quotient_csv("quotients.csv", probe.records)
print("circle:", probe.pattern, "-", len(probe.records), "quotients written to quotients.csv")
