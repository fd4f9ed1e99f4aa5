"""Random problem generators shared by the property and acceptance tests."""

import numpy as np

from varpoly.polyhedral import PolyhedralFunction, subdifferential
from varpoly.smooth import CompositeProblem, PolyMap


def random_polyhedral_instance(rng):
    """Random g active at z = Phi(0), linear Phi, and v from a vertex, an edge or the ri of the subdifferential."""
    m = int(rng.integers(1, 4))
    n = int(rng.integers(m, m + 2))
    p = int(rng.integers(1, 4))
    q = int(rng.integers(0, 3))
    a = rng.integers(-2, 3, size=(p, m)).astype(float)
    alpha = np.where(rng.random(p) < 0.7, 0.0, 1.0)          # alpha 0 -> active at z = 0
    alpha[0] = 0.0
    b = rng.integers(-2, 3, size=(q, m)).astype(float)
    beta = np.where(rng.random(q) < 0.7, 0.0, 1.0)
    g = PolyhedralFunction.build(list(zip(a, alpha)), list(zip(b, beta)))
    M = rng.integers(-2, 3, size=(m, n)).astype(float)
    if rng.random() < 0.5:
        M[:, :m] += 3 * np.eye(m)                            # usually full row rank
    Phi = PolyMap.linear(M)
    P = subdifferential(g, np.zeros(m))
    pick = rng.random()
    if pick < 0.4:
        lam = P.ri_point()
    elif pick < 0.7:
        lam = P.points[int(rng.integers(P.points.shape[0]))]
    else:
        k = P.points.shape[0]
        w = rng.dirichlet(np.ones(k)) * (rng.random(k) < 0.6)
        lam = (w / w.sum() if w.sum() else np.eye(k)[0]) @ P.points
        if P.rays.shape[0]:
            lam = lam + (rng.random(P.rays.shape[0]) < 0.5) @ P.rays
    x = np.zeros(n)
    return CompositeProblem(g, Phi, x, M.T @ lam)
