"""Independent reference computations used to check the library.

Nothing here imports varpoly's cone or LP code; everything goes through
scipy or closed forms.
"""

import numpy as np
from scipy.optimize import lsq_linear


def cone_residual(G, y):
    """Distance from y to cone(rows of G), via bounded-variable least squares."""
    G = np.asarray(G, float)
    y = np.asarray(y, float)
    if G.shape[0] == 0:
        return float(np.linalg.norm(y))
    mu = lsq_linear(G.T, y, bounds=(0.0, np.inf), method="bvls", tol=1e-14).x
    return float(np.linalg.norm(G.T @ mu - y))


def in_cone(G, y, tol=1e-7):
    return cone_residual(G, y) <= tol * max(1.0, np.linalg.norm(y))


def random_cone(rng, dim=None, lineality=None):
    d = int(rng.integers(1, 6)) if dim is None else dim
    k = int(rng.integers(1, 7))
    G = rng.integers(-3, 4, size=(k, d)).astype(float)
    G = G[np.linalg.norm(G, axis=1) > 0]
    if lineality if lineality is not None else rng.random() < 0.25:
        row = rng.integers(-2, 3, size=d).astype(float)
        if np.any(row):
            G = np.vstack([G, row, -row])
    return d, G.reshape(-1, d)


def probe_points(rng, G, d, count=40):
    """Points inside, outside and on the boundary of cone(G)."""
    pts = [rng.normal(size=d) for _ in range(count // 2)]
    for _ in range(count - count // 2):
        if G.shape[0]:
            mu = rng.exponential(size=G.shape[0]) * (rng.random(G.shape[0]) < 0.6)
            pts.append(mu @ G)
        else:
            pts.append(np.zeros(d))
    return pts


def soft_threshold(x, r):
    return np.sign(x) * np.maximum(np.abs(x) - r, 0.0)


def localization_jacobian_closed_form(A, B):
    """B (B^T A B)^{-1} B^T."""
    A, B = np.asarray(A, float), np.asarray(B, float)
    if B.shape[1] == 0:
        return np.zeros_like(A)
    return B @ np.linalg.solve(B.T @ A @ B, B.T)
