"""Sampling points of the domain and of the subdifferential graph.

Domain constraints of g(Phi(x)) are often thin (equalities, or boundaries
reached by the directions of interest), so random points are pulled back onto
the relevant constraint surfaces by a minimal-norm Gauss-Newton projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .config import PreconditionError
from .polyhedral import LinSubspace, ConeRep, active_sets, cone_meets_subspace_trivially, member
from .smooth import CompositeProblem


def project_to_level_set(cp: CompositeProblem, x, C, beta, iters: int = 40, max_move: float = np.inf):
    """Nearest-ish y with C Phi(y) = beta, by minimal-norm Gauss-Newton steps.

    Returns None when the iteration does not reach the surface or wanders
    farther than ``max_move`` from x.
    """
    x0 = np.array(x, dtype=float)
    y = x0.copy()
    C = np.atleast_2d(C)
    beta = np.asarray(beta, float)
    if C.shape[0] == 0:
        return y
    eps = np.finfo(float).eps
    absC, absb = np.abs(C), np.abs(beta)
    for _ in range(iters):
        z, scale, J = cp.Phi.value_scale_jacobian(y)
        r = C @ z - beta
        if np.all(np.abs(r) <= 4 * eps * (absC @ scale + absb)):
            return y
        Jc = C @ J
        try:
            # minimal-norm step; rank deficiency falls back to least squares
            step = Jc.T @ np.linalg.solve(Jc @ Jc.T, r)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(Jc, r, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            return None
        y = y - step
        if np.linalg.norm(y - x0) > max_move:
            return None
    z, scale = cp.Phi.value_and_scale(y)
    r = C @ z - beta
    ok = np.all(np.abs(r) <= 1e3 * eps * (absC @ scale + absb + 1e-300))
    return y if ok else None


def repair_to_domain(cp: CompositeProblem, x, rounds: int | None = None, max_move: float = np.inf):
    """Move x onto dom phi by projecting onto the boundaries of violated rows."""
    g = cp.g
    if not g.n_rows:
        return np.array(x, dtype=float)
    y = np.array(x, dtype=float)
    hold: list[int] = []
    for _ in range(rounds or g.n_rows + 2):
        z, scale = cp.Phi.value_and_scale(y)
        slack = g.b @ z - g.beta
        room = 16 * np.finfo(float).eps * (np.abs(g.b) @ scale + np.abs(g.beta))
        bad = [i for i in np.flatnonzero(slack > room) if i not in hold]
        if not bad and not np.any(slack > room):
            return y
        hold.extend(int(i) for i in bad)
        y2 = project_to_level_set(cp, y, g.b[hold], g.beta[hold], max_move=max_move)
        if y2 is None or np.linalg.norm(y2 - x) > max_move:
            return None
        y = y2
    return y if cp.in_domain(y) else None


def repair_batch(cp: CompositeProblem, X, max_move: float = np.inf, iters: int = 40) -> np.ndarray:
    """Row-wise ``repair_to_domain`` done in bulk; failed rows come back as NaN.

    Rows sharing the same set of held constraints take Gauss-Newton steps
    together, using pseudo-inverses of the stacked constraint Jacobians.
    """
    X0 = np.array(X, dtype=float).reshape(-1, cp.n)
    g = cp.g
    if not g.n_rows or X0.shape[0] == 0:
        return X0
    eps = np.finfo(float).eps
    Y = X0.copy()
    alive = np.ones(len(Y), bool)
    done = np.zeros(len(Y), bool)
    hold = np.zeros((len(Y), g.n_rows), bool)
    absb = np.abs(g.b)
    for _ in range(g.n_rows + 2):
        idx = np.flatnonzero(alive & ~done)
        if idx.size == 0:
            break
        Z, S, _ = cp.Phi.batch(Y[idx])
        viol = (Z @ g.b.T - g.beta) > 16 * eps * (S @ absb.T + np.abs(g.beta))
        ok = ~viol.any(axis=1)
        done[idx[ok]] = True
        idx, viol = idx[~ok], viol[~ok]
        hold[idx] |= viol
        for key in {tuple(h) for h in hold[idx]}:
            grp = idx[np.all(hold[idx] == key, axis=1)]
            rows = np.flatnonzero(key)
            C, beta = g.b[rows], g.beta[rows]
            absC = absb[rows]
            act = grp.copy()
            for _ in range(iters):
                Z, S, J = cp.Phi.batch(Y[act])
                r = Z @ C.T - beta
                conv = np.all(np.abs(r) <= 4 * eps * (S @ absC.T + np.abs(beta)), axis=1)
                act = act[~conv]
                if act.size == 0:
                    break
                Jc = np.einsum("km,nmj->nkj", C, J[~conv])
                step = np.einsum("njk,nk->nj", np.linalg.pinv(Jc), r[~conv])
                Y[act] -= step
                far = ~np.all(np.isfinite(Y[act]), axis=1) | (np.linalg.norm(Y[act] - X0[act], axis=1) > max_move)
                alive[act[far]] = False
                act = act[~far]
                if act.size == 0:
                    break
            else:
                Z, S, _ = cp.Phi.batch(Y[act])
                r = Z @ C.T - beta
                bad = ~np.all(np.abs(r) <= 1e3 * eps * (S @ absC.T + np.abs(beta) + 1e-300), axis=1)
                alive[act[bad]] = False
    alive &= done
    Y[~alive] = np.nan
    return Y


def _uniform_ball(rng, center, radius, u=None):
    """Uniform point of the ball; ``u`` in [0, 1) fixes the radial quantile."""
    n = center.size
    d = rng.normal(size=n)
    d /= np.linalg.norm(d)
    u = rng.uniform() if u is None else u
    return center + radius * u ** (1.0 / n) * d


@dataclass
class GphSample:
    pairs: list = field(default_factory=list)
    dropped: int = 0
    status: str = "ok"


def _strata(cp: CompositeProblem, x_bar, rng, limit: int):
    """Equation systems fixing subsets of the ties and active rows at x_bar.

    All combinations are listed when there are at most ``limit`` of them,
    otherwise a random selection that keeps the empty and the full system.
    """
    s = active_sets(cp.g, cp.Phi.value(x_bar), cp.tol)
    g = cp.g
    J, I = list(s.J_active), list(s.I_active)
    tie_sets = [()] + [c for k in range(2, len(J) + 1) for c in combinations(J, k)]
    row_sets = [c for k in range(len(I) + 1) for c in combinations(I, k)]
    pairs = [(t, r) for t in tie_sets for r in row_sets]
    if len(pairs) > limit:
        idx = rng.choice(np.arange(1, len(pairs) - 1), size=max(limit - 2, 0), replace=False)
        pairs = [pairs[0], pairs[-1]] + [pairs[i] for i in sorted(idx)]
    out = []
    for ties, rows in pairs:
        C, beta = [], []
        for j in ties[1:]:
            C.append(g.a[j] - g.a[ties[0]])
            beta.append(g.alpha[j] - g.alpha[ties[0]])
        for i in rows:
            C.append(g.b[i])
            beta.append(g.beta[i])
        out.append((np.array(C).reshape(-1, cp.m), np.array(beta)))
    return out


def snap_to_active(cp: CompositeProblem, x):
    """Make the ties and rows that are active up to tolerance hold to rounding.

    Without this a row slack of order tol would still carry a multiplier.
    """
    s = active_sets(cp.g, cp.Phi.value(x), cp.tol)
    g = cp.g
    J, I = list(s.J_active), list(s.I_active)
    C = [g.a[j] - g.a[J[0]] for j in J[1:]] + [g.b[i] for i in I]
    beta = [g.alpha[j] - g.alpha[J[0]] for j in J[1:]] + [g.beta[i] for i in I]
    if not C:
        return x
    y = project_to_level_set(cp, x, np.array(C), np.array(beta))
    if y is None or not cp.in_domain(y) or active_sets(cp.g, cp.Phi.value(y), cp.tol) != s:
        return None
    return y


def _bcq_at(cp: CompositeProblem, x) -> bool:
    s = active_sets(cp.g, cp.Phi.value(x), cp.tol)
    if not s.I_active:
        return True
    K = ConeRep.from_generators(cp.g.b[list(s.I_active)], cp.m)
    L = LinSubspace.kernel_of(cp.Phi.jacobian(x).T, cp.m)
    return cone_meets_subspace_trivially(K, L, cp.tol)


def _candidate_subgradients(cp: CompositeProblem, x, v_bar, radius, rng):
    D = cp.subgradients(x)
    out = list(D.points)
    k, q = D.points.shape[0], D.rays.shape[0]
    w = rng.dirichlet(np.ones(k))
    ri = w @ D.points + (rng.exponential(size=q) @ D.rays if q else 0.0)
    out.append(ri)
    if v_bar is not None:
        from .polyhedral import project_onto_polytope

        near, _ = project_onto_polytope(D, v_bar)
        for s in rng.uniform(0.0, 1.0, size=3) * radius / (1.0 + np.linalg.norm(ri - near)):
            out.append(near + s * (ri - near))
        out.append(near)
    return D, out


def sample_gph(cp: CompositeProblem, x_bar, v_bar, radius: float, count: int, rng=None) -> GphSample:
    """Pairs (x, v) with v a subgradient at x, x within ``radius`` of x_bar.

    The base point is always included with several subgradients near v_bar;
    other points are drawn uniformly, pulled in turn onto each stratum of the
    active structure at x_bar, then onto the domain.  Every pair is
    certified by LP membership; points failing the qualification condition
    are dropped and counted.
    """
    rng = np.random.default_rng(42) if rng is None else rng
    x_bar = np.atleast_1d(np.asarray(x_bar, float))
    v_bar = None if v_bar is None else np.atleast_1d(np.asarray(v_bar, float))
    out = GphSample()
    xs = [x_bar]
    strata = _strata(cp, x_bar, rng, max(count // 3, 1))
    per = -(-count // len(strata))
    for i in range(count):
        # radial quantiles are stratified within each stratum
        k = i // len(strata)
        x = _uniform_ball(rng, x_bar, radius, (k + rng.uniform()) / per)
        C, beta = strata[i % len(strata)]
        if C.shape[0]:
            x = project_to_level_set(cp, x, C, beta)
            if x is None:
                out.dropped += 1
                continue
        x = repair_to_domain(cp, x)
        if x is not None:
            x = snap_to_active(cp, x)
        if x is None or np.linalg.norm(x - x_bar) > radius * (1 + 1e-9):
            out.dropped += 1
            continue
        xs.append(x)
    for x in xs:
        if not cp.in_domain(x, cp.tol.act) or not _bcq_at(cp, x):
            out.dropped += 1
            continue
        D, cands = _candidate_subgradients(cp, x, v_bar, radius, rng)
        for v in cands:
            if member(D, v):
                out.pairs.append((x.copy(), np.asarray(v, float)))
            else:
                out.dropped += 1
    if len(xs) < max(1, count // 2):
        out.status = "warning: fewer than half of the requested points are valid"
    return out


def require_base(cp: CompositeProblem):
    if cp.x_bar is None or cp.v_bar is None:
        raise PreconditionError("base_pair", "problem has no base point and subgradient")
    return cp.x_bar, cp.v_bar
