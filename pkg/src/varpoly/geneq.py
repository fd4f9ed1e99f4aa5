"""Stability of the generalized equation u in f(x) + subdifferential of phi at x.

Solutions are found by enumerating which affine pieces and domain rows of g
carry the multiplier, solving each resulting smooth system by damped Newton
steps, and certifying the result by a distance computation against the true
subdifferential.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .config import ConsistencyError, PreconditionError, SolveError
from .polyhedral import ConeRep, member, null_space, orthonormal_basis, project_onto_polytope, ri_member
from .second_order import (
    critical_cone_phi,
    hessian_lambda,
    lagrange_multipliers,
    nondegeneracy_check,
    soqc_check,
)
from .smooth import CompositeProblem, PolyMap

PATTERN_LIMIT = 2 ** 12


@dataclass(eq=False)
class GeneralizedEquation:
    f: PolyMap
    cp: CompositeProblem
    u_bar: np.ndarray

    def __post_init__(self):
        self.u_bar = np.atleast_1d(np.asarray(self.u_bar, float))
        n = self.cp.n
        if self.f.n_in != n or self.f.n_out != n or self.u_bar.shape != (n,):
            raise PreconditionError("dimensions", f"f must map R^{n} to R^{n} and u_bar must have length {n}")

    @property
    def n(self) -> int:
        return self.cp.n

    def residual(self, x) -> np.ndarray:
        """u_bar - f(x), the subgradient a solution has to produce."""
        return self.u_bar - self.f.value(x)


@dataclass(frozen=True)
class SolutionCheck:
    is_solution: bool
    nondegenerate: bool
    subgradient: np.ndarray


@dataclass(eq=False)
class StabilityReport:
    nondegenerate: bool
    A: np.ndarray
    K_bar: ConeRep
    B: np.ndarray
    mr: bool
    smr: bool
    sigma_jacobian: np.ndarray | None
    criteria: dict = field(default_factory=dict)


def _x(ge: GeneralizedEquation, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, float))
    if x.shape != (ge.n,):
        raise PreconditionError("dimensions", f"expected a point of length {ge.n}")
    return x


def check_solution(ge: GeneralizedEquation, x_bar) -> SolutionCheck:
    """Membership of u_bar - f(x_bar) in the subdifferential, then nondegeneracy.

    The relative-interior verdict is cross-checked against the subspace test
    on the critical cone (inside :func:`nondegeneracy_check`).
    """
    x = _x(ge, x_bar)
    cp = ge.cp
    if not cp.in_domain(x, cp.tol.act):
        raise PreconditionError("solution", "x_bar is outside the domain")
    v = ge.residual(x)
    if not member(cp.subgradients(x), v):
        raise PreconditionError("solution", f"u_bar - f(x_bar) = {v.tolist()} is not a subgradient")
    nd = nondegeneracy_check(cp, x, v)
    if nd.verdict != ri_member(cp.subgradients(x), v, cp.tol):
        raise ConsistencyError("relative-interior verdicts differ between routes")
    return SolutionCheck(True, nd.verdict, v)


# ---------------------------------------------------------------------------
# metric regularity criteria


def _rank(M: np.ndarray, scale: float) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > 1e-10 * max(scale, 1.0)))


def mr_criteria(A, B) -> dict:
    """The three equivalent tests for a subspace K with orthonormal basis columns B.

    ``kernel``: y in K with A^T y orthogonal to K forces y = 0.
    ``span``: A K + K^perp is the whole space.
    ``reduced``: B^T A B is nonsingular.
    """
    A = np.atleast_2d(np.asarray(A, float))
    n = A.shape[0]
    B = np.asarray(B, float).reshape(n, -1)
    N = null_space(B.T, n).T if B.shape[1] else np.eye(n)
    N = N.reshape(n, -1)
    scale = float(np.abs(A).max(initial=0.0))
    kernel = _rank(np.vstack([N.T, B.T @ A.T]), scale) == n
    span = _rank(np.hstack([A @ B, N]), scale) == n
    s = B.shape[1]
    reduced = True if s == 0 else _rank(B.T @ A @ B, scale) == s
    return {"kernel": kernel, "span": span, "reduced": reduced}


def _stability_data(ge: GeneralizedEquation, x):
    cp = ge.cp
    sol = check_solution(ge, x)
    if not sol.nondegenerate:
        raise PreconditionError("nondegenerate", "the solution is degenerate; only check_solution applies")
    ms = lagrange_multipliers(cp, x, sol.subgradient)
    if not ms.is_singleton:
        raise PreconditionError("unique_multiplier")
    lam = ms.unique
    q = soqc_check(cp, x, lam)
    if not q.holds:
        raise PreconditionError("soqc", f"certificate {q.certificate.tolist()}")
    A = ge.f.jacobian(x) + hessian_lambda(cp.Phi, x, lam)
    K = critical_cone_phi(cp, x, sol.subgradient, lam)
    if not K.is_subspace():
        raise ConsistencyError("critical cone of a nondegenerate solution is not a subspace")
    B = orthonormal_basis(K.generators, cp.n).T.reshape(cp.n, -1)
    return sol, lam, A, K, B


def mr_check(ge: GeneralizedEquation, x_bar) -> bool:
    x = _x(ge, x_bar)
    _, _, A, _, B = _stability_data(ge, x)
    c = mr_criteria(A, B)
    if len(set(c.values())) != 1:
        raise ConsistencyError(f"metric regularity criteria disagree: {c}")
    return c["reduced"]


def localization_jacobian(ge: GeneralizedEquation, x_bar) -> np.ndarray:
    """B (B^T A B)^{-1} B^T; the zero matrix when the critical subspace is trivial."""
    x = _x(ge, x_bar)
    _, _, A, _, B = _stability_data(ge, x)
    return _sigma(A, B)


def _sigma(A, B) -> np.ndarray:
    n = A.shape[0]
    if B.shape[1] == 0:
        return np.zeros((n, n))
    R = B.T @ A @ B
    if _rank(R, float(np.abs(A).max(initial=0.0))) < R.shape[0]:
        raise ConsistencyError("reduced matrix is singular although metric regularity was certified")
    return B @ np.linalg.solve(R, B.T)


def stability_report(ge: GeneralizedEquation, x_bar) -> StabilityReport:
    """Nondegeneracy, regularity verdicts and the localization Jacobian.

    Strong metric regularity is decided separately, by unique solvability of
    the linearized equation restricted to the critical subspace, and must
    coincide with metric regularity for nondegenerate solutions.
    """
    x = _x(ge, x_bar)
    sol = check_solution(ge, x)
    n = ge.n
    if not sol.nondegenerate:
        K = critical_cone_phi(ge.cp, x, sol.subgradient)
        return StabilityReport(False, np.full((n, n), np.nan), K, np.zeros((n, 0)), False, False, None)
    _, _, A, K, B = _stability_data(ge, x)
    c = mr_criteria(A, B)
    if len(set(c.values())) != 1:
        raise ConsistencyError(f"metric regularity criteria disagree: {c}")
    mr = c["kernel"]
    smr = _linearized_unique(A, B)
    if mr != smr:
        raise ConsistencyError("metric and strong metric regularity verdicts differ at a nondegenerate solution")
    return StabilityReport(True, A, K, B, mr, smr, _sigma(A, B) if mr else None, c)


def _linearized_unique(A, B) -> bool:
    """p = A w + n with w in K, n in K^perp has one solution for every p.

    Decided by the conditioning of the square block system rather than a rank.
    """
    n = A.shape[0]
    N = null_space(B.T, n).T.reshape(n, -1) if B.shape[1] else np.eye(n)
    M = np.hstack([A @ B, N]) / max(1.0, float(np.abs(A).max(initial=0.0)))
    return bool(np.linalg.cond(M) < 1e10)


# ---------------------------------------------------------------------------
# solving the equation by active patterns


@dataclass(frozen=True)
class _Pattern:
    pieces: tuple
    rows: tuple


def _patterns(g):
    p, q = g.n_pieces, g.n_rows
    total = (2 ** p - 1) * 2 ** q
    if total > PATTERN_LIMIT:
        raise PreconditionError("pattern_bound", f"{total} active patterns exceed the limit {PATTERN_LIMIT}")
    rows = [c for k in range(q + 1) for c in combinations(range(q), k)]
    for k in range(1, p + 1):
        for pieces in combinations(range(p), k):
            for r in rows:
                yield _Pattern(pieces, r)


def _system(cp: CompositeProblem, f, u, pat: _Pattern, y):
    n, g = cp.n, cp.g
    P, Q = list(pat.pieces), list(pat.rows)
    x, al, mu = y[:n], y[n:n + len(P)], y[n + len(P):]
    z = cp.Phi.value(x)
    J = cp.Phi.jacobian(x)
    H = cp.Phi.hessian(x)
    lam = al @ g.a[P] + (mu @ g.b[Q] if Q else 0.0)
    F = [u - f.value(x) - J.T @ lam, [al.sum() - 1.0]]
    a0 = g.a[P[0]]
    F.append([(g.a[j] - a0) @ z - (g.alpha[j] - g.alpha[P[0]]) for j in P[1:]])
    F.append([g.b[i] @ z - g.beta[i] for i in Q])
    F = np.concatenate([np.atleast_1d(np.asarray(r, float)) for r in F])
    top = -f.jacobian(x) - np.tensordot(lam, H, axes=1)
    D = np.zeros((F.size, y.size))
    D[:n, :n] = top
    D[:n, n:n + len(P)] = -(J.T @ g.a[P].T)
    if Q:
        D[:n, n + len(P):] = -(J.T @ g.b[Q].T)
    D[n, n:n + len(P)] = 1.0
    r = n + 1
    for j in P[1:]:
        D[r, :n] = (g.a[j] - a0) @ J
        r += 1
    for i in Q:
        D[r, :n] = g.b[i] @ J
        r += 1
    return F, D


def _newton(cp, f, u, pat, x0, iters=50, tol=1e-13):
    g = cp.g
    P, Q = list(pat.pieces), list(pat.rows)
    J = cp.Phi.jacobian(x0)
    G = J.T @ np.vstack([g.a[P], g.b[Q]]).T if Q else J.T @ g.a[P].T
    Gs = np.vstack([G, np.concatenate([np.ones(len(P)), np.zeros(len(Q))])])
    rhs = np.concatenate([u - f.value(x0), [1.0]])
    mult = np.linalg.lstsq(Gs, rhs, rcond=None)[0]
    y = np.concatenate([x0, mult])
    F, D = _system(cp, f, u, pat, y)
    norm = np.linalg.norm(F)
    for _ in range(iters):
        if norm <= tol * max(1.0, np.linalg.norm(u)):
            return y[:cp.n], norm
        step = np.linalg.lstsq(D, -F, rcond=None)[0]
        s = 1.0
        while s > 1e-10:
            y2 = y + s * step
            F2, D2 = _system(cp, f, u, pat, y2)
            n2 = np.linalg.norm(F2)
            if np.isfinite(n2) and n2 < norm:
                break
            s *= 0.5
        else:
            return y[:cp.n], norm
        y, F, D, norm = y2, F2, D2, n2
    return y[:cp.n], norm


def ge_residual(cp: CompositeProblem, f, u, x) -> float:
    """dist(u - f(x), subdifferential of phi at x); inf outside the domain."""
    if not cp.in_domain(x, cp.tol.act):
        return np.inf
    return project_onto_polytope(cp.subgradients(x), u - f.value(x))[1]


def solve_candidates(cp: CompositeProblem, f, u, x0) -> tuple[list, list]:
    """All certified solutions found from x0 (one Newton run per pattern) and diagnostics."""
    u = np.atleast_1d(np.asarray(u, float))
    x0 = np.atleast_1d(np.asarray(x0, float))
    found, diag = [], []
    for pat in _patterns(cp.g):
        x, norm = _newton(cp, f, u, pat, x0)
        if not np.all(np.isfinite(x)):
            diag.append((pat.pieces, pat.rows, "diverged"))
            continue
        res = ge_residual(cp, f, u, x)
        if res <= cp.tol.res * max(1.0, float(np.linalg.norm(u))):
            if not any(np.linalg.norm(x - y) <= 1e-9 for y in found):
                found.append(x)
        else:
            diag.append((pat.pieces, pat.rows, f"residual {res:.3e}, system norm {norm:.3e}"))
    return found, diag


def solve_ge(ge: GeneralizedEquation, u, x0) -> np.ndarray:
    """A certified solution of u in f(x) + subdifferential, the one nearest x0."""
    x0 = _x(ge, x0)
    found, diag = solve_candidates(ge.cp, ge.f, u, x0)
    if not found:
        raise SolveError("no active pattern produced a certified solution", diag)
    return min(found, key=lambda y: float(np.linalg.norm(y - x0)))


# ---------------------------------------------------------------------------
# numeric witnesses


@dataclass(frozen=True, eq=False)
class LocalizationProbe:
    fd_jacobian: np.ndarray
    formula_jacobian: np.ndarray
    deviation: float
    lipschitz: float
    radius: float


def localization_probe(ge: GeneralizedEquation, x_bar, radius: float = 1e-3, count: int = 8,
                       seed: int = 42) -> LocalizationProbe:
    """Central-difference Jacobian of the solution map at u_bar and a Lipschitz estimate."""
    x = _x(ge, x_bar)
    if not mr_check(ge, x):
        raise PreconditionError("metric_regularity")
    formula = localization_jacobian(ge, x)
    n = ge.n

    def sol(u):
        try:
            return solve_ge(ge, u, x)
        except SolveError as exc:
            raise SolveError(f"probe solve failed at radius {radius}: radius too large or theorem violated",
                             exc.diagnostics) from exc

    E = np.eye(n) * radius
    fd = np.column_stack([(sol(ge.u_bar + E[i]) - sol(ge.u_bar - E[i])) / (2 * radius) for i in range(n)])
    rng = np.random.default_rng(seed)
    us = [ge.u_bar]
    for _ in range(count):
        d = rng.normal(size=n)
        us.append(ge.u_bar + radius * rng.uniform() ** (1 / n) * d / np.linalg.norm(d))
    xs = [sol(u) for u in us]
    lip = 0.0
    for i in range(len(us)):
        for j in range(i):
            du = np.linalg.norm(us[i] - us[j])
            if du > 0:
                lip = max(lip, float(np.linalg.norm(xs[i] - xs[j]) / du))
    return LocalizationProbe(fd, formula, float(np.abs(fd - formula).max(initial=0.0)), lip, radius)


@dataclass(frozen=True, eq=False)
class RegularitySpotCheck:
    kappa: float
    empirical_modulus: float
    pairs: int
    violations: int
    worst_ratio: float


def _domain_point(cp, x_bar, radius, rng):
    from .sampling import repair_to_domain

    n = cp.n
    for _ in range(50):
        d = rng.normal(size=n)
        x = x_bar + radius * rng.uniform() ** (1 / n) * d / np.linalg.norm(d)
        x = repair_to_domain(cp, x)
        if x is not None and np.linalg.norm(x - x_bar) <= radius:
            return x
    return x_bar.copy()


def _ratios(ge, x_bar, radius, count, rng):
    out = []
    n = ge.n
    for _ in range(count):
        x = _domain_point(ge.cp, x_bar, radius, rng)
        d = rng.normal(size=n)
        y = ge.u_bar + radius * rng.uniform() ** (1 / n) * d / np.linalg.norm(d)
        gap = ge_residual(ge.cp, ge.f, y, x)
        found, _ = solve_candidates(ge.cp, ge.f, y, x)
        if not found:
            raise SolveError(f"no solution for y={y.tolist()} near u_bar")
        dist = min(float(np.linalg.norm(x - s)) for s in found)
        out.append((dist, gap))
    return out


def regularity_spot_check(ge: GeneralizedEquation, x_bar, radius: float = 1e-2, count: int = 100,
                          calibration: int = 40, seed: int = 42) -> RegularitySpotCheck:
    """Test dist(x, S(y)) <= kappa dist(y, G(x)) on sampled pairs.

    kappa is twice the largest ratio seen on an independent calibration sample.
    Distances to S(y) use every certified solution the pattern search finds.
    """
    x = _x(ge, x_bar)
    rng = np.random.default_rng(seed)
    cal = _ratios(ge, x, radius, calibration, rng)
    emp = max((d / gp for d, gp in cal if gp > 0), default=0.0)
    kappa = 2.0 * emp
    test = _ratios(ge, x, radius, count, rng)
    bad, worst = 0, 0.0
    for d, gp in test:
        if d > kappa * gp + 1e-12:
            bad += 1
        if gp > 0:
            worst = max(worst, d / gp)
    return RegularitySpotCheck(kappa, emp, len(test), bad, worst)
