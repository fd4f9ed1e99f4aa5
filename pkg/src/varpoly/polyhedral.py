"""Polyhedral convex functions, finitely generated cones and polytopes.

A polyhedral function is stored as a max of affine pieces restricted to an
H-described domain::

    g(z) = max_j (<a_j, z> - alpha_j)   if <b_i, z> <= beta_i for all i
         = +inf                         otherwise

Cones carry either or both of a generator list and a halfspace list (each
halfspace ``h`` meaning ``<h, .> <= 0``); the missing one is filled by the
double description method.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.optimize import lsq_linear

from .config import DEFAULT_TOL, DDBoundError, DimensionError, LPError, PreconditionError, Tolerances
from .lp import INFEASIBLE, OPTIMAL, solve_lp


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _rows(vectors, dim: int) -> np.ndarray:
    a = np.asarray(vectors, dtype=float)
    if a.size == 0:
        return np.zeros((0, dim))
    a = a.reshape(-1, dim) if a.ndim == 1 and dim > 0 else np.atleast_2d(a)
    if a.shape[1] != dim:
        raise DimensionError(f"expected vectors of length {dim}, got {a.shape[1]}")
    return a


def canonicalize(vectors, dim: int, tol: float = 1e-10) -> np.ndarray:
    """Normalize, drop zero vectors and remove duplicates (order preserving)."""
    a = _rows(vectors, dim)
    out = []
    for v in a:
        nv = np.linalg.norm(v)
        if nv <= tol:
            continue
        u = v / nv
        if any(np.linalg.norm(u - w) <= 1e3 * tol for w in out):
            continue
        out.append(u)
    return np.array(out).reshape(-1, dim)


def _rank(M: np.ndarray, tol: float = 1e-9) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


def _tidy(rows: np.ndarray) -> np.ndarray:
    """Zero rounding-level entries and renormalize, so exact data gives exact bases."""
    rows = np.where(np.abs(rows) < 1e-15, 0.0, rows)
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def orthonormal_basis(vectors, dim: int, tol: float = 1e-10) -> np.ndarray:
    """Rows form an orthonormal basis of the span of ``vectors``."""
    a = _rows(vectors, dim)
    if a.shape[0] == 0:
        return np.zeros((0, dim))
    _, s, vt = np.linalg.svd(a, full_matrices=False)
    r = int(np.sum(s > tol * max(1.0, s[0])))
    return _tidy(vt[:r])


def null_space(M, dim: int, tol: float = 1e-10) -> np.ndarray:
    """Rows form an orthonormal basis of {x : M x = 0}."""
    M = _rows(M, dim)
    if M.shape[0] == 0:
        return np.eye(dim)
    _, s, vt = np.linalg.svd(M, full_matrices=True)
    r = int(np.sum(s > tol * max(1.0, s[0])))
    return _tidy(vt[r:])


# ---------------------------------------------------------------------------
# value types


@dataclass(frozen=True, eq=False)
class LinSubspace:
    """Linear subspace given by an orthonormal basis (rows)."""

    basis: np.ndarray
    dim: int

    @classmethod
    def from_vectors(cls, vectors, dim: int, tol: float = 1e-10) -> "LinSubspace":
        return cls(_frozen(orthonormal_basis(vectors, dim, tol)), dim)

    @classmethod
    def kernel_of(cls, M, dim: int, tol: float = 1e-10) -> "LinSubspace":
        return cls(_frozen(null_space(M, dim, tol)), dim)

    @property
    def rank(self) -> int:
        return self.basis.shape[0]

    def complement(self) -> "LinSubspace":
        return LinSubspace(_frozen(null_space(self.basis, self.dim)), self.dim)

    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, float)
        r = x - self.basis.T @ (self.basis @ x)
        return bool(np.linalg.norm(r) <= tol * max(1.0, np.linalg.norm(x)))

    def __repr__(self):
        return f"LinSubspace(dim={self.dim}, rank={self.rank})"


@dataclass(frozen=True, eq=False)
class PolytopeRep:
    """conv(points) + cone(rays); empty iff there are no points."""

    points: np.ndarray
    rays: np.ndarray
    dim: int

    @classmethod
    def make(cls, points, rays, dim: int) -> "PolytopeRep":
        pts = _rows(points, dim)
        rys = canonicalize(rays, dim)
        return cls(_frozen(pts), _frozen(rys), dim)

    @property
    def is_empty(self) -> bool:
        return self.points.shape[0] == 0

    def image(self, M) -> "PolytopeRep":
        """Image under the linear map x -> M x."""
        M = np.atleast_2d(np.asarray(M, float))
        if M.shape[1] != self.dim:
            raise DimensionError("map width does not match polytope dimension")
        return PolytopeRep.make(self.points @ M.T, self.rays @ M.T, M.shape[0])

    def ri_point(self) -> np.ndarray:
        """A point in the relative interior (centroid of points plus sum of rays)."""
        if self.is_empty:
            raise PreconditionError("nonempty_polytope")
        return self.points.mean(axis=0) + self.rays.sum(axis=0)

    def __repr__(self):
        return f"PolytopeRep(dim={self.dim}, points={self.points.tolist()}, rays={self.rays.tolist()})"


@dataclass(frozen=True, eq=False)
class ConeRep:
    """Closed convex cone with optional generator and halfspace lists.

    ``None`` means a representation has not been computed.  An empty generator
    array is the cone {0}; an empty halfspace array is the whole space.
    """

    dim: int
    generators: np.ndarray | None = None
    halfspaces: np.ndarray | None = None

    @classmethod
    def from_generators(cls, gens, dim: int) -> "ConeRep":
        return cls(dim, _frozen(canonicalize(gens, dim)), None)

    @classmethod
    def from_halfspaces(cls, hs, dim: int) -> "ConeRep":
        return cls(dim, None, _frozen(canonicalize(hs, dim)))

    @classmethod
    def whole_space(cls, dim: int) -> "ConeRep":
        return dd_convert(cls.from_halfspaces(np.zeros((0, dim)), dim))

    @classmethod
    def zero(cls, dim: int) -> "ConeRep":
        return dd_convert(cls.from_generators(np.zeros((0, dim)), dim))

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, float)
        if x.shape != (self.dim,):
            raise DimensionError(f"expected a vector of length {self.dim}")
        scale = max(1.0, float(np.linalg.norm(x)))
        if self.halfspaces is not None:
            if self.halfspaces.shape[0] == 0:
                return True
            return bool(np.max(self.halfspaces @ x) <= tol * scale)
        return member(PolytopeRep.make(np.zeros((1, self.dim)), self.generators, self.dim), x)

    def is_subspace(self, tol: float = 1e-9) -> bool:
        c = dd_convert(self)
        return all(c.contains(-gen, tol) for gen in c.generators)

    def __repr__(self):
        g = None if self.generators is None else self.generators.tolist()
        h = None if self.halfspaces is None else self.halfspaces.tolist()
        return f"ConeRep(dim={self.dim}, generators={g}, halfspaces={h})"


@dataclass(frozen=True)
class ActiveSets:
    I_active: tuple[int, ...]
    J_active: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class PolyhedralFunction:
    """max_j(<a_j,z> - alpha_j) on {z : <b_i,z> <= beta_i}."""

    a: np.ndarray
    alpha: np.ndarray
    b: np.ndarray
    beta: np.ndarray
    m: int = field(default=0)

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, float))
        if a.size == 0:
            raise ValueError("a polyhedral function needs at least one piece")
        m = a.shape[1]
        alpha = np.asarray(self.alpha, float).ravel()
        b = _rows(self.b, m)
        beta = np.asarray(self.beta, float).ravel()
        if alpha.size != a.shape[0] or beta.size != b.shape[0]:
            raise DimensionError("piece / row counts do not match offsets")
        for name, val in (("a", a), ("alpha", alpha), ("b", b), ("beta", beta), ("m", m)):
            object.__setattr__(self, name, _frozen(val) if name != "m" else val)
        if b.shape[0]:
            res = solve_lp(np.zeros(m), A_ub=b, b_ub=beta, free=range(m))
            if res.status == INFEASIBLE:
                raise ValueError("domain rows describe an empty set")

    @classmethod
    def build(cls, pieces, rows=()) -> "PolyhedralFunction":
        """From lists of (a, alpha) and (b, beta) pairs."""
        pieces = list(pieces)
        if not pieces:
            raise ValueError("a polyhedral function needs at least one piece")
        a = np.array([np.atleast_1d(np.asarray(p[0], float)) for p in pieces])
        m = a.shape[1]
        rows = list(rows)
        b = np.array([np.atleast_1d(np.asarray(r[0], float)) for r in rows]).reshape(-1, m)
        return cls(a, [p[1] for p in pieces], b, [r[1] for r in rows])

    @property
    def n_pieces(self) -> int:
        return self.a.shape[0]

    @property
    def n_rows(self) -> int:
        return self.b.shape[0]

    def scaled(self, r: float) -> "PolyhedralFunction":
        """The function r*g for r > 0."""
        if r <= 0:
            raise ValueError("scale must be positive")
        return PolyhedralFunction(r * self.a, r * self.alpha, self.b, self.beta)

    def __call__(self, z) -> float:
        return evaluate(self, z)


# ---------------------------------------------------------------------------
# function-level operations


def _check_z(g: PolyhedralFunction, z) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, float))
    if z.shape != (g.m,):
        raise DimensionError(f"expected a point of length {g.m}, got shape {z.shape}")
    return z


def evaluate(g: PolyhedralFunction, z, tol: float = 0.0) -> float:
    """Value of g at z; +inf outside the domain (rows violated by more than tol)."""
    z = _check_z(g, z)
    if g.n_rows and np.any(g.b @ z - g.beta > tol):
        return np.inf
    return float(np.max(g.a @ z - g.alpha))


def active_sets(g: PolyhedralFunction, z, tol: Tolerances = DEFAULT_TOL) -> ActiveSets:
    z = _check_z(g, z)
    slack = g.b @ z - g.beta if g.n_rows else np.zeros(0)
    if np.any(slack > tol.act):
        raise PreconditionError("point_in_domain", f"z={z.tolist()} violates a domain row")
    vals = g.a @ z - g.alpha
    top = vals.max()
    I = tuple(int(i) for i in np.flatnonzero(np.abs(slack) <= tol.act))
    J = tuple(int(j) for j in np.flatnonzero(np.abs(vals - top) <= tol.act))
    return ActiveSets(I, J)


def subdifferential(g: PolyhedralFunction, z, tol: Tolerances = DEFAULT_TOL) -> PolytopeRep:
    s = active_sets(g, z, tol)
    return PolytopeRep.make(g.a[list(s.J_active)], g.b[list(s.I_active)], g.m)


def critical_cone(g: PolyhedralFunction, z, lam, tol: Tolerances = DEFAULT_TOL) -> ConeRep:
    """Directions y with <a_j - lam, y> <= 0 on active pieces and <b_i, y> <= 0 on active rows."""
    lam = _check_z(g, lam)
    s = active_sets(g, z, tol)
    if not member(subdifferential(g, z, tol), lam):
        raise PreconditionError("subgradient", f"lambda={lam.tolist()} is not a subgradient")
    hs = np.vstack([g.a[list(s.J_active)] - lam, g.b[list(s.I_active)]])
    return dd_convert(ConeRep.from_halfspaces(hs, g.m), tol)


# ---------------------------------------------------------------------------
# double description


def _pick_independent(H: np.ndarray, r: int, tol: float) -> list[int]:
    chosen: list[int] = []
    Q = np.zeros((0, H.shape[1]))
    for _ in range(r):
        resid = H - (H @ Q.T) @ Q
        norms = np.linalg.norm(resid, axis=1)
        norms[chosen] = -1.0
        i = int(np.argmax(norms))
        if norms[i] <= tol:
            break
        chosen.append(i)
        Q = np.vstack([Q, resid[i] / norms[i]])
    return chosen


def _dd_pointed(H: np.ndarray, tol: float) -> np.ndarray:
    """Extreme rays of {y : H y <= 0} when H has full column rank."""
    k, r = H.shape
    start = _pick_independent(H, r, 1e-8)
    if len(start) < r:
        raise LPError("double description: starting rows are not independent")
    B = H[start]
    R = (-np.linalg.inv(B)).T
    R /= np.linalg.norm(R, axis=1, keepdims=True)
    processed = list(start)
    for q in (i for i in range(k) if i not in set(start)):
        h = H[q]
        s = R @ h
        pos = np.flatnonzero(s > tol)
        if pos.size == 0:
            processed.append(q)
            continue
        neg = np.flatnonzero(s < -tol)
        keep = [R[i] for i in range(R.shape[0]) if s[i] <= tol]
        if neg.size:
            Hp = H[processed]
            Z = np.abs(R @ Hp.T) <= tol
            for i, j in product(pos, neg):
                common = Z[i] & Z[j]
                if common.sum() < r - 2:
                    continue
                if _rank(Hp[common], 1e-8) != r - 2:
                    continue
                new = s[i] * R[j] - s[j] * R[i]
                keep.append(new / np.linalg.norm(new))
        R = canonicalize(keep, r, 1e-12) if keep else np.zeros((0, r))
        processed.append(q)
    return R


def _halfspaces_to_generators(H: np.ndarray, dim: int, tol: float) -> np.ndarray:
    H = canonicalize(H, dim)
    if H.shape[0] == 0:
        lines = np.eye(dim)
        return np.vstack([lines, -lines]).reshape(-1, dim)
    _, s, vt = np.linalg.svd(H, full_matrices=True)
    r = int(np.sum(s > 1e-10 * max(1.0, s[0])))
    Q, L = vt[:r], vt[r:]
    rays = _dd_pointed(H @ Q.T, tol) @ Q if r else np.zeros((0, dim))
    return canonicalize(np.vstack([rays, L, -L]), dim)


def dd_convert(c: ConeRep, tol: Tolerances = DEFAULT_TOL) -> ConeRep:
    """Fill whichever representation of the cone is missing."""
    if c.generators is not None and c.halfspaces is not None:
        return c
    if c.dim > tol.dd_bound:
        raise DDBoundError(c.dim, tol.dd_bound)
    if c.generators is None and c.halfspaces is None:
        raise PreconditionError("cone_representation", "neither representation populated")
    if c.generators is None:
        gens = _halfspaces_to_generators(c.halfspaces, c.dim, 1e-9)
        return ConeRep(c.dim, _frozen(gens), c.halfspaces)
    # halfspaces of cone(G) are the generators of {y : G y <= 0}
    hs = _halfspaces_to_generators(c.generators, c.dim, 1e-9)
    return ConeRep(c.dim, c.generators, _frozen(hs))


def polar(c: ConeRep, tol: Tolerances = DEFAULT_TOL) -> ConeRep:
    c = dd_convert(c, tol)
    return ConeRep(c.dim, c.halfspaces, c.generators)


def span_of_cone(c: ConeRep, tol: Tolerances = DEFAULT_TOL) -> LinSubspace:
    c = dd_convert(c, tol)
    return LinSubspace.from_vectors(c.generators, c.dim)


def normal_cone_at(K: ConeRep, w, tol: Tolerances = DEFAULT_TOL) -> ConeRep:
    """N_K(w) = {h in polar(K) : <h, w> = 0} for w in K."""
    K = dd_convert(K, tol)
    w = np.asarray(w, float)
    if not K.contains(w):
        raise PreconditionError("point_in_cone", f"w={w.tolist()} is not in the cone")
    hs = np.vstack([K.generators, w[None, :], -w[None, :]])
    return dd_convert(ConeRep.from_halfspaces(hs, K.dim), tol)


def cone_meets_subspace_trivially(K: ConeRep, L: LinSubspace, tol: Tolerances = DEFAULT_TOL) -> bool:
    """True iff K and L share only the origin."""
    if K.dim != L.dim:
        raise DimensionError("cone and subspace live in different spaces")
    K = dd_convert(K, tol)
    eqs = L.complement().basis
    both = ConeRep.from_halfspaces(np.vstack([K.halfspaces, eqs, -eqs]), K.dim)
    return dd_convert(both, tol).generators.shape[0] == 0


def face_index_sets(K: ConeRep, tol: Tolerances = DEFAULT_TOL) -> tuple[ConeRep, list[frozenset]]:
    """Faces of K as sets of indices into the generator list of the returned cone."""
    K = dd_convert(K, tol)
    G, H = K.generators, K.halfspaces
    tight = np.abs(G @ H.T) <= 1e-9
    top = frozenset(range(G.shape[0]))
    seen = {top}
    stack = [top]
    while stack:
        face = stack.pop()
        for h in range(H.shape[0]):
            sub = frozenset(i for i in face if tight[i, h])
            if sub not in seen:
                seen.add(sub)
                stack.append(sub)
    return K, sorted(seen, key=lambda s: (len(s), sorted(s)))


def cone_faces(K: ConeRep, tol: Tolerances = DEFAULT_TOL) -> list[ConeRep]:
    """All faces of K, each as the cone of the generators it contains."""
    K, sets = face_index_sets(K, tol)
    return [dd_convert(ConeRep.from_generators(K.generators[sorted(f)], K.dim), tol) for f in sets]


# ---------------------------------------------------------------------------
# LP predicates


def _weights_system(P: PolytopeRep, v):
    v = np.asarray(v, float).ravel()
    if v.size != P.dim:
        raise DimensionError(f"expected a vector of length {P.dim}")
    if P.is_empty:
        raise PreconditionError("nonempty_polytope")
    k, q = P.points.shape[0], P.rays.shape[0]
    A_eq = np.zeros((P.dim + 1, k + q))
    A_eq[:P.dim, :k] = P.points.T
    A_eq[:P.dim, k:] = P.rays.T
    A_eq[P.dim, :k] = 1.0
    b_eq = np.concatenate([v, [1.0]])
    return A_eq, b_eq, k, q


def member(P: PolytopeRep, v) -> bool:
    """LP feasibility of v = sum w_j p_j + sum m_i r_i with w in the simplex, m >= 0."""
    A_eq, b_eq, k, q = _weights_system(P, v)
    res = solve_lp(np.zeros(k + q), A_eq=A_eq, b_eq=b_eq)
    if res.status == OPTIMAL:
        return True
    if res.status == INFEASIBLE:
        return False
    raise LPError(f"membership LP ended with status {res.status}")


def ri_epsilon(P: PolytopeRep, v) -> float | None:
    """Largest common lower bound on all weights (capped at 1); None if v is not in P."""
    A_eq, b_eq, k, q = _weights_system(P, v)
    nv = k + q
    A_eq = np.hstack([A_eq, np.zeros((A_eq.shape[0], 1))])
    A_ub = np.hstack([-np.eye(nv), np.ones((nv, 1))])
    b_ub = np.zeros(nv)
    cap = np.zeros((1, nv + 1))
    cap[0, -1] = 1.0
    c = np.zeros(nv + 1)
    c[-1] = -1.0
    res = solve_lp(c, A_ub=np.vstack([A_ub, cap]), b_ub=np.concatenate([b_ub, [1.0]]),
                   A_eq=A_eq, b_eq=b_eq)
    if res.status == INFEASIBLE:
        return None
    if res.status != OPTIMAL:
        raise LPError(f"relative-interior LP ended with status {res.status}")
    return float(res.x[-1])


def ri_member(P: PolytopeRep, v, tol: Tolerances = DEFAULT_TOL) -> bool:
    eps = ri_epsilon(P, v)
    return eps is not None and eps > tol.ri


def project_onto_polytope(P: PolytopeRep, y) -> tuple[np.ndarray, float]:
    """Nearest point of P to y and the distance (bounded least squares)."""
    y = np.asarray(y, float).ravel()
    if P.is_empty:
        return np.full(P.dim, np.nan), np.inf
    k = P.points.shape[0]
    G = np.hstack([P.points.T, P.rays.T])
    weight = 1e6 * max(1.0, float(np.abs(G).max(initial=0.0)), float(np.abs(y).max(initial=0.0)))
    row = np.concatenate([np.ones(k), np.zeros(P.rays.shape[0])]) * weight
    A = np.vstack([G, row])
    rhs = np.concatenate([y, [weight]])
    # bvls rather than nnls: scipy's nnls returns wrong answers on some wide systems
    coef = lsq_linear(A, rhs, bounds=(0.0, np.inf), method="bvls", tol=1e-14).x
    coef = np.maximum(coef, 0.0)
    coef[:k] /= coef[:k].sum()
    p = G @ coef
    # the penalty row limits accuracy; re-solve exactly on the support found
    S = np.flatnonzero(coef > 0)
    if S.size:
        e = (S < k).astype(float)
        K = np.block([[G[:, S].T @ G[:, S], e[:, None]], [e[None, :], np.zeros((1, 1))]])
        sol = np.linalg.lstsq(K, np.concatenate([G[:, S].T @ y, [1.0]]), rcond=None)[0]
        c = sol[:-1]
        if np.all(c >= 0) and abs(c @ e - 1.0) < 1e-12:
            q = G[:, S] @ c
            if np.linalg.norm(q - y) <= np.linalg.norm(p - y):
                p = q
    return p, float(np.linalg.norm(p - y))
