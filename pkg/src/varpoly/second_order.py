"""Multipliers, qualification conditions and second-order objects of g(Phi(x)).

Every verdict that has more than one characterization is computed along each
route separately and the routes are compared; disagreement raises
:class:`ConsistencyError` instead of being silently resolved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConsistencyError, PreconditionError
from .polyhedral import (
    ConeRep,
    LinSubspace,
    PolytopeRep,
    active_sets,
    cone_meets_subspace_trivially,
    critical_cone,
    dd_convert,
    face_index_sets,
    member,
    normal_cone_at,
    null_space,
    orthonormal_basis,
    polar,
    ri_member,
    span_of_cone,
    subdifferential,
)
from .smooth import CompositeProblem, hessian_lambda


@dataclass(frozen=True, eq=False)
class MultiplierSet:
    unique: np.ndarray | None
    description: PolytopeRep
    is_singleton: bool

    @property
    def is_empty(self) -> bool:
        return self.description.is_empty

    def representative(self) -> np.ndarray:
        """A relative-interior point of the multiplier set."""
        if self.unique is not None:
            return self.unique
        return self.description.ri_point()


@dataclass(frozen=True, eq=False)
class QualificationResult:
    holds: bool
    certificate: np.ndarray | None = None

    def __bool__(self):
        return self.holds


@dataclass(frozen=True)
class NondegeneracyResult:
    verdict: bool
    ri_of_subdifferential: bool
    ri_of_outer_subdifferential: bool
    critical_cone_is_subspace: bool
    bcq: bool

    def __bool__(self):
        return self.verdict


@dataclass(frozen=True)
class GrowthResult:
    verdict: bool | None          # None means inconclusive
    modulus: float
    subspace_dim: int

    @property
    def label(self) -> str:
        return {True: "true", False: "false", None: "inconclusive"}[self.verdict]


@dataclass(frozen=True)
class TepiResult:
    verdict: bool
    probe_pairs: int
    probe_mismatches: int


@dataclass(frozen=True, eq=False)
class GraphRegularityReport:
    equal: bool
    nondegenerate: bool
    sampled_w: int
    domain_mismatches: int
    value_mismatches: int


@dataclass(frozen=True, eq=False)
class SecondOrderReport:
    soqc: bool
    bcq: bool
    nondegenerate: bool
    critical_cone: ConeRep
    lam: MultiplierSet
    gamma_bar: float | None
    tilt_stable: bool | None
    soqc_certificate: np.ndarray | None = None


def _x(cp: CompositeProblem, x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, float)).reshape(cp.n)


def _v(cp: CompositeProblem, v) -> np.ndarray:
    return np.atleast_1d(np.asarray(v, float)).reshape(cp.n)


def _require_domain(cp: CompositeProblem, x):
    if not cp.in_domain(x, cp.tol.act):
        raise PreconditionError("point_in_domain", f"x={np.asarray(x).tolist()} is outside dom phi")


# ---------------------------------------------------------------------------
# multipliers and qualification conditions


def lagrange_multipliers(cp: CompositeProblem, x, v) -> MultiplierSet:
    """All lam in the subdifferential of g at Phi(x) with Phi'(x)^T lam = v.

    The polytope is homogenized (lam, s) with s >= 0, intersected with the
    homogenized equations, and converted back to generators.
    """
    x, v = _x(cp, x), _v(cp, v)
    _require_domain(cp, x)
    m = cp.m
    D = subdifferential(cp.g, cp.Phi.value(x), cp.tol)
    JT = cp.Phi.jacobian(x).T
    gens = np.vstack([np.hstack([D.points, np.ones((D.points.shape[0], 1))]),
                      np.hstack([D.rays, np.zeros((D.rays.shape[0], 1))])])
    lifted = dd_convert(ConeRep.from_generators(gens, m + 1), cp.tol)
    eqs = np.hstack([JT, -v[:, None]])
    cut = dd_convert(ConeRep.from_halfspaces(np.vstack([lifted.halfspaces, eqs, -eqs]), m + 1), cp.tol)
    G = cut.generators
    s = G[:, -1] if G.size else np.zeros(0)
    pts = G[s > 1e-9, :m] / s[s > 1e-9, None]
    rays = G[s <= 1e-9, :m]
    # vertices come out of a null-space computation; drop rounding residue
    pts = np.where(np.abs(pts) < 1e-14 * max(1.0, float(np.abs(pts).max(initial=0.0))), 0.0, pts)
    rays = np.where(np.abs(rays) < 1e-14, 0.0, rays)
    desc = PolytopeRep.make(pts, rays, m)
    for lam in desc.points:
        if np.linalg.norm(JT @ lam - v) > 1e-9 * max(1.0, np.linalg.norm(v)):
            raise ConsistencyError("multiplier generator violates the multiplier equation")
    single = desc.points.shape[0] > 0 and desc.rays.shape[0] == 0 and bool(
        np.all(np.linalg.norm(desc.points - desc.points[0], axis=1) <= 1e-9))
    unique = desc.points.mean(axis=0) if single else None
    return MultiplierSet(unique, desc, single)


def _affine_span_directions(cp: CompositeProblem, x) -> np.ndarray:
    """Rows spanning S = span{a_i - a_j : i,j active} + span{b_i : i active}."""
    s = active_sets(cp.g, cp.Phi.value(x), cp.tol)
    A = cp.g.a[list(s.J_active)]
    vecs = np.vstack([A[1:] - A[0], cp.g.b[list(s.I_active)]])
    return orthonormal_basis(vecs, cp.m)


def soqc_check(cp: CompositeProblem, x, lam) -> QualificationResult:
    """S meets ker Phi'(x)^T only at 0; certificate is a common nonzero vector."""
    x = _x(cp, x)
    _require_domain(cp, x)
    lam = np.atleast_1d(np.asarray(lam, float))
    if not member(subdifferential(cp.g, cp.Phi.value(x), cp.tol), lam):
        raise PreconditionError("subgradient", f"lambda={lam.tolist()} is not a subgradient of g")
    QS = _affine_span_directions(cp, x)
    QK = null_space(cp.Phi.jacobian(x).T, cp.m)
    if QS.shape[0] == 0 or QK.shape[0] == 0:
        return QualificationResult(True)
    M = np.hstack([QS.T, -QK.T])
    N = null_space(M, M.shape[1])
    if N.shape[0] == 0:
        return QualificationResult(True)
    y = QS.T @ N[0, :QS.shape[0]]
    y = y / np.linalg.norm(y)
    if y[np.flatnonzero(np.abs(y) > 1e-12)[0]] < 0:
        y = -y
    return QualificationResult(False, y)


def bcq_check(cp: CompositeProblem, x) -> bool:
    """cone{b_i : i active} meets ker Phi'(x)^T only at 0."""
    x = _x(cp, x)
    _require_domain(cp, x)
    s = active_sets(cp.g, cp.Phi.value(x), cp.tol)
    if not s.I_active:
        return True
    K = ConeRep.from_generators(cp.g.b[list(s.I_active)], cp.m)
    L = LinSubspace.kernel_of(cp.Phi.jacobian(x).T, cp.m)
    return cone_meets_subspace_trivially(K, L, cp.tol)


def _multiplier(cp, x, v, lam=None, need_unique=False) -> np.ndarray:
    if lam is not None:
        return np.atleast_1d(np.asarray(lam, float))
    ms = lagrange_multipliers(cp, x, v)
    if ms.is_empty:
        raise PreconditionError("multiplier_exists", f"v={np.asarray(v).tolist()} has no multiplier")
    if need_unique and not ms.is_singleton:
        raise PreconditionError("unique_multiplier")
    return ms.representative()


def _require_soqc(cp, x, lam):
    q = soqc_check(cp, x, lam)
    if not q.holds:
        raise PreconditionError("soqc", f"certificate {q.certificate.tolist()}")


def critical_cone_g(cp: CompositeProblem, x, lam) -> ConeRep:
    return critical_cone(cp.g, cp.Phi.value(x), lam, cp.tol)


def critical_cone_phi(cp: CompositeProblem, x, v, lam=None) -> ConeRep:
    """{w : Phi'(x) w in K_g(Phi(x), lam)} via pulled-back halfspaces."""
    x, v = _x(cp, x), _v(cp, v)
    lam = _multiplier(cp, x, v, lam)
    if not bcq_check(cp, x):
        raise PreconditionError("bcq")
    Kg = critical_cone_g(cp, x, lam)
    J = cp.Phi.jacobian(x)
    return dd_convert(ConeRep.from_halfspaces(Kg.halfspaces @ J, cp.n), cp.tol)


def nondegeneracy_check(cp: CompositeProblem, x, v) -> NondegeneracyResult:
    """Three routes: v in ri of the subdifferential of phi, lam in ri of that of g, K_phi a subspace."""
    x, v = _x(cp, x), _v(cp, v)
    ms = lagrange_multipliers(cp, x, v)
    if ms.is_empty:
        raise PreconditionError("multiplier_exists", f"v={v.tolist()} has no multiplier")
    lam = ms.representative()
    bcq = bcq_check(cp, x)
    t1 = ri_member(cp.subgradients(x), v, cp.tol)
    t2 = ri_member(subdifferential(cp.g, cp.Phi.value(x), cp.tol), lam, cp.tol)
    t3 = critical_cone_phi(cp, x, v, lam).is_subspace() if bcq else t1
    if bcq and not (t1 == t2 == t3):
        raise ConsistencyError(f"nondegeneracy routes disagree: ri_phi={t1}, ri_g={t2}, subspace={t3}")
    return NondegeneracyResult(t1, t1, t2, t3, bcq)


# ---------------------------------------------------------------------------
# second subderivatives


def _formula_parts(cp, x, v):
    lam = _multiplier(cp, x, v)
    _require_soqc(cp, x, lam)
    ms = lagrange_multipliers(cp, x, v)
    if not ms.is_singleton:
        raise PreconditionError("unique_multiplier")
    lam = ms.unique
    return lam, critical_cone_g(cp, x, lam), cp.Phi.jacobian(x), hessian_lambda(cp.Phi, x, lam)


def second_subderivative(cp: CompositeProblem, x, v, w) -> float:
    """<lam, Phi''(x)(w,w)> + indicator of K_g at Phi'(x) w."""
    x, v = _x(cp, x), _v(cp, v)
    w = _v(cp, w)
    _, Kg, J, H = _formula_parts(cp, x, v)
    if not Kg.contains(J @ w):
        return np.inf
    return float(w @ H @ w)


def strict_second_subderivative(cp: CompositeProblem, x, v, w) -> float:
    """Same quadratic form, finite iff Phi'(x) w lies in span K_g."""
    x, v = _x(cp, x), _v(cp, v)
    w = _v(cp, w)
    _, Kg, J, H = _formula_parts(cp, x, v)
    if not span_of_cone(Kg, cp.tol).contains(J @ w):
        return np.inf
    return float(w @ H @ w)


def _span_preimage(cp, x, Kg) -> np.ndarray:
    """Rows: orthonormal basis of {w : Phi'(x) w in span K_g}."""
    L = span_of_cone(Kg, cp.tol)
    J = cp.Phi.jacobian(x)
    return null_space((np.eye(cp.m) - L.projector()) @ J, cp.n)


def quadratic_growth_check(cp: CompositeProblem, x, v) -> GrowthResult:
    """Smallest eigenvalue of the multiplier Hessian reduced to the preimage of span K_g."""
    x, v = _x(cp, x), _v(cp, v)
    _, Kg, _, H = _formula_parts(cp, x, v)
    Z = _span_preimage(cp, x, Kg)
    if Z.shape[0] == 0:
        return GrowthResult(True, np.inf, 0)
    mu = float(np.linalg.eigvalsh(Z @ H @ Z.T).min())
    if mu > cp.tol.eig:
        verdict = True
    elif mu > -cp.tol.eig:
        verdict = None
    else:
        verdict = False
    return GrowthResult(verdict, mu, Z.shape[0])


def mr_modulus_gamma(cp: CompositeProblem, x, lam) -> float:
    """1 / smallest singular value of Phi'(x)^T restricted to S."""
    x = _x(cp, x)
    _require_soqc(cp, x, lam)
    QS = _affine_span_directions(cp, x)
    if QS.shape[0] == 0:
        return 0.0
    M = cp.Phi.jacobian(x).T @ QS.T
    smin = np.linalg.svd(M, compute_uv=False).min()
    return float(1.0 / smin)


def _same_cone(A: ConeRep, B: ConeRep, tol=1e-7) -> bool:
    A, B = dd_convert(A), dd_convert(B)
    return all(B.contains(g, tol) for g in A.generators) and all(A.contains(g, tol) for g in B.generators)


def strict_tepi_check(cp: CompositeProblem, x, v, radius: float = 0.05, count: int = 40,
                      seed: int = 42) -> TepiResult:
    """Nondegeneracy verdict plus a sampled stability probe of K_g near the base pair."""
    from .sampling import sample_gph

    x, v = _x(cp, x), _v(cp, v)
    lam = _multiplier(cp, x, v, need_unique=False)
    _require_soqc(cp, x, lam)
    verdict = nondegeneracy_check(cp, x, v).verdict
    if not verdict:
        return TepiResult(False, 0, 0)
    lam = _multiplier(cp, x, v, need_unique=True)
    K_bar = critical_cone_g(cp, x, lam)
    pairs = sample_gph(cp, x, v, radius, count, rng=np.random.default_rng(seed)).pairs
    used = bad = 0
    for xs, vs in pairs:
        if np.linalg.norm(vs - v) > radius:
            continue
        ms = lagrange_multipliers(cp, xs, vs)
        if not ms.is_singleton:
            continue
        used += 1
        if not _same_cone(critical_cone_g(cp, xs, ms.unique), K_bar):
            bad += 1
    if bad:
        raise ConsistencyError(f"critical cone changed at {bad} of {used} sampled pairs")
    return TepiResult(True, used, 0)


# ---------------------------------------------------------------------------
# graphical derivative vs coderivative


def _coderivative_pieces(K: ConeRep, face_sets, u) -> list[ConeRep]:
    """Polars of F1 - F2 over face pairs F2 within F1 with -u in F1 - F2."""
    G = K.generators
    pieces = []
    for F1 in face_sets:
        for F2 in face_sets:
            if not F2 <= F1:
                continue
            gens = np.vstack([G[sorted(F1)], -G[sorted(F2)]])
            D = dd_convert(ConeRep.from_generators(gens, K.dim))
            if D.contains(-u):
                pieces.append(polar(D))
    return pieces


def graph_regularity_report(cp: CompositeProblem, x, v, samples: int = 12, seed: int = 42) -> GraphRegularityReport:
    """Compare graphical derivative and coderivative of the subdifferential on sampled directions.

    Both carry the same H w term, so only the cone parts are compared.
    """
    x, v = _x(cp, x), _v(cp, v)
    lam = _multiplier(cp, x, v)
    _require_soqc(cp, x, lam)
    nd = nondegeneracy_check(cp, x, v).verdict
    lam = _multiplier(cp, x, v, need_unique=True)
    K, faces = face_index_sets(critical_cone_g(cp, x, lam), cp.tol)
    J = cp.Phi.jacobian(x)
    Z = _span_preimage(cp, x, K)
    rng = np.random.default_rng(seed)
    ws = [np.zeros(cp.n)]
    if Z.shape[0]:
        ws += list(Z) + list(-Z)
        ws += list(rng.normal(size=(samples, Z.shape[0])) @ Z)
    dom_bad = val_bad = 0
    for w in ws:
        u = J @ w
        if not K.contains(u):
            dom_bad += 1
            continue
        N = normal_cone_at(K, u, cp.tol)
        D_img = dd_convert(ConeRep.from_generators(N.generators @ J, cp.n))
        pieces = [dd_convert(ConeRep.from_generators(P.generators @ J, cp.n))
                  for P in _coderivative_pieces(K, faces, u)]
        ok = all(all(D_img.contains(g, 1e-7) for g in P.generators) for P in pieces)
        probes = list(D_img.generators) + [
            c @ D_img.generators for c in rng.exponential(size=(8, D_img.generators.shape[0]))
        ] if D_img.generators.shape[0] else []
        for p in probes:
            if not any(P.contains(p, 1e-7) for P in pieces):
                ok = False
        if not pieces:
            ok = False
        val_bad += 0 if ok else 1
    equal = dom_bad == 0 and val_bad == 0
    if equal != nd:
        raise ConsistencyError(f"graph regularity verdict {equal} differs from nondegeneracy {nd}")
    return GraphRegularityReport(equal, nd, len(ws), dom_bad, val_bad)


# ---------------------------------------------------------------------------


def analyze(cp: CompositeProblem, x, v) -> SecondOrderReport:
    x, v = _x(cp, x), _v(cp, v)
    ms = lagrange_multipliers(cp, x, v)
    if ms.is_empty:
        raise PreconditionError("multiplier_exists", f"v={v.tolist()} has no multiplier")
    lam = ms.representative()
    q = soqc_check(cp, x, lam)
    bcq = bcq_check(cp, x)
    nd = nondegeneracy_check(cp, x, v).verdict
    K = critical_cone_phi(cp, x, v, lam) if bcq else None
    gamma = mr_modulus_gamma(cp, x, lam) if q.holds else None
    tilt = quadratic_growth_check(cp, x, v).verdict if q.holds and ms.is_singleton else None
    return SecondOrderReport(q.holds, bcq, nd, K, ms, gamma, tilt, q.certificate)
