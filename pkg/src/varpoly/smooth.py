"""Polynomial maps with exact derivatives, and composite problems g(Phi(x))."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .config import DEFAULT_TOL, DimensionError, PreconditionError, Tolerances
from .polyhedral import PolyhedralFunction, PolytopeRep, active_sets, member, subdifferential

Poly = Mapping[tuple, float]


def _clean(poly: Poly, n: int) -> dict:
    out: dict = {}
    for exp, c in poly.items():
        exp = tuple(int(e) for e in exp)
        if len(exp) != n:
            raise DimensionError(f"exponent {exp} does not have length {n}")
        if any(e < 0 for e in exp):
            raise ValueError("negative exponents are not polynomial")
        c = float(c)
        if c != 0.0:
            out[exp] = out.get(exp, 0.0) + c
    return {e: c for e, c in out.items() if c != 0.0}


def _derive(poly: dict, i: int) -> dict:
    out: dict = {}
    for exp, c in poly.items():
        if exp[i]:
            e = list(exp)
            e[i] -= 1
            out[tuple(e)] = out.get(tuple(e), 0.0) + c * exp[i]
    return out


def _mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for e1, c1 in p.items():
        for e2, c2 in q.items():
            e = tuple(a + b for a, b in zip(e1, e2))
            out[e] = out.get(e, 0.0) + c1 * c2
    return {e: c for e, c in out.items() if c != 0.0}


class _Tables:
    """All monomials of a map and its derivatives, with coefficient matrices.

    One power table is evaluated per point; values, Jacobian and Hessian are
    then matrix products against it.
    """

    def __init__(self, comps, n: int):
        m = len(comps)
        grads = [[_derive(p, i) for i in range(n)] for p in comps]
        hess = [[[_derive(d, j) for j in range(n)] for d in row] for row in grads]
        exps: dict = {}
        for poly in [*comps, *(d for r in grads for d in r), *(d for c in hess for r in c for d in r)]:
            for e in poly:
                exps.setdefault(e, len(exps))
        k = max(len(exps), 1)
        self.E = np.array(list(exps) or [(0,) * n], dtype=int).reshape(-1, n)
        self.maxdeg = int(self.E.max(initial=0))

        def mat(polys):
            M = np.zeros((len(polys), k))
            for r, poly in enumerate(polys):
                for e, c in poly.items():
                    M[r, exps[e]] += c
            return M

        self.V = mat(list(comps))
        self.J = mat([d for r in grads for d in r])
        self.H = mat([d for c in hess for r in c for d in r])
        self.m, self.n = m, n

    def mono(self, x: np.ndarray) -> np.ndarray:
        if self.maxdeg == 0:
            return np.ones(self.E.shape[0])
        P = np.ones((self.maxdeg + 1, x.size))
        for d in range(1, self.maxdeg + 1):
            P[d] = P[d - 1] * x
        return np.prod(P[self.E, np.arange(x.size)], axis=1)

    def mono_batch(self, X: np.ndarray) -> np.ndarray:
        M = np.ones((X.shape[0], self.E.shape[0]))
        for j in range(self.n):
            M *= X[:, j:j + 1] ** self.E[:, j]
        return M


class PolyMap:
    """Vector of multivariate polynomials R^n_in -> R^n_out.

    Each component is a mapping from exponent tuples to coefficients.  Values,
    Jacobians and Hessians are evaluated from exactly differentiated
    coefficient tables.
    """

    def __init__(self, components, n_in: int):
        self.n_in = int(n_in)
        self.components = tuple(_clean(p, self.n_in) for p in components)
        self.n_out = len(self.components)
        self._t = _Tables(self.components, self.n_in)

    # constructors -----------------------------------------------------------
    @classmethod
    def linear(cls, M, offset=None) -> "PolyMap":
        M = np.atleast_2d(np.asarray(M, float))
        m, n = M.shape
        off = np.zeros(m) if offset is None else np.asarray(offset, float)
        comps = []
        for k in range(m):
            p = {tuple(int(i == j) for i in range(n)): M[k, j] for j in range(n)}
            p[(0,) * n] = off[k]
            comps.append(p)
        return cls(comps, n)

    @classmethod
    def identity(cls, n: int) -> "PolyMap":
        return cls.linear(np.eye(n))

    def compose_linear(self, M) -> "PolyMap":
        """The map y -> self(M y)."""
        M = np.atleast_2d(np.asarray(M, float))
        if M.shape[0] != self.n_in:
            raise DimensionError("inner map output does not match input dimension")
        n = M.shape[1]
        lin = [{tuple(int(i == j) for i in range(n)): M[k, j] for j in range(n)} for k in range(self.n_in)]
        one = {(0,) * n: 1.0}
        comps = []
        for p in self.components:
            acc: dict = {}
            for exp, c in p.items():
                term = dict(one)
                for k, e in enumerate(exp):
                    for _ in range(e):
                        term = _mul(term, lin[k])
                for e2, c2 in term.items():
                    acc[e2] = acc.get(e2, 0.0) + c * c2
            comps.append(acc)
        return PolyMap(comps, n)

    def __eq__(self, other):
        return isinstance(other, PolyMap) and self.n_in == other.n_in and self.components == other.components

    def __repr__(self):
        return f"PolyMap(n_in={self.n_in}, n_out={self.n_out}, components={list(self.components)})"

    # calculus ---------------------------------------------------------------
    def _x(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, float))
        if x.shape != (self.n_in,):
            raise DimensionError(f"expected a point of length {self.n_in}, got shape {x.shape}")
        return x

    def value(self, x) -> np.ndarray:
        return self._t.V @ self._t.mono(self._x(x))

    def value_and_scale(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Value and the sum of absolute term sizes (a rounding-error scale)."""
        mono = self._t.mono(self._x(x))
        return self._t.V @ mono, np.abs(self._t.V) @ np.abs(mono)

    def value_scale_jacobian(self, x):
        """Value, rounding scale and Jacobian from a single power table."""
        mono = self._t.mono(self._x(x))
        return (self._t.V @ mono, np.abs(self._t.V) @ np.abs(mono),
                (self._t.J @ mono).reshape(self.n_out, self.n_in))

    def batch(self, X):
        """Values (N, m), rounding scales (N, m) and Jacobians (N, m, n) at the rows of X."""
        X = np.asarray(X, float).reshape(-1, self.n_in)
        M = self._t.mono_batch(X)
        return (M @ self._t.V.T, np.abs(M) @ np.abs(self._t.V.T),
                (M @ self._t.J.T).reshape(-1, self.n_out, self.n_in))

    def jacobian(self, x) -> np.ndarray:
        return (self._t.J @ self._t.mono(self._x(x))).reshape(self.n_out, self.n_in)

    def hessian(self, x) -> np.ndarray:
        return (self._t.H @ self._t.mono(self._x(x))).reshape(self.n_out, self.n_in, self.n_in)


class CallableMap:
    """User-supplied smooth map with its own derivatives (library use only)."""

    def __init__(self, n_in: int, n_out: int, value: Callable, jacobian: Callable, hessian: Callable):
        self.n_in, self.n_out = int(n_in), int(n_out)
        self._f, self._j, self._h = value, jacobian, hessian

    def value(self, x):
        return np.asarray(self._f(np.asarray(x, float)), float).reshape(self.n_out)

    def value_and_scale(self, x):
        v = self.value(x)
        return v, np.maximum(np.abs(v), 1.0)

    def value_scale_jacobian(self, x):
        v, sc = self.value_and_scale(x)
        return v, sc, self.jacobian(x)

    def batch(self, X):
        parts = [self.value_scale_jacobian(x) for x in np.asarray(X, float).reshape(-1, self.n_in)]
        if not parts:
            return np.zeros((0, self.n_out)), np.zeros((0, self.n_out)), np.zeros((0, self.n_out, self.n_in))
        return tuple(np.array(p) for p in zip(*parts))

    def jacobian(self, x):
        return np.asarray(self._j(np.asarray(x, float)), float).reshape(self.n_out, self.n_in)

    def hessian(self, x):
        return np.asarray(self._h(np.asarray(x, float)), float).reshape(self.n_out, self.n_in, self.n_in)


def eval_map(phi, x) -> np.ndarray:
    return phi.value(x)


def jacobian(phi, x) -> np.ndarray:
    return phi.jacobian(x)


def hessian(phi, x) -> np.ndarray:
    return phi.hessian(x)


def hessian_lambda(phi, x, lam) -> np.ndarray:
    """sum_k lam_k * Hessian of component k."""
    lam = np.atleast_1d(np.asarray(lam, float))
    if lam.shape != (phi.n_out,):
        raise DimensionError(f"expected a multiplier of length {phi.n_out}")
    H = np.tensordot(lam, phi.hessian(x), axes=1)
    return 0.5 * (H + H.T)


@dataclass(frozen=True)
class FDReport:
    jacobian_deviation: float
    hessian_deviation: float
    h: float


def fd_validate(phi, x, h: float = 1e-4) -> FDReport:
    """Compare exact derivatives with central differences of the values."""
    if h <= 0:
        raise ValueError("step must be positive")
    x = np.atleast_1d(np.asarray(x, float))
    n = phi.n_in
    E = np.eye(n) * h
    J = np.column_stack([(phi.value(x + E[i]) - phi.value(x - E[i])) / (2 * h) for i in range(n)])
    H = np.zeros((phi.n_out, n, n))
    for i in range(n):
        for j in range(n):
            H[:, i, j] = (phi.value(x + E[i] + E[j]) - phi.value(x + E[i] - E[j])
                          - phi.value(x - E[i] + E[j]) + phi.value(x - E[i] - E[j])) / (4 * h * h)
    jd = float(np.abs(J - phi.jacobian(x)).max(initial=0.0))
    hd = float(np.abs(H - phi.hessian(x)).max(initial=0.0))
    return FDReport(jd, hd, h)


# ---------------------------------------------------------------------------


class CompositeProblem:
    """phi = g o Phi with optional base point and base subgradient.

    When both ``x_bar`` and ``v_bar`` are given, membership of ``v_bar`` in the
    subdifferential at ``x_bar`` is certified by LP on construction.
    """

    def __init__(self, g: PolyhedralFunction, Phi, x_bar=None, v_bar=None, tol: Tolerances = DEFAULT_TOL):
        if Phi.n_out != g.m:
            raise DimensionError(f"Phi has {Phi.n_out} outputs but g lives in R^{g.m}")
        self.g, self.Phi, self.tol = g, Phi, tol
        self.n, self.m = Phi.n_in, g.m
        self.x_bar = None if x_bar is None else np.atleast_1d(np.asarray(x_bar, float))
        self.v_bar = None if v_bar is None else np.atleast_1d(np.asarray(v_bar, float))
        if self.x_bar is not None and self.v_bar is not None:
            if not self.in_domain(self.x_bar):
                raise PreconditionError("base_point_in_domain")
            if not member(self.subgradients(self.x_bar), self.v_bar):
                raise PreconditionError("base_subgradient",
                                        f"v_bar={self.v_bar.tolist()} is not a subgradient at x_bar")

    def with_base(self, x_bar, v_bar) -> "CompositeProblem":
        return CompositeProblem(self.g, self.Phi, x_bar, v_bar, self.tol)

    def _row_slack(self, x):
        z, scale = self.Phi.value_and_scale(x)
        g = self.g
        if not g.n_rows:
            return z, np.zeros(0), np.zeros(0)
        slack = g.b @ z - g.beta
        # rounding-aware tolerance: a few ulps of the term magnitudes
        room = 16 * np.finfo(float).eps * (np.abs(g.b) @ scale + np.abs(g.beta))
        return z, slack, room

    def value(self, x) -> float:
        """phi(x), treating domain rows as satisfied up to rounding of Phi."""
        z, slack, room = self._row_slack(x)
        if np.any(slack > room):
            return np.inf
        return float(np.max(self.g.a @ z - self.g.alpha))

    def values(self, X) -> np.ndarray:
        """phi at each row of X (vectorized ``value``)."""
        Z, S, _ = self.Phi.batch(X)
        g = self.g
        out = np.max(Z @ g.a.T - g.alpha, axis=1)
        if g.n_rows:
            slack = Z @ g.b.T - g.beta
            room = 16 * np.finfo(float).eps * (S @ np.abs(g.b).T + np.abs(g.beta))
            out[np.any(slack > room, axis=1)] = np.inf
        return out

    def in_domain(self, x, tol: float | None = None) -> bool:
        z, slack, room = self._row_slack(x)
        bound = room if tol is None else np.maximum(room, tol)
        return not np.any(slack > bound)

    def subgradients(self, x) -> PolytopeRep:
        """Subdifferential at x assembled as Phi'(x)^T applied to the subdifferential of g."""
        z = self.Phi.value(x)
        return subdifferential(self.g, z, self.tol).image(self.Phi.jacobian(x).T)

    def active(self, x):
        return active_sets(self.g, self.Phi.value(x), self.tol)

    def __repr__(self):
        return f"CompositeProblem(n={self.n}, m={self.m}, x_bar={self.x_bar}, v_bar={self.v_bar})"
