"""Dense two-phase simplex method with Bland's anti-cycling rule.

Small and auditable rather than fast: the problems it sees have a few dozen
variables at most.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import LPError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LPResult:
    status: str
    x: np.ndarray | None
    fun: float
    iterations: int

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    others = np.arange(T.shape[0]) != row
    T[others] -= np.outer(T[others, col], T[row])


def _run(T, basis, allowed, tol, max_iter):
    """Minimize with the objective held in the last row of the tableau."""
    m = T.shape[0] - 1
    it = 0
    while True:
        reduced = T[m, :-1]
        enter = [j for j in allowed if reduced[j] < -tol]
        if not enter:
            return OPTIMAL, it
        if it >= max_iter:
            raise LPError(f"simplex iteration limit {max_iter} reached")
        j = enter[0]
        col = T[:m, j]
        rhs = T[:m, -1]
        pos = np.flatnonzero(col > tol)
        if pos.size == 0:
            return UNBOUNDED, it
        ratios = rhs[pos] / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * (1.0 + abs(best))]
        row = ties[np.argmin(basis[ties])]
        _pivot(T, row, j)
        basis[row] = j
        it += 1


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, free=(),
             tol: float = 1e-9, max_iter: int | None = None) -> LPResult:
    """Minimize c.x subject to A_ub x <= b_ub, A_eq x = b_eq.

    Variables are nonnegative except those listed in ``free``.  The status is
    one of ``optimal``, ``infeasible`` or ``unbounded``; anything else the
    kernel cannot decide raises :class:`LPError`.
    """
    c = np.asarray(c, dtype=float).ravel()
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, float))
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, float).ravel()
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, float).ravel()
    if A_ub.shape[1] != n or A_eq.shape[1] != n:
        raise ValueError("constraint matrix width does not match objective")
    if A_ub.shape[0] != b_ub.size or A_eq.shape[0] != b_eq.size:
        raise ValueError("constraint rows do not match right-hand sides")
    if not (np.all(np.isfinite(A_ub)) and np.all(np.isfinite(A_eq))
            and np.all(np.isfinite(b_ub)) and np.all(np.isfinite(b_eq))
            and np.all(np.isfinite(c))):
        raise LPError("non-finite LP data")

    free = sorted(set(int(i) for i in free))
    # columns: x (n) | negative parts of free vars | slacks for A_ub
    n_free = len(free)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    neg_ub = -A_ub[:, free] if n_free else np.zeros((m_ub, 0))
    neg_eq = -A_eq[:, free] if n_free else np.zeros((m_eq, 0))
    A = np.vstack([
        np.hstack([A_ub, neg_ub, np.eye(m_ub)]),
        np.hstack([A_eq, neg_eq, np.zeros((m_eq, m_ub))]),
    ])
    b = np.concatenate([b_ub, b_eq])
    cost = np.concatenate([c, -c[free] if n_free else np.zeros(0), np.zeros(m_ub)])
    m, N = A.shape
    if max_iter is None:
        max_iter = 50 * (m + N + 10)

    sign = np.where(b < 0, -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))

    # phase one: artificial variable per row
    T = np.zeros((m + 1, N + m + 1))
    T[:m, :N] = A
    T[:m, N:N + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :N] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = np.arange(N, N + m)
    _, it1 = _run(T, basis, list(range(N + m)), tol, max_iter)
    if -T[m, -1] > tol * scale * max(1, m):
        return LPResult(INFEASIBLE, None, np.nan, it1)

    # drive remaining artificials out of the basis; drop redundant rows
    keep = []
    for i in range(m):
        if basis[i] >= N:
            cand = np.flatnonzero(np.abs(T[i, :N]) > tol)
            if cand.size:
                _pivot(T, i, cand[0])
                basis[i] = cand[0]
                keep.append(i)
        else:
            keep.append(i)
    T = np.vstack([T[keep][:, list(range(N)) + [N + m]], np.zeros((1, N + 1))])
    basis = basis[keep]
    mk = len(keep)

    # phase two
    T[mk, :N] = cost
    T[mk, -1] = 0.0
    for i in range(mk):
        T[mk] -= cost[basis[i]] * T[i]
    status, it2 = _run(T, basis, list(range(N)), tol, max_iter)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, None, -np.inf, it1 + it2)

    z = np.zeros(N)
    z[basis] = T[:mk, -1]
    x = z[:n].copy()
    if n_free:
        x[free] -= z[n:n + n_free]
    return LPResult(OPTIMAL, x, float(c @ x), it1 + it2)
