"""Brute-force second-order oracles built only from function values.

Nothing here uses multipliers, critical cones or the chain rules; the values
are minima of difference quotients over finite grids and are meant to be
compared against the formulas in :mod:`varpoly.second_order`.

A sampled minimum is an upper estimate of a liminf: report it as "at most the
observed value", never as the value itself.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .config import PreconditionError
from .sampling import GphSample, repair_batch, repair_to_domain, sample_gph
from .smooth import CompositeProblem

__all__ = [
    "QuotientGrid", "SampledValue", "SampledFunction", "EpiProbe", "GphSample",
    "delta2", "sampled_d2", "sampled_strict_d2", "sample_gph", "epi_distance",
    "epi_convergence_probe", "write_quotient_csv",
]


def delta2(cp: CompositeProblem, x, v, t: float, w) -> float:
    """[phi(x + t w) - phi(x) - t <v, w>] / (t^2 / 2)."""
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.atleast_1d(np.asarray(x, float))
    v = np.atleast_1d(np.asarray(v, float))
    w = np.atleast_1d(np.asarray(w, float))
    fx = cp.value(x)
    if not np.isfinite(fx):
        raise PreconditionError("point_in_domain", f"x={x.tolist()} is outside dom phi")
    fy = cp.value(x + t * w)
    if not np.isfinite(fy):
        return np.inf
    return (fy - fx - t * float(v @ w)) / (0.5 * t * t)


def _ball_points(n: int, count: int, seed: int) -> np.ndarray:
    if n == 1:
        return np.linspace(-1.0, 1.0, count).reshape(-1, 1)
    rng = np.random.default_rng(seed)
    pts = [np.zeros(n)]
    for i in range(n):
        for s in (1.0, 0.5, -0.5, -1.0):
            e = np.zeros(n)
            e[i] = s
            pts.append(e)
    d = rng.normal(size=(count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = rng.uniform(size=(count, 1)) ** (1.0 / n)
    pts.extend(d * r)
    d = rng.normal(size=(count // 2, n))
    pts.extend(d / np.linalg.norm(d, axis=1, keepdims=True))
    return np.array(pts)


@dataclass(frozen=True, eq=False)
class QuotientGrid:
    """Step sizes, perturbations of the direction and refinement levels.

    ``levels`` are decreasing thresholds; the level-k value is the minimum over
    all samples whose step is at most ``levels[k]``.  Perturbed directions are
    ``w + 2 t u`` for ``u`` in ``ball``.
    """

    t_values: np.ndarray
    levels: np.ndarray
    ball: np.ndarray
    strict_steps: tuple = (1.0, 0.5, 0.2, 0.1)
    base_count: int = 16
    per_point: int = 3

    @classmethod
    def default(cls, n: int, t_max: float = 1e-1, t_min: float = 1e-4, per_level: int = 3,
                ball_size: int = 41, seed: int = 42) -> "QuotientGrid":
        k = int(round(np.log10(t_max / t_min)))
        t = np.geomspace(t_max, t_min, k * per_level + 1)
        levels = np.geomspace(t_max, t_min, k + 1)
        return cls(t, levels, _ball_points(n, ball_size if n == 1 else 16, seed))

    def __post_init__(self):
        if len(self.levels) < 3:
            raise ValueError("at least three refinement levels are needed")
        if np.any(np.diff(self.t_values) >= 0):
            raise ValueError("step sizes must be strictly decreasing")


@dataclass(eq=False)
class SampledValue:
    """Outcome of a sampled liminf: level-wise minima and an extrapolated estimate."""

    value: float
    level_minima: list
    level_thresholds: list
    divergent: bool
    records: list = field(default_factory=list)  # (t, w_prime, quotient)

    def __float__(self):
        return float(self.value)

    @property
    def finest(self) -> float:
        return self.level_minima[-1]


def _local_min(cp, x, v, fx, t, w, ball, records=None):
    """Smallest quotient over w' in the ball of radius 2t around w (domain-repaired)."""
    WP = w + 2.0 * t * ball
    Y = x + t * WP
    f = cp.values(Y)
    bad = ~np.isfinite(f)
    if bad.any():
        # an accepted repair moves y by at most 4 t^2; allow twice that
        Yr = repair_batch(cp, Y[bad], max_move=8.0 * t * t)
        fr = np.full(len(Yr), np.inf)
        live = np.all(np.isfinite(Yr), axis=1)
        WP[bad] = (Yr - x) / t
        live &= np.linalg.norm(WP[bad] - w, axis=1) <= 2.0 * t * (1 + 1e-9)
        if live.any():
            fr[live] = cp.values(Yr[live])
        f[bad] = fr
    good = np.isfinite(f)
    if not good.any():
        return np.inf
    q = np.full(len(f), np.inf)
    q[good] = (f[good] - fx - t * (WP[good] @ v)) / (0.5 * t * t)
    i = int(np.argmin(q))
    if records is not None:
        records.append((t, WP[i].copy(), float(q[i])))
    return float(q[i])


def _summarize(per_sample, grid: QuotientGrid, records) -> SampledValue:
    """per_sample: list of (level_index_of_step, quotient)."""
    minima = []
    for k in range(len(grid.levels)):
        vals = [q for lev, q in per_sample if lev >= k]
        minima.append(min(vals) if vals else np.inf)
    mK, mK1, mK2 = minima[-1], minima[-2], minima[-3]
    divergent = not np.isfinite(mK) or (
        mK > 0 and mK1 > 0 and mK2 > 0 and mK >= 3 * mK1 and mK1 >= 3 * mK2)
    if divergent:
        value = np.inf
    else:
        q = grid.levels[-1] / grid.levels[-2]
        value = mK + (mK - mK1) * q / (1 - q) if np.isfinite(mK1) else mK
    return SampledValue(float(value), [float(m) for m in minima], [float(l) for l in grid.levels],
                        bool(divergent), records)


def _level_of(t, levels) -> int:
    return int(np.sum(levels >= t * (1 - 1e-12))) - 1


def sampled_d2(cp: CompositeProblem, x, v, w, grid: QuotientGrid | None = None) -> SampledValue:
    """Minimum of quotients over (t, w') with w' within 2t of w, per refinement level."""
    x = np.atleast_1d(np.asarray(x, float))
    v = np.atleast_1d(np.asarray(v, float))
    w = np.atleast_1d(np.asarray(w, float))
    grid = grid or QuotientGrid.default(x.size)
    fx = cp.value(x)
    if not np.isfinite(fx):
        raise PreconditionError("point_in_domain")
    records: list = []
    per = [(_level_of(t, grid.levels), _local_min(cp, x, v, fx, t, w, grid.ball, records))
           for t in grid.t_values]
    return _summarize(per, grid, records)


def sampled_strict_d2(cp: CompositeProblem, x_bar, v_bar, w, grid: QuotientGrid | None = None,
                      seed: int = 42) -> SampledValue:
    """As sampled_d2, also minimizing over base pairs of the graph within radius t_k of the base pair.

    Base pairs are not filtered by |phi(x) - phi(x_bar)|.  That filter is
    redundant when SOQC holds; callers should flag results where it does not.
    """
    x_bar = np.atleast_1d(np.asarray(x_bar, float))
    v_bar = np.atleast_1d(np.asarray(v_bar, float))
    w = np.atleast_1d(np.asarray(w, float))
    grid = grid or QuotientGrid.default(x_bar.size)
    rng = np.random.default_rng(seed)
    records: list = []
    per = []
    for k, rho in enumerate(grid.levels):
        sample = sample_gph(cp, x_bar, v_bar, rho, grid.base_count, rng)
        bases = [(x_bar, v_bar)]
        by_point: dict = {}
        for x, v in sample.pairs:
            if np.linalg.norm(v - v_bar) <= rho:
                by_point.setdefault(x.tobytes(), []).append((x, v))
        for group in by_point.values():
            # the subgradient nearest v_bar, plus up to two others
            group.sort(key=lambda p: float(np.linalg.norm(p[1] - v_bar)))
            extra = group[1:]
            pick = rng.permutation(len(extra))[:grid.per_point - 1] if extra else []
            bases.append(group[0])
            bases.extend(extra[i] for i in pick)
        for x, v in bases:
            fx = cp.value(x)
            if not np.isfinite(fx):
                continue
            for s in grid.strict_steps:
                per.append((k, _local_min(cp, x, v, fx, rho * s, w, grid.ball, records)))
    return _summarize(per, grid, records)


# ---------------------------------------------------------------------------
# epigraph distance


@dataclass(frozen=True, eq=False)
class SampledFunction:
    points: np.ndarray
    values: np.ndarray

    @classmethod
    def of(cls, points, values) -> "SampledFunction":
        p = np.asarray(points, float)
        p = p.reshape(len(p), -1)
        return cls(p, np.asarray(values, float).ravel())


def _one_sided(pa, fa, pb, fb, rho):
    worst = 0.0
    D = np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=2)
    for i in np.flatnonzero(fa <= rho):
        gap = np.maximum(fb - fa[i], 0.0)
        d = np.sqrt(D[i] ** 2 + gap ** 2)
        d = d[fb <= rho]
        worst = max(worst, min(d.min(initial=np.inf), rho))
    return worst


def epi_distance(fa: SampledFunction, fb: SampledFunction, rho: float) -> float:
    """Hausdorff distance between epigraphs truncated at height rho, capped at rho.

    Each sample contributes the vertical segment from its (clipped) value up
    to rho; samples above rho contribute nothing.
    """
    if fa.points.shape != fb.points.shape or not np.allclose(fa.points, fb.points, rtol=0, atol=0):
        raise ValueError("epi_distance needs both functions sampled on the same grid")
    a = np.maximum(fa.values, -rho)
    b = np.maximum(fb.values, -rho)
    return max(_one_sided(fa.points, a, fb.points, b, rho), _one_sided(fb.points, b, fa.points, a, rho))


def _w_grid(n: int, radius: float, seed: int) -> np.ndarray:
    if n == 1:
        return np.linspace(-radius, radius, 21).reshape(-1, 1)
    if n == 2:
        s = np.linspace(-radius, radius, 9)
        pts = np.array([(a, b) for a in s for b in s])
        return pts[np.linalg.norm(pts, axis=1) <= radius * (1 + 1e-12)]
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(60, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return np.vstack([np.zeros(n), radius * rng.uniform(size=(60, 1)) ** (1 / n) * d])


@dataclass(eq=False)
class EpiProbe:
    status: str                 # "consistent" or "inconsistent"
    pattern: str                # "convergent", "divergent" or "neither"
    ri_verdict: bool
    distances: list
    t_levels: list
    records: list = field(default_factory=list)


def epi_convergence_probe(cp: CompositeProblem, x_bar, v_bar, rho: float = 1.0, levels=(1e-1, 1e-2, 1e-3, 1e-4),
                          base_count: int = 8, tau: float | None = None, seed: int = 42) -> EpiProbe:
    """Track the truncated epigraph distance between sampled quotient functions and the formula."""
    from .second_order import nondegeneracy_check, second_subderivative, soqc_check, lagrange_multipliers

    x_bar = np.atleast_1d(np.asarray(x_bar, float))
    v_bar = np.atleast_1d(np.asarray(v_bar, float))
    tau = cp.tol.epi if tau is None else tau
    ms = lagrange_multipliers(cp, x_bar, v_bar)
    if ms.is_empty:
        raise PreconditionError("multiplier_exists")
    if not soqc_check(cp, x_bar, ms.representative()).holds:
        raise PreconditionError("soqc")
    ri = nondegeneracy_check(cp, x_bar, v_bar).verdict
    W = _w_grid(x_bar.size, rho, seed)
    target = SampledFunction.of(W, [second_subderivative(cp, x_bar, v_bar, w) for w in W])
    ball = _ball_points(x_bar.size, 9 if x_bar.size == 1 else 8, seed)
    rng = np.random.default_rng(seed)
    dists, records = [], []
    for t in levels:
        sample = sample_gph(cp, x_bar, v_bar, t, base_count, rng)
        bases = [(x_bar, v_bar)] + [(x, v) for x, v in sample.pairs if np.linalg.norm(v - v_bar) <= t]
        worst = 0.0
        for x, v in bases:
            fx = cp.value(x)
            vals = [_local_min(cp, x, v, fx, t, w, ball) for w in W]
            if x is bases[0][0]:
                records.extend((t, w, q) for w, q in zip(W, vals))
            worst = max(worst, epi_distance(SampledFunction.of(W, vals), target, rho))
        dists.append(worst)
    tail = dists[-2:]
    if all(d < tau for d in dists[-1:]):
        pattern = "convergent"
    elif all(d > 10 * tau for d in tail):
        pattern = "divergent"
    else:
        pattern = "neither"
    ok = (ri and pattern == "convergent") or (not ri and pattern == "divergent")
    return EpiProbe("consistent" if ok else "inconsistent", pattern, ri, dists, list(levels), records)


def write_quotient_csv(path, records) -> None:
    """Columns: t, w_prime (components joined by ';'), quotient."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["t", "w_prime", "quotient"])
        for t, w, q in records:
            w = np.atleast_1d(w)
            out.writerow(["%.12e" % t, ";".join("%.12e" % c for c in w), "%.12e" % q])
