"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import time

import numpy as np
import pytest

from instances import random_polyhedral_instance
from oracles import in_cone, localization_jacobian_closed_form, probe_points, random_cone, soft_threshold
from varpoly import catalog
from varpoly.epi_oracle import QuotientGrid, sampled_d2, sampled_strict_d2
from varpoly.geneq import (
    GeneralizedEquation,
    localization_jacobian,
    localization_probe,
    mr_criteria,
    regularity_spot_check,
)
from varpoly.polyhedral import ConeRep, dd_convert, orthonormal_basis, polar
from varpoly.prox import ProxProblem, prox_c1_check, prox_compute
from varpoly.second_order import (
    mr_modulus_gamma,
    nondegeneracy_check,
    second_subderivative,
    strict_second_subderivative,
)
from varpoly.smooth import PolyMap

BUDGET = 60.0


@pytest.fixture
def verdict(capsys, request):
    start = time.perf_counter()
    state = {}

    def record(ok, detail):
        state["ok"], state["detail"] = bool(ok), detail

    yield record
    elapsed = time.perf_counter() - start
    ok = state.get("ok", False) and elapsed <= BUDGET
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} {request.node.name}: {state.get('detail', 'no verdict')} "
              f"[{elapsed:.1f}s]")
    assert elapsed <= BUDGET, f"took {elapsed:.1f}s"


def _agrees(formula, sampled):
    return sampled > 1e3 if np.isinf(formula) else abs(sampled - formula) <= 1e-3


def _chain_rule_rows(strict):
    rows = []
    for name, cp, ws in catalog.chain_rule_catalog():
        grid = QuotientGrid.default(cp.n, t_min=1e-4)
        for w in ws:
            if strict:
                f = strict_second_subderivative(cp, cp.x_bar, cp.v_bar, w)
                s = sampled_strict_d2(cp, cp.x_bar, cp.v_bar, w, grid).value
            else:
                f = second_subderivative(cp, cp.x_bar, cp.v_bar, w)
                s = sampled_d2(cp, cp.x_bar, cp.v_bar, w, grid).value
            rows.append((name, w, f, s, _agrees(f, s)))
    return rows


def test_criterion_01_chain_rule(verdict):
    rows = _chain_rule_rows(strict=False)
    bad = [r for r in rows if not r[4]]
    verdict(not bad, f"{len(rows) - len(bad)}/{len(rows)} directions agree; mismatches {bad}")
    assert not bad
    assert any(np.isinf(r[2]) for r in rows) and any(np.isfinite(r[2]) for r in rows)


def test_criterion_02_strict_chain_rule(verdict):
    rows = _chain_rule_rows(strict=True)
    bad = [r for r in rows if not r[4]]
    verdict(not bad, f"{len(rows) - len(bad)}/{len(rows)} directions agree; mismatches {bad}")
    assert not bad


def test_criterion_03_prox_oracles(verdict):
    worst = 0.0
    grid = np.linspace(-3, 3, 100)
    for r in (0.1, 0.5, 1.0):
        pp = ProxProblem(catalog.abs_problem(0.0), r, rho_user=0.0, radius=np.inf)
        for x in grid:
            worst = max(worst, abs(prox_compute(pp, [x])[0] - soft_threshold(x, r)))
    rng = np.random.default_rng(7)
    pp = ProxProblem(catalog.circle_problem((1.0, 0.0), (1.0, 0.0)), 1.0, rho_user=0.5, radius=np.inf)
    worst_c = 0.0
    for radius, theta in zip(rng.uniform(0.5, 2.0, 100), rng.uniform(0, 2 * np.pi, 100)):
        x = radius * np.array([np.cos(theta), np.sin(theta)])
        worst_c = max(worst_c, np.abs(prox_compute(pp, x) - x / np.linalg.norm(x)).max())
    ok = worst <= 1e-8 and worst_c <= 1e-8
    verdict(ok, f"soft-threshold error {worst:.1e}, circle error {worst_c:.1e} (tol 1e-8)")
    assert ok


def test_criterion_04_prox_c1_detection(verdict):
    kink = prox_c1_check(ProxProblem(catalog.abs_problem(1.0), 0.5, rho_user=0.0))
    smooth = prox_c1_check(ProxProblem(catalog.abs_problem(0.0), 0.5, rho_user=0.0))
    loc = float(np.ravel(kink.jump_location)[0])
    ok = (kink.verdict == "notC1" and abs(kink.discontinuity - 1.0) <= 0.05 and abs(loc - 0.5) <= 1e-3
          and smooth.verdict == "C1" and smooth.discontinuity <= 1e-6)
    verdict(ok, f"v=1: {kink.verdict}, jump {kink.discontinuity:.4f} at {loc:.6f}; "
                f"v=0: {smooth.verdict}, discontinuity {smooth.discontinuity:.1e}")
    assert ok


def test_criterion_05_localization_jacobian(verdict):
    circle = GeneralizedEquation(PolyMap.identity(2), catalog.circle_problem(), [2.0, 0.0])
    J = localization_jacobian(circle, [1.0, 0.0])
    fd = localization_probe(circle, [1.0, 0.0], radius=1e-3, count=8).fd_jacobian
    half = GeneralizedEquation(PolyMap.identity(1), catalog.halfline_problem(), [1.0])
    Jh = localization_jacobian(half, [0.0])
    fdh = localization_probe(half, [0.0]).fd_jacobian
    exact = np.diag([0.0, 0.5])
    ok = (np.array_equal(J, exact) and np.abs(fd - exact).max() <= 1e-5
          and np.array_equal(Jh, [[0.0]]) and np.abs(fdh).max() <= 1e-9)
    verdict(ok, f"circle exact={np.array_equal(J, exact)}, FD dev {np.abs(fd - exact).max():.1e}; "
                f"halfline exact={np.array_equal(Jh, [[0.0]])}, FD {np.abs(fdh).max():.1e}")
    assert ok


def test_criterion_06_mr_criteria_consistency(verdict):
    rng = np.random.default_rng(2024)
    disagreements, singular_seen, regular_seen = 0, 0, 0
    for k in range(50):
        n = int(rng.integers(1, 6))
        s = int(rng.integers(0, n + 1))
        A = rng.normal(size=(n, n))
        B = orthonormal_basis(rng.normal(size=(s, n)), n).T.reshape(n, -1)
        if k % 2 and s:
            # force B^T A B singular along a random direction
            z = rng.normal(size=s)
            z /= np.linalg.norm(z)
            A = A - B @ np.outer(B.T @ A @ B @ z, z) @ B.T
        c = mr_criteria(A, B)
        if not c["kernel"] == c["span"] == c["reduced"]:
            disagreements += 1
        if c["reduced"]:
            regular_seen += 1
            J = localization_jacobian_closed_form(A, B)
            assert np.allclose(B.T @ A @ J @ A @ B, B.T @ A @ B)
        else:
            singular_seen += 1
    ok = disagreements == 0 and singular_seen > 0 and regular_seen > 0
    verdict(ok, f"{disagreements} disagreements over 50 instances "
                f"({regular_seen} regular, {singular_seen} singular)")
    assert ok


def _catalog_pairs():
    pairs = [cp for _, cp, _ in catalog.chain_rule_catalog()]
    pairs += [catalog.abs_problem(0.0), catalog.abs_problem(1.0), catalog.abs_problem(0.5),
              catalog.circle_problem(), catalog.circle_problem((1, 0), (1, 0)), catalog.sphere_problem(),
              catalog.line_problem(), catalog.square_problem(), catalog.halfline_problem(1.0),
              catalog.halfline_problem(0.0), catalog.zero_problem(2)]
    return pairs


def test_criterion_07_nondegeneracy_triangle(verdict):
    bad = checked = 0
    instances = _catalog_pairs()
    rng = np.random.default_rng(77)
    instances += [random_polyhedral_instance(rng) for _ in range(50)]
    for cp in instances:
        r = nondegeneracy_check(cp, cp.x_bar, cp.v_bar)
        if r.bcq:
            checked += 1
            if not r.ri_of_subdifferential == r.ri_of_outer_subdifferential == r.critical_cone_is_subspace:
                bad += 1
    ok = bad == 0
    verdict(ok, f"{bad} disagreements over {checked} instances with BCQ ({len(instances)} total)")
    assert ok


def test_criterion_08_gamma(verdict):
    errs = [abs(mr_modulus_gamma(catalog.abs_problem(0.0, c), [0.0], [0.0]) - 1 / abs(c)) for c in (1, 2, 5)]
    errs.append(abs(mr_modulus_gamma(catalog.circle_problem(), [1.0, 0.0], [0.0]) - 0.5))
    ok = max(errs) <= 1e-12
    verdict(ok, f"max error {max(errs):.1e} (tol 1e-12)")
    assert ok


def _cone_failures(seed):
    rng = np.random.default_rng(seed)
    d, G = random_cone(rng)
    K = dd_convert(ConeRep.from_generators(G, d))
    fails = 0
    for y in probe_points(rng, G, d):
        inside, outside = in_cone(G, y, 1e-9), not in_cone(G, y, 1e-6)
        h_ok = K.contains(y)
        fails += (inside and not h_ok) or (outside and h_ok)
    back = dd_convert(ConeRep.from_halfspaces(K.halfspaces, d))
    fails += sum(not in_cone(back.generators, g) for g in G)
    fails += sum(not in_cone(G, g) for g in back.generators)
    PP = dd_convert(polar(polar(K)))
    fails += sum(not in_cone(G, g) for g in PP.generators)
    fails += sum(not PP.contains(g) for g in G)
    return int(fails)


def test_criterion_09_polyhedral_kernel(verdict):
    failures = [s for s in range(200) if _cone_failures(10_000 + s)]
    ok = not failures
    verdict(ok, f"{len(failures)} failing cones out of 200 (seeds {failures[:5]})")
    assert ok


def _closed_form_ratio_check(rng, kind):
    """Independent spot check with S and G written out by hand."""
    if kind == "halfline":
        def solution(y):
            return np.array([min(y[0], 0.0)])

        def dist_to_G(y, x):
            if x[0] < 0:
                return abs(y[0] - x[0])
            return max(x[0] - y[0], 0.0)

        x_bar, u_bar, n = np.zeros(1), np.ones(1), 1
        sample_x = lambda: np.array([-abs(rng.uniform(0, 1e-2))]) if rng.random() < 0.8 else np.zeros(1)
    else:
        def solution(y):
            return y / np.linalg.norm(y)

        def dist_to_G(y, x):
            return float(np.linalg.norm((np.eye(2) - np.outer(x, x)) @ (y - x)))

        x_bar, u_bar, n = np.array([1.0, 0.0]), np.array([2.0, 0.0]), 2

        def sample_x():
            a = rng.uniform(-1e-2, 1e-2)
            return np.array([np.cos(a), np.sin(a)])

    def ratios(count):
        out = []
        while len(out) < count:
            x = sample_x()
            y = u_bar + rng.uniform(-1e-2, 1e-2, n)
            num, den = np.linalg.norm(x - solution(y)), dist_to_G(y, x)
            if den > 1e-12:
                out.append(num / den)
        return np.array(out)

    kappa = 2 * ratios(40).max()
    return int(np.sum(ratios(100) > kappa))


def test_criterion_10_regularity_spot_check(verdict):
    half = GeneralizedEquation(PolyMap.identity(1), catalog.halfline_problem(), [1.0])
    circle = GeneralizedEquation(PolyMap.identity(2), catalog.circle_problem(), [2.0, 0.0])
    lib = [regularity_spot_check(half, [0.0]), regularity_spot_check(circle, [1.0, 0.0])]
    rng = np.random.default_rng(5)
    indep = [_closed_form_ratio_check(rng, "halfline"), _closed_form_ratio_check(rng, "circle")]
    ok = all(r.pairs == 100 and r.violations == 0 for r in lib) and not any(indep)
    verdict(ok, f"violations halfline {lib[0].violations}/100 (kappa {lib[0].kappa:.3g}), "
                f"circle {lib[1].violations}/100 (kappa {lib[1].kappa:.3g}); closed-form recheck {indep}")
    assert ok
