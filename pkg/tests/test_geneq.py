import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import localization_jacobian_closed_form
from varpoly import catalog
from varpoly.config import PreconditionError, SolveError
from varpoly.geneq import (
    GeneralizedEquation,
    check_solution,
    localization_jacobian,
    localization_probe,
    mr_check,
    mr_criteria,
    regularity_spot_check,
    solve_ge,
    stability_report,
)
from varpoly.polyhedral import orthonormal_basis
from varpoly.smooth import PolyMap


def halfline_ge(u=1.0):
    return GeneralizedEquation(PolyMap.identity(1), catalog.halfline_problem(), [u])


def circle_ge(u=(2.0, 0.0)):
    return GeneralizedEquation(PolyMap.identity(2), catalog.circle_problem(), u)


def zero_ge(n=2, f=None):
    return GeneralizedEquation(f or PolyMap.identity(n), catalog.zero_problem(n), np.zeros(n))


def test_check_solution():
    r = check_solution(halfline_ge(1.0), [0.0])
    assert r.is_solution and r.nondegenerate
    r = check_solution(halfline_ge(0.0), [0.0])
    assert r.is_solution and not r.nondegenerate
    r = check_solution(circle_ge(), [1.0, 0.0])
    assert r.is_solution and r.nondegenerate
    with pytest.raises(PreconditionError) as e:
        check_solution(halfline_ge(-1.0), [0.0])
    assert e.value.precondition == "solution"


def test_mr_check_examples():
    zero_f = PolyMap.linear(np.zeros((2, 2)))
    assert not mr_check(zero_ge(2, zero_f), np.zeros(2))
    assert mr_check(circle_ge(), [1.0, 0.0])
    assert mr_check(halfline_ge(), [0.0])


def test_mr_check_refuses_degenerate():
    with pytest.raises(PreconditionError) as e:
        mr_check(halfline_ge(0.0), [0.0])
    assert e.value.precondition == "nondegenerate"


def test_stability_report_circle():
    rep = stability_report(circle_ge(), [1.0, 0.0])
    assert rep.nondegenerate and rep.mr and rep.smr
    assert np.allclose(rep.A, 2 * np.eye(2))
    assert np.allclose(np.abs(rep.B.ravel()), [0.0, 1.0])
    assert np.array_equal(rep.sigma_jacobian, np.diag([0.0, 0.5]))


def test_localization_jacobian_examples():
    assert np.array_equal(localization_jacobian(halfline_ge(), [0.0]), [[0.0]])
    assert np.allclose(localization_jacobian(zero_ge(2), np.zeros(2)), np.eye(2))
    assert np.allclose(localization_jacobian(circle_ge(), [1.0, 0.0]), np.diag([0.0, 0.5]), atol=1e-15)


def test_jacobian_range_and_kernel():
    rep = stability_report(circle_ge(), [1.0, 0.0])
    J, B = rep.sigma_jacobian, rep.B
    P = B @ B.T
    assert np.allclose(P @ J, J) and np.allclose(J @ P, J)
    BAB = B.T @ rep.A @ B
    assert np.allclose(BAB @ np.linalg.inv(BAB), np.eye(B.shape[1]), atol=1e-12)


def test_solve_ge_examples():
    assert solve_ge(halfline_ge(), [0.7], [0.0]) == pytest.approx([0.0], abs=1e-12)
    assert solve_ge(halfline_ge(), [-0.3], [0.0]) == pytest.approx([-0.3])
    u = np.array([1.9, 0.1])
    assert np.allclose(solve_ge(circle_ge(), u, [1.0, 0.0]), u / np.linalg.norm(u), atol=1e-12)


def test_solve_ge_reports_failure():
    # x^2 + 1 = 0.5 has no real solution
    ge = GeneralizedEquation(PolyMap([{(2,): 1.0, (0,): 1.0}], 1), catalog.zero_problem(1), [1.0])
    with pytest.raises(SolveError):
        solve_ge(ge, [0.5], [0.0])


def test_localization_probe_examples():
    p = localization_probe(circle_ge(), [1.0, 0.0], radius=1e-3, count=8)
    assert np.abs(p.fd_jacobian - np.diag([0.0, 0.5])).max() <= 1e-5
    p = localization_probe(halfline_ge(), [0.0])
    assert np.abs(p.fd_jacobian).max() <= 1e-9
    p = localization_probe(zero_ge(2), np.zeros(2))
    assert np.abs(p.fd_jacobian - np.eye(2)).max() <= 1e-9


def test_regularity_spot_checks():
    for ge, x in ((halfline_ge(), [0.0]), (circle_ge(), [1.0, 0.0])):
        r = regularity_spot_check(ge, x)
        assert r.pairs == 100 and r.violations == 0


def random_instance(rng, singular):
    n = int(rng.integers(1, 6))
    s = int(rng.integers(0, n + 1))
    A = rng.normal(size=(n, n))
    B = orthonormal_basis(rng.normal(size=(s, n)), n).T.reshape(n, -1) if s else np.zeros((n, 0))
    if singular and B.shape[1]:
        z = rng.normal(size=B.shape[1])
        z /= np.linalg.norm(z)
        M = B.T @ A @ B
        A = A - B @ np.outer(M @ z, z) @ B.T
    return A, B


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000), st.booleans())
def test_mr_criteria_agree(seed, singular):
    A, B = random_instance(np.random.default_rng(seed), singular)
    c = mr_criteria(A, B)
    assert c["kernel"] == c["span"] == c["reduced"]
    if singular and B.shape[1]:
        assert not c["reduced"]
    if c["reduced"]:
        J = localization_jacobian_closed_form(A, B)
        assert np.allclose(J @ A @ J, J, atol=1e-8 * max(1.0, np.abs(J).max()) ** 3)
