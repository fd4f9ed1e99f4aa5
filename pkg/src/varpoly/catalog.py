"""Small named instances used throughout the tests, demos and problem files."""

from __future__ import annotations

import numpy as np

from .polyhedral import PolyhedralFunction
from .smooth import CompositeProblem, PolyMap


def abs_value() -> PolyhedralFunction:
    return PolyhedralFunction.build([([1.0], 0.0), ([-1.0], 0.0)])


def max2() -> PolyhedralFunction:
    return PolyhedralFunction.build([([1.0, 0.0], 0.0), ([0.0, 1.0], 0.0)])


def nonpositive_orthant(m: int) -> PolyhedralFunction:
    """Indicator of the nonpositive orthant in R^m."""
    return PolyhedralFunction.build([(np.zeros(m), 0.0)], [(row, 0.0) for row in np.eye(m)])


def origin_indicator(m: int = 1) -> PolyhedralFunction:
    """Indicator of {0} in R^m written with paired rows."""
    rows = [(row, 0.0) for row in np.eye(m)] + [(-row, 0.0) for row in np.eye(m)]
    return PolyhedralFunction.build([(np.zeros(m), 0.0)], rows)


def linear_g(c) -> PolyhedralFunction:
    c = np.atleast_1d(np.asarray(c, float))
    return PolyhedralFunction.build([(c, 0.0)])


def abs_problem(v_bar=0.0, scale=1.0) -> CompositeProblem:
    """|c x| at 0 with Phi(x) = c x."""
    return CompositeProblem(abs_value(), PolyMap.linear([[scale]]), [0.0], [v_bar])


def abs_max_problem(v_bar=0.0) -> CompositeProblem:
    """|x| written as max(z1, z2) after Phi(x) = (x, -x)."""
    return CompositeProblem(max2(), PolyMap.linear([[1.0], [-1.0]]), [0.0], [v_bar])


def abs_quadratic_problem(v_bar=-1.0) -> CompositeProblem:
    """|x^2 - x| at 0."""
    phi = PolyMap([{(2,): 1.0, (1,): -1.0}], 1)
    return CompositeProblem(abs_value(), phi, [0.0], [v_bar])


def nlp_problem(lam_bar=(1.0, 0.0)) -> CompositeProblem:
    """Constraints x1^2 - x2 <= 0 and x1 + x2^2 <= 0 at the origin (both active)."""
    phi = PolyMap([{(2, 0): 1.0, (0, 1): -1.0}, {(1, 0): 1.0, (0, 2): 1.0}], 2)
    lam = np.asarray(lam_bar, float)
    v = phi.jacobian(np.zeros(2)).T @ lam
    return CompositeProblem(nonpositive_orthant(2), phi, np.zeros(2), v)


def circle_problem(x_bar=(1.0, 0.0), v_bar=(0.0, 0.0)) -> CompositeProblem:
    """Indicator of the unit circle, Phi(x) = |x|^2 - 1."""
    phi = PolyMap([{(2, 0): 1.0, (0, 2): 1.0, (0, 0): -1.0}], 2)
    return CompositeProblem(origin_indicator(1), phi, x_bar, v_bar)


def sphere_problem() -> CompositeProblem:
    phi = PolyMap([{(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): 1.0, (0, 0, 0): -1.0}], 3)
    return CompositeProblem(origin_indicator(1), phi, [1.0, 0.0, 0.0], np.zeros(3))


def line_problem() -> CompositeProblem:
    """Indicator of {x2 = 0} in R^2."""
    return CompositeProblem(origin_indicator(1), PolyMap.linear([[0.0, 1.0]]), np.zeros(2), np.zeros(2))


def neg_square_halfline_problem() -> CompositeProblem:
    """-x^2 + indicator of x <= 0, as g(z) = z2 + indicator(z1 <= 0), Phi(x) = (x, -x^2)."""
    g = PolyhedralFunction.build([([0.0, 1.0], 0.0)], [([1.0, 0.0], 0.0)])
    phi = PolyMap([{(1,): 1.0}, {(2,): -1.0}], 1)
    return CompositeProblem(g, phi, [0.0], [0.0])


def square_problem() -> CompositeProblem:
    """x^2 as g(z) = z after Phi(x) = x^2."""
    return CompositeProblem(linear_g([1.0]), PolyMap([{(2,): 1.0}], 1), [0.0], [0.0])


def halfline_problem(v_bar=1.0) -> CompositeProblem:
    """Indicator of x <= 0."""
    return CompositeProblem(nonpositive_orthant(1), PolyMap.identity(1), [0.0], [v_bar])


def zero_problem(n: int = 1) -> CompositeProblem:
    return CompositeProblem(linear_g(np.zeros(n)), PolyMap.identity(n), np.zeros(n), np.zeros(n))


def orthant_problem(Phi: PolyMap, x_bar, v_bar) -> CompositeProblem:
    return CompositeProblem(nonpositive_orthant(Phi.n_out), Phi, x_bar, v_bar)


def chain_rule_catalog():
    """(name, problem, directions) triples for the chain-rule comparisons."""
    return [
        ("abs_max_v0", abs_max_problem(0.0), [[1.0], [-1.0], [0.5]]),
        ("abs_max_v1", abs_max_problem(1.0), [[1.0], [-1.0], [0.5]]),
        ("abs_max_vhalf", abs_max_problem(0.5), [[1.0], [-1.0]]),
        ("abs_quadratic", abs_quadratic_problem(-1.0), [[-1.0], [1.0], [-0.5]]),
        ("nlp_degenerate", nlp_problem((1.0, 0.0)), [[-1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-0.6, 0.8]]),
        ("nlp_interior", nlp_problem((1.0, 1.0)), [[-1.0, 0.0], [0.0, 1.0]]),
        ("circle_v0", circle_problem((1.0, 0.0), (0.0, 0.0)), [[0.0, 1.0], [1.0, 0.0], [0.6, 0.8]]),
        ("circle_v2", circle_problem((1.0, 0.0), (2.0, 0.0)), [[0.0, 1.0], [0.0, -0.5], [1.0, 1.0]]),
        ("neg_square_halfline", neg_square_halfline_problem(), [[-1.0], [1.0]]),
    ]
