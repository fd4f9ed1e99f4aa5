import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varpoly import catalog
from varpoly.smooth import CallableMap, CompositeProblem, PolyMap, fd_validate, hessian_lambda


def test_square():
    p = PolyMap([{(2,): 1.0}], 1)
    assert p.value([3.0]) == pytest.approx([9.0])
    assert np.array_equal(p.jacobian([3.0]), [[6.0]])
    assert np.array_equal(p.hessian([3.0]), [[[2.0]]])


def test_product_and_circle():
    p = PolyMap([{(1, 1): 1.0}], 2)
    assert np.array_equal(p.jacobian([1.0, 2.0]), [[2.0, 1.0]])
    assert np.array_equal(p.hessian([1.0, 2.0])[0], [[0.0, 1.0], [1.0, 0.0]])
    c = catalog.circle_problem().Phi
    assert c.value([1.0, 0.0]) == pytest.approx([0.0])
    assert np.array_equal(c.jacobian([1.0, 0.0]), [[2.0, 0.0]])
    assert np.array_equal(c.hessian([1.0, 0.0])[0], 2 * np.eye(2))


def test_hessian_lambda_examples():
    c = catalog.circle_problem().Phi
    assert np.array_equal(hessian_lambda(c, [0.3, -2.0], [0.5]), np.eye(2))
    cancel = PolyMap([{(2,): 1.0}, {(2,): -1.0}], 1)
    assert np.array_equal(hessian_lambda(cancel, [1.7], [1.0, 1.0]), [[0.0]])
    p = PolyMap([{(1, 1): 1.0}, {(2, 0): 1.0}], 2)
    assert np.array_equal(hessian_lambda(p, [0.2, 0.9], [1.0, 2.0]), [[4.0, 1.0], [1.0, 0.0]])


def test_fd_validation_envelopes():
    cube = PolyMap([{(3,): 1.0}], 1)
    assert fd_validate(cube, [1.0], 1e-4).jacobian_deviation <= 1e-7
    lin = PolyMap.linear([[1.0, -2.0], [0.5, 3.0]])
    assert fd_validate(lin, [0.3, 0.4], 1e-2).jacobian_deviation <= 1e-12
    p = PolyMap([{(2, 1): 1.0}], 2)
    assert fd_validate(p, [1.0, 1.0], 1e-4).hessian_deviation <= 1e-6


def test_callable_map_hook():
    m = CallableMap(1, 1, lambda x: np.sin(x), lambda x: np.cos(x), lambda x: -np.sin(x))
    assert fd_validate(m, [0.4]).jacobian_deviation < 1e-8


def test_composite_value_and_domain():
    cp = catalog.halfline_problem()
    assert cp.value([-1.0]) == 0.0
    assert cp.value([1.0]) == np.inf
    assert np.array_equal(cp.values(np.array([[-1.0], [1.0]])), [0.0, np.inf])


polys = st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3)),
                        st.integers(-4, 4).map(float), min_size=1, max_size=5)


@settings(max_examples=60, deadline=None)
@given(st.lists(polys, min_size=1, max_size=3), st.lists(st.floats(-2, 2), min_size=2, max_size=2),
       st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_derivative_invariants(comps, x, l1, l2):
    p = PolyMap(comps, 2)
    m = len(comps)
    H = p.hessian(x)
    assert np.array_equal(H, np.swapaxes(H, 1, 2))
    a, b = np.array(l1[:m]), np.array(l2[:m])
    assert np.allclose(hessian_lambda(p, x, a + b), hessian_lambda(p, x, a) + hessian_lambda(p, x, b),
                       rtol=1e-12, atol=1e-9)
    scale = 1 + np.abs(p.jacobian(x)).max() + np.abs(H).max()
    assert fd_validate(p, x, 1e-4).jacobian_deviation <= 1e-6 * scale


@settings(max_examples=40, deadline=None)
@given(st.lists(polys, min_size=1, max_size=2), st.lists(st.floats(-2, 2), min_size=8, max_size=8))
def test_batch_matches_pointwise(comps, xs):
    p = PolyMap(comps, 2)
    X = np.array(xs).reshape(4, 2)
    Z, S, J = p.batch(X)
    for i, x in enumerate(X):
        assert np.allclose(Z[i], p.value(x))
        assert np.allclose(J[i], p.jacobian(x))
