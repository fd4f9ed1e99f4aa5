from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varpoly import catalog
from varpoly.problem_file import ParseError, format_polynomial, from_problem, load, parse, parse_polynomial, serialize
from varpoly.smooth import CompositeProblem, PolyMap

PROBLEMS = sorted((Path(__file__).parent.parent / "problems").glob("*.vp"))

MINIMAL = """[g]
m = 1
piece = 1.0 | 0.0
piece = -1.0 | 0.0

[Phi]
n = 1
component = x1

[points]
x = 0
v = 0.5
"""


def test_catalog_files_exist():
    names = {p.stem for p in PROBLEMS}
    assert {"abs_v0", "soft_threshold", "circle", "halfline", "nlp"} <= names


@pytest.mark.parametrize("path", PROBLEMS, ids=lambda p: p.stem)
def test_round_trip(path):
    pf = load(path)
    assert parse(serialize(pf)) == pf
    pf.problem(pf.tolerances())


def test_minimal_file_builds_problem():
    pf = parse(MINIMAL)
    cp = pf.problem(pf.tolerances())
    assert cp.value([-2.0]) == 2.0
    assert np.array_equal(cp.v_bar, [0.5])


def test_polynomial_syntax():
    poly = parse_polynomial("3*x1^2*x2 - x2 + 0.5", 2)
    assert poly == {(2, 1): 3.0, (0, 1): -1.0, (0, 0): 0.5}
    assert parse_polynomial("x1*x1", 1) == {(2,): 1.0}
    assert parse_polynomial("-2.5e-1*x3", 3) == {(0, 0, 1): -0.25}


@pytest.mark.parametrize("text, fragment", [
    (MINIMAL.replace("m = 1", "m = one"), "integer"),
    (MINIMAL.replace("[points]", "[pointz]"), "section"),
    (MINIMAL + "bogus = 1\n", "bogus"),
    (MINIMAL.replace("component = x1", "component = x2"), "x2"),
    (MINIMAL.replace("piece = 1.0 | 0.0", "piece = 1.0 2.0 | 0.0"), "expected m=1"),
    (MINIMAL.replace("v = 0.5", "v = 0.5 1"), "expected 1"),
    (MINIMAL + "\n[params]\nr = fast\n", "number"),
    (MINIMAL + "\n[params]\ntol.bogus = 1\n", "bogus"),
    (MINIMAL.replace("component = x1", "component = x1 +"), ""),
])
def test_parse_errors(text, fragment):
    with pytest.raises(ParseError) as e:
        pf = parse(text)
        pf.validate()
        pf.problem(pf.tolerances())
    assert fragment in str(e.value)


def test_error_carries_line_number():
    with pytest.raises(ParseError) as e:
        parse(MINIMAL.replace("m = 1", "m = one"))
    assert e.value.line == 2


monos = st.dictionaries(st.tuples(st.integers(0, 4), st.integers(0, 4)),
                        st.floats(-1e6, 1e6, allow_nan=False).filter(lambda c: c != 0.0), min_size=1, max_size=6)


@settings(max_examples=100, deadline=None)
@given(monos)
def test_polynomial_round_trip(poly):
    assert parse_polynomial(format_polynomial(poly), 2) == poly


@settings(max_examples=30, deadline=None)
@given(st.lists(monos, min_size=1, max_size=3), st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_problem_round_trip(comps, x):
    phi = PolyMap(comps, 2)
    c = np.arange(1.0, phi.n_out + 1)
    cp = CompositeProblem(catalog.linear_g(c), phi, x, phi.jacobian(x).T @ c)
    pf = from_problem(cp, params={"r": (0.5,), "w": ((1.0, 0.0), (0.0, -1.0))})
    again = parse(serialize(pf))
    assert again == pf
    assert np.allclose(again.problem(again.tolerances()).Phi.value(x), cp.Phi.value(x))
