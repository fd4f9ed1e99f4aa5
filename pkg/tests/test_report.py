import numpy as np
import pytest

from varpoly.config import DEFAULT_TOL
from varpoly.polyhedral import ConeRep
from varpoly.report import dumps, report


def test_float_format_and_specials():
    text = dumps({"b": [np.float64(0.1), -0.0, np.inf, -np.inf, np.nan], "a": np.int64(3), "c": True})
    assert text == ('{\n  "a": 3,\n  "b": [1.000000000000e-01, 0.000000000000e+00, "inf", "-inf", "nan"],\n'
                    '  "c": true\n}\n')


def test_sorted_nested_and_cones():
    doc = report("analyze", {"file": "x"}, {"z": False, "a": None},
                 {"K": ConeRep.from_generators([[1.0, 0.0]], 2)})
    text = dumps(doc)
    assert text.index('"a": null') < text.index('"z": false')
    assert '"halfspaces": null' in text and '"dim": 2' in text
    assert dumps(doc) == text


def test_unknown_type_rejected():
    with pytest.raises(TypeError):
        dumps({"x": object()})


def test_tolerance_overrides():
    t = DEFAULT_TOL.with_overrides(act=1e-6, dd_bound=4)
    assert t.act == 1e-6 and t.dd_bound == 4 and isinstance(t.dd_bound, int)
    with pytest.raises(KeyError):
        DEFAULT_TOL.with_overrides(nope=1.0)
