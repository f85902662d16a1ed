import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tvdimex.metrics import (eoc, eoc_table, l1_norm, l1o_quasinorm, l2_norm, linf_norm,
                             range_growth, spacetime_errors)

vectors = arrays(np.float64, st.integers(1, 30), elements=st.floats(-1e3, 1e3))


@given(vectors, st.floats(-100, 100))
@settings(max_examples=100, deadline=None)
def test_norms_are_homogeneous(e, a):
    for f in (lambda v: l1_norm(v, 0.1), lambda v: l2_norm(v, 0.1), linf_norm):
        assert f(a * e) == pytest.approx(abs(a) * f(e), rel=1e-12, abs=1e-9)


def test_norm_weights():
    e = np.ones(4)
    assert l1_norm(e, 0.5) == 2.0
    assert l1_norm(e, 0.5, volume_weighted=False) == 8.0
    assert l2_norm(e, 0.25) == pytest.approx(1.0)


def test_range_growth():
    g = range_growth([1.0, 1.2, 1.1, 1.3], 1.0)
    assert np.allclose(g, [0.0, 0.2, 0.2, 0.3])
    assert np.all(range_growth([0.9, 0.8], 1.0) == 0.0)


def test_l1o_reduces_to_l1_without_growth():
    e = np.array([0.1, -0.2, 0.3])
    assert l1o_quasinorm(e, 0.1, 0.0) == l1_norm(e, 0.1)


def test_l1o_single_growth():
    e = np.zeros(10)
    growth = range_growth([1.0, 1.05], 1.0)[-1]
    assert l1o_quasinorm(e, 0.1, growth) == pytest.approx(10 * 0.05 * 0.1)


@given(vectors, st.floats(0, 10))
@settings(max_examples=50, deadline=None)
def test_l1o_dominates_l1(e, g):
    assert l1o_quasinorm(e, 0.1, g) >= l1_norm(e, 0.1)


def test_spacetime_errors():
    r = [1.0, 0.9, 0.8]
    assert spacetime_errors(r, r) == (0.0, 0.0)
    mean, mx = spacetime_errors([1.0, 1.0], [0.9, 0.7])
    assert mean == pytest.approx(0.2) and mx == pytest.approx(0.3)
    with pytest.raises(ValueError):
        spacetime_errors([1.0], [1.0, 2.0])


def test_eoc():
    assert eoc(0.04, 0.01, 10, 20) == pytest.approx(2.0)
    assert eoc(0.00861349, 0.00125513, 1024, 4096, dim=2) == pytest.approx(2.7788, abs=1e-4)
    assert eoc(0.5, 0.5, 10, 20) == 0.0
    assert np.isnan(eoc(0.0, 0.1, 10, 20))


def test_eoc_table_csv():
    rep = eoc_table([10, 20, 40], {"L1": [0.4, 0.1, 0.025], "L1o": [1, 1, 1]})
    assert rep.columns == ["N", "L1", "EOC_L1", "L1o"]
    assert rep.column("EOC_L1")[1:] == pytest.approx([2.0, 2.0])
    text = rep.to_csv()
    assert text.splitlines()[0] == "N,L1,EOC_L1,L1o"
    assert text.splitlines()[1] == "10,0.4,,1"
    with pytest.raises(ValueError):
        eoc_table([10], {"L1": [1.0]})
