from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tvdimex.tableaux import (TVD3_4_LAMBDA, ImexTableau, build_tvd3_family, builtin,
                              order_check)

NAMES = ["IMEX1", "IMEX1_4", "TVD3", "TVD3_4", "ARS233", "ARS223"]
GAMMAS = [0.4, 0.5774, Fraction(2, 3), 1.0, 5.0]


@pytest.mark.parametrize("name", NAMES)
def test_c_consistency(name):
    t = builtin(name)
    assert np.allclose(t.c_ex, t.A_ex.sum(1), atol=1e-13, rtol=0)
    assert np.allclose(t.c_im, t.A_im.sum(1), atol=1e-13, rtol=0)
    assert np.all(np.triu(t.A_ex) == 0)
    assert np.all(np.triu(t.A_im, 1) == 0)


@pytest.mark.parametrize("name", NAMES)
def test_ck_structure(name):
    t = builtin(name)
    if t.is_ck:
        assert np.all(t.A_im[:, 0] == 0) and t.b_im[0] == 0


def test_gamma_two_thirds_coefficients():
    t = build_tvd3_family(Fraction(2, 3))
    assert np.allclose([t.A_ex[1, 0], t.A_ex[2, 0], t.A_ex[2, 1]], [1 / 4, -13 / 18, 14 / 9],
                       atol=1e-15)
    assert np.allclose(t.b_ex, [0, 4 / 7, 3 / 7], atol=1e-15)
    assert np.allclose([t.A_im[1, 1], t.A_im[2, 1], t.A_im[2, 2]], [1 / 4, 2 / 3, 1 / 6],
                       atol=1e-15)
    assert np.allclose(t.c_ex, [0, 1 / 4, 5 / 6], atol=1e-15)


@pytest.mark.parametrize("g", [0.4, Fraction(2, 3), 5])
def test_family_weights_sum_to_one(g):
    assert build_tvd3_family(g).b_im.sum() == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("g", GAMMAS)
def test_family_is_third_order(g):
    t = build_tvd3_family(g)
    assert order_check(t, 3).order_achieved == 3


def test_family_update_is_not_last_stage():
    # b = (0, 4/7, 3/7) while the last implicit row is (0, 2/3, 1/6)
    t = build_tvd3_family(Fraction(2, 3))
    assert not t.is_stiffly_accurate
    assert t.extended().s == 4


@given(st.floats(0.35, 10.0))
@settings(max_examples=60, deadline=None)
def test_family_order_holds_for_any_gamma(g):
    rep = order_check(build_tvd3_family(g), 3, tol=1e-10)
    assert rep.order_achieved == 3


def test_family_rejects_singular_gamma():
    with pytest.raises(ValueError):
        build_tvd3_family(Fraction(1, 3))


def test_builtin_values():
    t = builtin("TVD3_4")
    assert t.A_im[3, 3] == 0.0941272383192684
    assert TVD3_4_LAMBDA == 0.5471076190680170
    assert order_check(t, 3).order_achieved == 3
    ars = builtin("ARS233")
    d = (3 + np.sqrt(3)) / 6
    assert np.allclose(ars.c_im, [0, d, 1 - d], atol=1e-15)
    assert np.allclose(ars.b_im, [0, 0.5, 0.5])
    assert builtin("ARS223") == ars
    assert order_check(builtin("IMEX1"), 1).order_achieved == 1
    assert order_check(build_tvd3_family(0.9), 3).order_achieved == 3


def test_imex1_4_is_first_order_substepping():
    t = builtin("IMEX1_4")
    assert order_check(t, 3).order_achieved == 1
    assert t.is_stiffly_accurate


def test_json_round_trip():
    t = builtin("TVD3_4")
    assert ImexTableau.from_json(t.to_json()) == t


def test_unknown_name():
    with pytest.raises(KeyError):
        builtin("RK4")
