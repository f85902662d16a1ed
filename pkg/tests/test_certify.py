from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tvdimex.certify import (LAMBDA_CAP, ConvexScheme, alpha_parameterization,
                             lambda_max_search, lemma1_bounds, lemma1_theta3_opt,
                             theorem1_certificate, theorem2_certificate)
from tvdimex.tableaux import (TVD3_4_LAMBDA, TVD3_4_THETA, ImexTableau, build_tvd3_family,
                              builtin)

G = Fraction(2, 3)


def family_scheme(g, theta4, theta3=None):
    th3 = lemma1_theta3_opt(g) if theta3 is None else theta3
    return ConvexScheme(build_tvd3_family(g), (1, 1, float(th3), float(theta4)))


def test_theta3_opt():
    assert lemma1_theta3_opt(G) == Fraction(3, 8)
    assert lemma1_theta3_opt(Fraction(1)) == Fraction(1, 3)
    assert lemma1_theta3_opt(0.9) == pytest.approx(0.3497942386831276, abs=1e-15)


def test_family_closed_forms():
    t4max, lam = lemma1_bounds(G, Fraction(7, 48))
    assert t4max == Fraction(7, 16)
    assert lam == Fraction(32, 37)
    with pytest.raises(ValueError):
        lemma1_bounds(0.5, 0.1)
    with pytest.raises(ValueError):
        lemma1_bounds(G, Fraction(7, 16))


def test_alpha_parameterization():
    assert alpha_parameterization(Fraction(1, 3)) == (Fraction(7, 48), Fraction(32, 37))
    assert alpha_parameterization(Fraction(1, 2)) == (Fraction(7, 32), Fraction(16, 21))
    t4, lam = alpha_parameterization(1e-12)
    assert t4 == pytest.approx(0.0, abs=1e-11) and lam == pytest.approx(1.0, abs=1e-11)


@pytest.mark.parametrize("alpha", [0.1, 1 / 3, 0.9])
def test_alpha_matches_closed_form(alpha):
    t4, lam = alpha_parameterization(alpha)
    assert lemma1_bounds(2 / 3, t4)[1] == pytest.approx(lam, abs=1e-13)


def test_ck_certificate_against_closed_form_at_two_thirds():
    sch = family_scheme(G, Fraction(7, 48))
    assert theorem1_certificate(sch, 32 / 37 - 1e-9).feasible
    assert not theorem1_certificate(sch, 0.95).feasible
    assert lambda_max_search(sch) == pytest.approx(32 / 37, abs=1e-9)


def test_tvd3_4_printed_point_is_feasible():
    # the printed decimals leave residues of a few 1e-9, see the loose tolerance
    sch = ConvexScheme(builtin("TVD3_4"), TVD3_4_THETA)
    assert theorem1_certificate(sch, TVD3_4_LAMBDA, tol=1e-8).feasible
    assert lambda_max_search(sch, tol=1e-8) >= TVD3_4_LAMBDA
    assert lambda_max_search(sch) == pytest.approx(TVD3_4_LAMBDA, abs=1e-4)


def test_theta4_zero_update():
    # the update is then w(n) + dt*c*E(w(n)) + implicit part: a forward Euler
    # step in the explicit term, bounded by lam = 1 rather than unbounded
    sch = ConvexScheme(build_tvd3_family(G), (1, 1, 0.375, 0.0))
    assert lambda_max_search(sch) == pytest.approx(1.0, abs=1e-9)
    assert not theorem1_certificate(sch, 1.01).feasible
    assert lambda_max_search(sch) < LAMBDA_CAP


def test_general_certificate_zero_lambda():
    tab = ImexTableau([[0, 0], [1, 0]], [[0.5, 0], [0.5, 0.5]], [0.5, 0.5], [0.5, 0.5])
    sch = ConvexScheme(tab, (1, 1, 1))
    assert theorem2_certificate(sch, 0.0).feasible


def test_both_certificates_agree_on_family():
    sch = family_scheme(G, Fraction(7, 48))
    assert theorem1_certificate(sch, 0.5).feasible
    assert theorem2_certificate(sch, 0.5).feasible


def test_general_certificate_ck_first_stage():
    sch = family_scheme(G, Fraction(7, 48))
    cert = theorem2_certificate(sch, 0.5)
    th = sch.theta
    tab = sch.stage_tableau
    # the merged first stage adds theta_k * at_k1 to the printed (1 - theta_k) c_k
    printed = cert.Atil_cal - th * tab.A_ex[:, 0]
    assert np.allclose(printed[1:], (1 - th[1:]) * tab.c_ex[1:], atol=1e-15)


def test_theta_validation():
    tab = build_tvd3_family(G)
    with pytest.raises(ValueError):
        ConvexScheme(tab, (0.5, 1, 1, 1))
    with pytest.raises(ValueError):
        ConvexScheme(tab, (1, 1, 1))
    with pytest.raises(ValueError):
        ConvexScheme(tab, (1, 1.2, 1, 1))


@given(st.floats(0.01, 0.43), st.floats(0.0, 0.4), st.floats(0.0, 0.375))
@settings(max_examples=40, deadline=None)
def test_lambda_max_not_increasing_in_theta4(t4, dt4, th3):
    base = lambda_max_search(family_scheme(G, t4, th3))
    more = lambda_max_search(family_scheme(G, min(t4 + dt4, 0.4374), th3))
    assert more <= base + 1e-9


def test_lambda_max_grows_with_theta3():
    # below its optimum the third-stage parameter relaxes the bound
    lams = [lambda_max_search(family_scheme(G, 0.3, t3)) for t3 in (0.0, 0.2, 0.375)]
    assert lams == sorted(lams) and lams[0] < lams[-1]


@given(st.floats(0.58, 1.8), st.floats(0.02, 0.98))
@settings(max_examples=100, deadline=None)
def test_closed_form_and_certificate_agree(g, frac):
    # the closed form omits two constraints that bind only for larger gamma
    t4max = (3 * g - 1) * (3 * g**2 + 1) / (18 * g**3)
    t4 = frac * t4max
    lam = lemma1_bounds(g, t4)[1]
    sch = family_scheme(g, t4)
    assert theorem1_certificate(sch, lam - 1e-8).feasible
    assert not theorem1_certificate(sch, lam + 1e-6).feasible


def test_closed_form_overestimates_for_large_gamma():
    g, t4 = 3.0, 0.2
    lam = lemma1_bounds(g, t4)[1]
    assert not theorem1_certificate(family_scheme(g, t4), lam - 1e-8).feasible
