import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import Polynomial

from cahnlayer.errors import HypothesisViolation, PotentialEvaluationError
from cahnlayer.potential import (PiecewisePolynomial, RootProduct, asym_quartic, piecewise_potential,
                                 polynomial_potential, potential_from_config, quartic, sigma_bound,
                                 taylor_delta, validate_hypotheses)


def test_quartic_passes_all_checks(spec):
    report = validate_hypotheses(spec)
    assert report.all_passed, report.failures()
    assert spec.d2W_a == pytest.approx(8.0)
    assert spec.log_constant_a == pytest.approx(0.25)


def test_sigma_of_quartic(spec):
    # W/(b-s)^2 = (1+s)^2 ranges over [1/4, 9] on [-1/2, 2], so sigma^2 <= 1/4 and 1/sigma^2 >= 9
    assert sigma_bound(spec) == pytest.approx(1.0 / 3.0, rel=1e-9)


def test_scaling_W_by_four_halves_sigma(spec):
    # the ratios become [1, 36]: the upper bound 1/sigma^2 >= 36 binds
    assert sigma_bound(spec.scaled(4.0)) == pytest.approx(1.0 / 6.0, rel=1e-9)


def test_taylor_delta_closed_form(spec):
    # W(a+x) / (4 x^2) = (1 - x/2)^2 >= 0.9  <=>  x <= 2 (1 - sqrt 0.9)
    assert taylor_delta(spec, 0.1) == pytest.approx(2 * (1 - math.sqrt(0.9)), abs=1e-9)
    with pytest.raises(ValueError):
        taylor_delta(spec, 0.3)


def test_failing_potential_reports_witness():
    # a third zero at 0 violates positivity between the wells
    W = Polynomial.fromroots([-1, -1, 0, 0, 1, 1])
    bad = polynomial_potential(W.coef, -1.0, 1.0, 0.5)
    report = validate_hypotheses(bad)
    assert not report.all_passed
    bad_check = report["three_critical_points"]
    assert not bad_check.passed
    assert -1.0 < bad_check.witness < 1.0
    with pytest.raises(HypothesisViolation):
        sigma_bound(bad)


def test_non_finite_values_raise():
    spec = piecewise_potential([-1.0, 1.0], [[np.nan]], -1.0, 1.0, 0.0)
    with pytest.raises(PotentialEvaluationError):
        validate_hypotheses(spec)


def test_piecewise_table_reproduces_quartic(spec):
    coef = Polynomial.fromroots([-1, -1, 1, 1]).coef
    pw = piecewise_potential([-1.0, 0.0, 1.0], [coef, coef], -1.0, 1.0, 0.0)
    s = np.linspace(-2, 2, 101)
    assert np.allclose(pw.W(s), spec.W(s), atol=1e-14)
    assert validate_hypotheses(pw).all_passed


def test_config_selectors():
    assert potential_from_config("quartic").name == "quartic"
    p = potential_from_config("asym_quartic(-1, 2)")
    assert (p.a, p.b, p.c) == (-1.0, 2.0, 0.5)
    t = potential_from_config({"kind": "polynomial", "coeffs": [1, 0, -2, 0, 1], "a": -1, "b": 1, "c": 0})
    assert t.W(0.5) == pytest.approx(0.5625)
    with pytest.raises(ValueError):
        potential_from_config("sextic")


def test_piecewise_requires_matching_pieces():
    with pytest.raises(ValueError):
        PiecewisePolynomial([0.0, 1.0, 2.0], [[1.0]])
    with pytest.raises(ValueError):
        PiecewisePolynomial([0.0, 0.0], [[1.0]])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=5), st.floats(-2.5, 2.5))
def test_root_product_matches_expanded_polynomial(roots, s):
    rp = RootProduct(roots, 1.5)
    expanded = Polynomial.fromroots(roots) * 1.5
    assert rp(s) == pytest.approx(expanded(s), rel=1e-9, abs=1e-9)
    assert (2.0 * rp)(s) == pytest.approx(2.0 * rp(s))


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.0, 1.0, exclude_min=True, exclude_max=True))
def test_quartic_relative_accuracy_near_wells(x):
    # (1-s^2)^2 at s = 1 - h keeps relative accuracy for tiny h
    h = 10.0 ** (-8 + 4 * x)
    exact = (h * (2 - h)) ** 2
    assert quartic().W(1.0 - h) == pytest.approx(exact, rel=1e-6)


def test_asymmetric_quartic_is_valid():
    p = asym_quartic(-1.0, 3.0)
    assert validate_hypotheses(p).all_passed
    assert p.d2W_a == pytest.approx(2 * 16.0)
