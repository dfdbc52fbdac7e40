import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cahnlayer.errors import DomainError, FitError
from cahnlayer.geodesic import (INFINITE_DISTANCE, GeodesicTable, cW, dW, dW_to_well, difference_integral,
                                difference_integrand, log_asymptote_fit, log_integral)

mp.mp.dps = 30


def _mp_W(s):
    return (1 - s * s) ** 2


def test_C_W_exact(table):
    # 2 int_{-1}^{1} (1 - s^2) ds = 8/3
    assert cW(table) == pytest.approx(8.0 / 3.0, rel=1e-13)


def test_distance_to_saddle_and_sentinel(table):
    assert dW(table, -1.0, 0.0) == pytest.approx(4.0 / 3.0, rel=1e-13)
    assert dW(table, 0.0, -1.0) == pytest.approx(4.0 / 3.0, rel=1e-13)
    assert dW(table, 0.0, 0.5) == INFINITE_DISTANCE


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.5, 1.5))
def test_distance_closed_form(table, g):
    # 2 |int_g^1 |1 - s^2| ds|; the integrand changes sign beyond the wells
    prim = lambda s: s - s**3 / 3
    if g >= -1:
        exact = 2 * abs(prim(1.0) - prim(g))
    else:
        exact = 2 * ((prim(1.0) - prim(-1.0)) + (prim(g) - prim(-1.0)))
    assert dW(table, 1.0, g) == pytest.approx(abs(exact), rel=1e-11, abs=1e-13)


def test_vectorised_distance_matches_scalar(table):
    g = np.array([-1.0, -0.3, 0.2, 0.2, 1.0])
    out = dW_to_well(table, g, 1.0)
    assert out.shape == g.shape
    assert out[2] == out[3]
    assert out[0] == pytest.approx(8.0 / 3.0)


@pytest.mark.parametrize("eps", [1e-3, 1e-6, 1e-9])
def test_log_integral_against_mpmath(table, eps):
    f = lambda s: 1 / mp.sqrt(eps + _mp_W(s))
    r = mp.sqrt(eps)
    pts = [-1, -1 + r, -1 + 10 * r, -1 + 100 * r, -0.5, 0.5]
    pts = sorted(set(p for p in pts if p <= 0.5))
    oracle = float(mp.quad(f, pts))
    assert log_integral(table, eps, -1.0, 0.5) == pytest.approx(oracle, rel=1e-10)


def test_log_integral_rejects_bad_input(table):
    with pytest.raises(DomainError):
        log_integral(table, 0.0, -1.0, 0.5)
    with pytest.raises(DomainError):
        log_integral(table, 1e-3, 0.5, -1.0)


def test_log_slope_is_quarter(table):
    fit = log_asymptote_fit(table, -1.0, 0.5, [10.0 ** -k for k in range(4, 11)])
    assert fit.slope == pytest.approx(0.25, rel=0.01)
    with pytest.raises(FitError):
        log_asymptote_fit(table, -1.0, 0.5, [1e-4, 1e-3, 1e-5])


def test_difference_integrand_nonnegative(spec):
    s = np.linspace(-1, 1, 1001)
    for d in (1e-2, 1e-6, 1e-12):
        assert np.all(difference_integrand(spec, d, s) >= 0)


@pytest.mark.parametrize("delta", [1e-2, 1e-5])
def test_difference_integral_against_mpmath(table, delta):
    def f(s):
        w = _mp_W(s)
        return 2 / (mp.sqrt(delta + w) + mp.sqrt(w)) - 1 / mp.sqrt(delta + w)
    r = math.sqrt(delta)
    pts = [p for p in (-1, -1 + r, -1 + 10 * r, -1 + 100 * r) if p < 0.5] + [0.5]
    oracle = float(mp.quad(f, pts))
    assert difference_integral(table, delta, -1.0, 0.5) == pytest.approx(oracle, rel=1e-9)


def test_difference_integral_bounded(table):
    vals = [difference_integral(table, 10.0 ** -k, -1.0, 0.5) for k in range(2, 13)]
    assert max(vals) / min(vals) <= 1.25
    assert vals[-1] == pytest.approx(0.25, rel=1e-3)
    with pytest.raises(DomainError):
        difference_integral(table, 1.5, -1.0, 0.5)
