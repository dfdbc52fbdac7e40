"""W-geodesic distance, the constant C_W, and the near-well singular integrals.

Integrands of the form ``(delta + W)^{-1/2}`` have a peak of height
``delta^{-1/2}`` and width ``sqrt(delta)`` at each well. They are integrated
with QUADPACK after the substitution ``s = well +/- sqrt(delta) sinh(u)``,
which turns the peak into a bounded, slowly varying integrand in ``u``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, FitError
from .potential import PotentialSpec

#: Returned by :func:`dW` when neither endpoint is a well.
INFINITE_DISTANCE = math.inf


def _quad(f, lo, hi, tol):
    if hi == lo:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(f, lo, hi, epsabs=tol, epsrel=1e-13, limit=400)
    return val


def well_quad(f: Callable[[float], float], lo: float, hi: float, spec: PotentialSpec,
              width: float, tol: float = 1e-12) -> float:
    """Integrate ``f`` over ``[lo, hi]`` when ``f`` peaks at the wells with the given width.

    The interval is split at the saddle ``c``; the left part is mapped by
    ``s = a + width*sinh(u)`` and the right part by ``s = b - width*sinh(u)``.
    """
    if hi < lo:
        return -well_quad(f, hi, lo, spec, width, tol)
    if hi == lo:
        return 0.0
    a, b, c = spec.a, spec.b, spec.c
    total = 0.0
    left_hi = min(hi, c)
    if lo < left_hi:
        u0, u1 = math.asinh((lo - a) / width), math.asinh((left_hi - a) / width)
        total += _quad(lambda u: f(a + width * math.sinh(u)) * width * math.cosh(u), u0, u1, tol)
    right_lo = max(lo, c)
    if right_lo < hi:
        u0, u1 = math.asinh((b - hi) / width), math.asinh((b - right_lo) / width)
        total += _quad(lambda u: f(b - width * math.sinh(u)) * width * math.cosh(u), u0, u1, tol)
    return total


@dataclass
class GeodesicTable:
    spec: PotentialSpec
    quad_tol: float = 1e-12
    _cw: float | None = field(default=None, init=False, repr=False)

    def sqrtW(self, s: float) -> float:
        return math.sqrt(max(float(self.spec.W(s)), 0.0))

    def primitive(self, r: float, s: float) -> float:
        """``int_r^s W^{1/2}``, split at the wells so the integrand is smooth on each piece."""
        if r == s:
            return 0.0
        sign = 1.0
        if s < r:
            r, s, sign = s, r, -1.0
        cuts = [r] + [x for x in (self.spec.a, self.spec.b) if r < x < s] + [s]
        return sign * sum(_quad(self.sqrtW, p, q, self.quad_tol / len(cuts)) for p, q in zip(cuts, cuts[1:]))

    @property
    def C_W(self) -> float:
        return cW(self)


def _is_well(spec: PotentialSpec, x: float) -> bool:
    tol = 1e-14 * max(1.0, abs(spec.b - spec.a))
    return abs(x - spec.a) <= tol or abs(x - spec.b) <= tol


def dW(table: GeodesicTable, r: float, s: float) -> float:
    """Geodesic distance ``2|int_r^s W^{1/2}|``; :data:`INFINITE_DISTANCE` unless an endpoint is a well."""
    if not (_is_well(table.spec, r) or _is_well(table.spec, s)):
        return INFINITE_DISTANCE
    return 2.0 * abs(table.primitive(r, s))


def cW(table: GeodesicTable) -> float:
    if table._cw is None:
        table._cw = 2.0 * table.primitive(table.spec.a, table.spec.b)
    return table._cw


def dW_to_well(table: GeodesicTable, values, well: float) -> np.ndarray:
    """Vectorised ``d_W(well, g)`` for an array of values ``g``."""
    values = np.asarray(values, dtype=float)
    out = np.empty(values.shape)
    flat, res = values.ravel(), out.ravel()
    cache: dict[float, float] = {}
    for i, g in enumerate(flat):
        g = float(g)
        if g not in cache:
            cache[g] = 2.0 * abs(table.primitive(well, g))
        res[i] = cache[g]
    return out


def _check_bounds(spec, lo, hi):
    if not (spec.a <= lo <= hi <= spec.b):
        raise DomainError(f"need a <= lo <= hi <= b, got lo={lo}, hi={hi}")


def log_integral(table: GeodesicTable, eps: float, lo: float, hi: float) -> float:
    """``int_lo^hi (eps + W)^{-1/2} ds``."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    spec = table.spec
    _check_bounds(spec, lo, hi)
    f = lambda s: 1.0 / math.sqrt(eps + max(float(spec.W(s)), 0.0))
    # tolerance scales with the size of the answer (~|log eps|)
    return well_quad(f, lo, hi, spec, math.sqrt(eps), table.quad_tol * (1.0 + abs(math.log(eps))))


@dataclass(frozen=True)
class LogFit:
    slope: float
    intercept: float
    residual_norm: float
    values: tuple[float, ...]


def log_asymptote_fit(table: GeodesicTable, lo: float, hi: float, ladder: Sequence[float]) -> LogFit:
    """Least squares ``I(eps) ~ slope*|log eps| + intercept`` over a decreasing ladder."""
    eps = np.asarray(ladder, dtype=float)
    if eps.size < 3 or np.any(np.diff(eps) >= 0) or np.any(eps <= 0):
        raise FitError("ladder needs >= 3 strictly decreasing positive values")
    vals = np.array([log_integral(table, e, lo, hi) for e in eps])
    X = np.column_stack([np.abs(np.log(eps)), np.ones_like(eps)])
    coef, *_ = np.linalg.lstsq(X, vals, rcond=None)
    resid = float(np.linalg.norm(X @ coef - vals))
    return LogFit(float(coef[0]), float(coef[1]), resid, tuple(vals))


def difference_integrand(spec: PotentialSpec, delta: float, s):
    # 2/(x+y) - 1/x == delta / (x (x+y)^2) with x = (delta+W)^{1/2}, y = W^{1/2}
    w = np.maximum(spec.W(s), 0.0)
    root = np.sqrt(delta + w)
    return delta / (root * (root + np.sqrt(w)) ** 2)


def difference_integral(table: GeodesicTable, delta: float, lo: float, hi: float) -> float:
    """``int [2/((delta+W)^{1/2} + W^{1/2}) - (delta+W)^{-1/2}] ds``, bounded uniformly in delta."""
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    spec = table.spec
    _check_bounds(spec, lo, hi)
    f = lambda s: float(difference_integrand(spec, delta, s))
    return well_quad(f, lo, hi, spec, math.sqrt(delta), table.quad_tol)
