"""Closed planar boundary curves and their tubular coordinates.

Curves are counter-clockwise with the inward (left) unit normal ``nu``. The
tubular map is ``Phi(y, t) = gamma(y) + t nu(y)`` with arclength ``y``, and its
Jacobian determinant is ``omega(y, t) = 1 + t kappa(y)``. With this sign
``kappa = -k`` for the usual signed curvature ``k`` of a ccw curve, so a disk of
radius R has ``kappa = -1/R``.
"""

from __future__ import annotations

import csv
import math
import pathlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .errors import ConfigurationError, DomainError

#: Returned by :func:`invert_tubular` for points outside the collar.
OUTSIDE = math.nan

_GX, _GW = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class ParametricCurve:
    """``theta -> (x, y)`` on ``[0, period)`` with first and second derivatives (each returns shape (2, n))."""

    r: Callable[[np.ndarray], np.ndarray]
    dr: Callable[[np.ndarray], np.ndarray]
    ddr: Callable[[np.ndarray], np.ndarray]
    period: float = 2 * math.pi
    name: str = "curve"
    params: tuple = field(default=(), compare=False)

    def reversed(self) -> "ParametricCurve":
        P = self.period
        return ParametricCurve(lambda th: self.r(P - th), lambda th: -self.dr(P - th),
                               lambda th: self.ddr(P - th), P, self.name, self.params)


def circle(R: float = 1.0) -> ParametricCurve:
    return ParametricCurve(lambda th: R * np.array([np.cos(th), np.sin(th)]),
                           lambda th: R * np.array([-np.sin(th), np.cos(th)]),
                           lambda th: -R * np.array([np.cos(th), np.sin(th)]),
                           name="circle", params=(("R", R),))


def ellipse(a: float = 2.0, b: float = 1.0) -> ParametricCurve:
    return ParametricCurve(lambda th: np.array([a * np.cos(th), b * np.sin(th)]),
                           lambda th: np.array([-a * np.sin(th), b * np.cos(th)]),
                           lambda th: np.array([-a * np.cos(th), -b * np.sin(th)]),
                           name="ellipse", params=(("a", a), ("b", b)))


def star(amplitude: float = 0.2, lobes: int = 3) -> ParametricCurve:
    """Polar curve ``r(theta) = 1 + amplitude cos(lobes theta)``."""
    A, k = amplitude, lobes

    def parts(th):
        th = np.asarray(th, dtype=float)
        return (1 + A * np.cos(k * th), -A * k * np.sin(k * th), -A * k * k * np.cos(k * th),
                np.cos(th), np.sin(th))

    def r(th):
        rho, _, _, c, s = parts(th)
        return np.array([rho * c, rho * s])

    def dr(th):
        rho, d1, _, c, s = parts(th)
        return np.array([d1 * c - rho * s, d1 * s + rho * c])

    def ddr(th):
        rho, d1, d2, c, s = parts(th)
        return np.array([d2 * c - 2 * d1 * s - rho * c, d2 * s + 2 * d1 * c - rho * s])

    return ParametricCurve(r, dr, ddr, name="star", params=(("amplitude", A), ("lobes", k)))


def spline_curve(points) -> ParametricCurve:
    """Periodic cubic spline through a closed point list, parameterised by cumulative chord length."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4:
        raise ConfigurationError("need at least 4 points of shape (n, 2)")
    if np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    x, y = pts[:, 0], pts[:, 1]
    if 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) < 0:
        pts = pts[::-1]
    closed = np.vstack([pts, pts[:1]])
    u = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(closed, axis=0), axis=1))])
    sp = CubicSpline(u, closed, bc_type="periodic", axis=0)
    P = float(u[-1])
    wrap = lambda th: np.mod(th, P)
    return ParametricCurve(lambda th: sp(wrap(th)).T, lambda th: sp(wrap(th), 1).T,
                           lambda th: sp(wrap(th), 2).T, P, "spline", (("n_points", len(pts)),))


def read_curve_csv(path) -> ParametricCurve:
    """Point-list curve from a CSV with ``x,y`` columns (header optional)."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if rows:
                    raise ConfigurationError(f"bad row in {path}: {row}")
    return spline_curve(rows)


class BoundaryGeometry:
    """Arclength-parameterised closed curve with cached samples and tubular data."""

    def __init__(self, curve: ParametricCurve, samples: int = 2048, panels: int = 4096):
        if _signed_area(curve) < 0:
            curve = curve.reversed()
        self.curve = curve
        self.orientation = "ccw, inward normal on the left"
        P = curve.period
        self._th = np.linspace(0.0, P, panels + 1)
        ds = self._arc(self._th[:-1], self._th[1:])
        self._s = np.concatenate([[0.0], np.cumsum(ds)])
        self.length = float(self._s[-1])
        self.M = samples
        self.y = np.linspace(0.0, self.length, samples, endpoint=False)
        th = self.theta_of(self.y)
        self.theta = th
        self.points = curve.r(th).T
        self.tangents, self.normals, self.kappa = self._frame(th)

    # -- arclength ---------------------------------------------------------
    def _speed(self, th):
        d = self.curve.dr(th)
        return np.hypot(d[0], d[1])

    def _arc(self, lo, hi):
        lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        nodes = mid[..., None] + half[..., None] * _GX
        return half * np.sum(_GW * self._speed(nodes.ravel()).reshape(nodes.shape), axis=-1)

    def arclength_at(self, th):
        th = np.asarray(th, dtype=float)
        k = np.clip(np.searchsorted(self._th, th, side="right") - 1, 0, len(self._th) - 2)
        return self._s[k] + self._arc(self._th[k], th)

    def theta_of(self, y):
        """Parameter value at arclength ``y`` (periodic), by table lookup and Newton refinement."""
        y = np.mod(np.asarray(y, dtype=float), self.length)
        th = np.interp(y, self._s, self._th)
        for _ in range(4):
            th = th - (self.arclength_at(th) - y) / self._speed(th)
        return th

    def _frame(self, th):
        d, dd = self.curve.dr(th), self.curve.ddr(th)
        sp = np.hypot(d[0], d[1])
        T = (d / sp).T
        N = np.column_stack([-T[:, 1], T[:, 0]])
        k = (d[0] * dd[1] - d[1] * dd[0]) / sp**3
        return T, N, -k

    # -- evaluation at arbitrary arclength ----------------------------------
    def point(self, y):
        return self.curve.r(self.theta_of(y)).T

    def frame(self, y):
        """Tangent, inward normal and curvature at arclength ``y``."""
        return self._frame(self.theta_of(y))

    @cached_property
    def max_abs_kappa(self) -> float:
        return float(np.max(np.abs(self.kappa)))

    @cached_property
    def delta_max(self) -> float:
        return max_tubular_delta(self)

    @cached_property
    def _tree(self):
        return cKDTree(self.points)


def _signed_area(curve: ParametricCurve, n: int = 4096) -> float:
    th = np.linspace(0.0, curve.period, n, endpoint=False)
    r, d = curve.r(th), curve.dr(th)
    return 0.5 * float(np.mean(r[0] * d[1] - r[1] * d[0])) * curve.period


def curvature(geom: BoundaryGeometry, y) -> np.ndarray:
    """``kappa(y) = d/dt det J_Phi(y, t)`` at ``t = 0``."""
    return geom.frame(y)[2]


def tubular_map(geom: BoundaryGeometry, y, t) -> np.ndarray:
    y, t = np.broadcast_arrays(np.asarray(y, float), np.asarray(t, float))
    _, N, _ = geom.frame(y.ravel())
    return (geom.point(y.ravel()) + t.ravel()[:, None] * N).reshape(y.shape + (2,))


def tubular_weight(geom: BoundaryGeometry, y, t) -> np.ndarray:
    """``omega(y, t) = 1 + t kappa(y)``; ``t`` must lie in ``[0, delta_max]``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > geom.delta_max * (1 + 1e-12)):
        raise DomainError(f"t must lie in [0, {geom.delta_max:.6g}]")
    return 1.0 + t * curvature(geom, y)


def jacobian_det_fd(geom: BoundaryGeometry, y, t, h: float = 1e-6) -> np.ndarray:
    """``det J_Phi`` by central differences of the tubular map (independent of the closed form)."""
    y = np.asarray(y, dtype=float)
    t = np.broadcast_to(np.asarray(t, dtype=float), y.shape)
    dy = (tubular_map(geom, y + h, t) - tubular_map(geom, y - h, t)) / (2 * h)
    dt = (tubular_map(geom, y, t + h) - tubular_map(geom, y, t - h)) / (2 * h)
    return dy[..., 0] * dt[..., 1] - dy[..., 1] * dt[..., 0]


@dataclass(frozen=True)
class TubularCoords:
    y: np.ndarray
    t: np.ndarray
    inside: np.ndarray


def _project(geom: BoundaryGeometry, x: np.ndarray, newton_radius: float):
    """Curve parameter of the nearest boundary point and the signed distance (positive inside)."""
    dist, j = geom._tree.query(x)
    th = geom.theta[j].copy()
    near = dist < newton_radius
    if np.any(near):
        xn, tn = x[near], th[near]
        # Newton in the curve parameter on (x - r(th)) . r'(th) = 0
        for _ in range(6):
            r, d, dd = geom.curve.r(tn), geom.curve.dr(tn), geom.curve.ddr(tn)
            diff = xn.T - r
            f = np.sum(diff * d, axis=0)
            fp = -np.sum(d * d, axis=0) + np.sum(diff * dd, axis=0)
            tn = tn - f / fp
        th[near] = np.mod(tn, geom.curve.period)
    _, N, _ = geom._frame(th)
    t = np.sum((x - geom.curve.r(th).T) * N, axis=1)
    return th, t


def signed_distance(geom: BoundaryGeometry, x) -> np.ndarray:
    """Distance to the boundary, positive inside the domain.

    Exact (Newton-projected) within ``2 delta_max`` of the boundary, nearest
    sample beyond that.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return _project(geom, x, 2.0 * geom.delta_max)[1]


def invert_tubular(geom: BoundaryGeometry, x, delta: float | None = None) -> TubularCoords:
    """Nearest-point projection ``x -> (y, t)`` with ``Phi(y, t) = x``.

    Points outside the domain or farther than ``delta`` (default ``delta_max``)
    get :data:`OUTSIDE` in both coordinates.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    delta = geom.delta_max if delta is None else delta
    n = len(x)
    y_out, t_out = np.full(n, OUTSIDE), np.full(n, OUTSIDE)
    dist, _ = geom._tree.query(x, distance_upper_bound=delta + 2 * geom.length / geom.M)
    near = np.flatnonzero(np.isfinite(dist))
    if near.size:
        th, t = _project(geom, x[near], math.inf)
        ok = (t >= 0) & (t <= delta * (1 + 1e-12))
        y_out[near[ok]] = np.mod(geom.arclength_at(th[ok]), geom.length)
        t_out[near[ok]] = t[ok]
    return TubularCoords(y_out, t_out, np.isfinite(t_out))


def max_tubular_delta(geom: BoundaryGeometry, pair_samples: int = 512) -> float:
    """``min(0.5/max|kappa|, 0.5 * two-point reach)``.

    The reach term is half the smallest distance between sample pairs that are
    at least ``pi/max|kappa|`` apart along the curve.
    """
    kmax = geom.max_abs_kappa
    local = 0.5 / kmax if kmax > 0 else math.inf
    idx = np.linspace(0, geom.M, pair_samples, endpoint=False).astype(int)
    p, y = geom.points[idx], geom.y[idx]
    sep = np.abs(y[:, None] - y[None, :])
    sep = np.minimum(sep, geom.length - sep)
    far = sep >= (math.pi / kmax if kmax > 0 else 0.25 * geom.length)
    if not np.any(far):
        return local
    dist = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)
    reach = 0.5 * float(np.min(dist[far]))
    return min(local, 0.5 * reach)


def tube_area(geom: BoundaryGeometry, delta: float, n: int = 4096) -> float:
    """``int_{boundary} int_0^delta omega dt dH^1`` (exact in ``t``, trapezoid in ``y``)."""
    y = np.linspace(0.0, geom.length, n, endpoint=False)
    kap = curvature(geom, y)
    return float(np.mean(delta + 0.5 * delta**2 * kap) * geom.length)


def tube_area_sampled(geom: BoundaryGeometry, delta: float, m: int = 20, seed: int = 0) -> float:
    """Area of ``{x in Omega: dist(x, boundary) < delta}`` from ``2^m`` scrambled Sobol points."""
    lo, hi = geom.points.min(axis=0), geom.points.max(axis=0)
    u = qmc.Sobol(2, scramble=True, seed=seed).random_base2(m)
    x = lo + u * (hi - lo)
    inside = invert_tubular(geom, x, delta).inside
    return float(np.mean(inside) * np.prod(hi - lo))


def geometry_from_config(cfg: dict, base_dir=None) -> BoundaryGeometry:
    """``{"name": "circle"|"ellipse"|"star"|"csv", ...}``."""
    name = cfg.get("name", "circle")
    samples = int(cfg.get("samples", 2048))
    if name == "circle":
        curve = circle(float(cfg.get("R", 1.0)))
    elif name == "ellipse":
        curve = ellipse(float(cfg.get("a", 2.0)), float(cfg.get("b", 1.0)))
    elif name == "star":
        curve = star(float(cfg.get("amplitude", 0.2)), int(cfg.get("lobes", 3)))
    elif name == "csv":
        path = pathlib.Path(cfg["path"])
        if base_dir is not None and not path.is_absolute():
            path = pathlib.Path(base_dir) / path
        curve = read_curve_csv(path)
    else:
        raise ConfigurationError(f"unknown curve {name!r}")
    return BoundaryGeometry(curve, samples)
