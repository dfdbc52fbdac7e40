"""Boundary data, the boundary-layer recovery field in a planar domain, and its energy.

The recovery field is built fibre by fibre along the inward normals: on the
fibre through ``y`` it solves ``eps v' = (delta + W(v))^{1/2}`` from
``g_eps(y)`` until it reaches ``b``, then stays at ``b``. The ODE is
autonomous, so every fibre is a time shift of one *master* solution started at
``a``. Fibre energies, tangential derivatives and L1 distances all come from
running integrals of that single solution, which keeps a 1024-fibre field as
cheap as one 1D profile.

All energies are unscaled, ``F_eps = int (W(u) + eps^2 |grad u|^2) dx``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, optimize, sparse
from scipy.sparse.linalg import splu

from .errors import ConfigurationError, DomainError, FitError, SolverError
from .geodesic import GeodesicTable, cW, dW_to_well
from .geometry import BoundaryGeometry, invert_tubular, signed_distance, _project
from .potential import PotentialSpec
from .profile import ProfileGrid

_GX, _GW = np.polynomial.legendre.leggauss(8)


# -- boundary data ---------------------------------------------------------

def smoothstep(x):
    """Quintic ``6x^5 - 15x^4 + 10x^3`` clamped to [0, 1]; C2 at both ends."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x * x)


def _dsmoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return 30.0 * x * x * (1.0 - x) ** 2


def _bump(x):
    inside = (x > 0) & (x < 1)
    return np.where(inside, 16.0 * x * x * (1.0 - x) ** 2, 0.0)


def _dbump(x):
    inside = (x > 0) & (x < 1)
    return np.where(inside, 32.0 * x * (1.0 - x) * (1.0 - 2.0 * x), 0.0)


def _panels(lo, hi, n):
    edges = np.linspace(lo, hi, n + 1)
    return _gauss_on(edges)


def _graded(lo, hi, toward_hi: bool, levels: int = 24):
    frac = np.concatenate([[1.0], 0.5 ** np.arange(1, levels + 1), [0.0]])
    edges = hi - (hi - lo) * frac if toward_hi else lo + (hi - lo) * frac
    return _gauss_on(np.sort(edges))


def _gauss_on(edges):
    edges = np.asarray(edges, dtype=float)
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
    return (mid[:, None] + half[:, None] * _GX).ravel(), (half[:, None] * _GW).ravel()


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet data ``g`` on a boundary of length ``length`` and its perturbation ``g_eps``.

    ``g = a`` on the plateau arcs ``(start, length)``, ``b`` beyond a transition
    of width ``transition_width`` on each side, quintic smoothstep in between.
    ``g_eps = clamp(g + A0 eps^gamma bump)`` with the bump living inside the
    transitions, so plateau edges and the ``b`` region are untouched.
    ``constant`` replaces all of this by a constant function.
    """

    length: float
    spec: PotentialSpec
    plateau: tuple[tuple[float, float], ...] = ()
    transition_width: float = 0.2
    gamma: float = 2.0
    A0: float = 1.0
    constant: float | None = None

    # -- evaluation --------------------------------------------------------
    def _distance(self, y):
        """Arclength distance to the plateau (0 on it) and its derivative sign."""
        y = np.asarray(y, dtype=float)
        L = self.length
        best = np.full(y.shape, math.inf)
        sign = np.zeros(y.shape)
        for start, ell in self.plateau:
            u = np.mod(y - (start + 0.5 * ell) + 0.5 * L, L) - 0.5 * L
            d = np.abs(u) - 0.5 * ell
            take = d < best
            best = np.where(take, d, best)
            sign = np.where(take, np.sign(u), sign)
        return np.maximum(best, 0.0), sign

    def g(self, y):
        y = np.asarray(y, dtype=float)
        a, b = self.spec.a, self.spec.b
        if self.constant is not None:
            return np.full(y.shape, float(self.constant))
        if not self.plateau:
            return np.full(y.shape, b)
        d, _ = self._distance(y)
        return a + (b - a) * smoothstep(d / self.transition_width)

    def dg(self, y):
        y = np.asarray(y, dtype=float)
        if self.constant is not None or not self.plateau:
            return np.zeros(y.shape)
        a, b, w = self.spec.a, self.spec.b, self.transition_width
        d, sgn = self._distance(y)
        return sgn * (b - a) * _dsmoothstep(d / w) / w

    def _perturbation(self, y, eps):
        if self.constant is not None or not self.plateau or self.A0 == 0.0:
            return np.zeros(np.shape(y)), np.zeros(np.shape(y))
        d, sgn = self._distance(y)
        x = d / self.transition_width
        amp = self.A0 * eps**self.gamma
        return amp * _bump(x), sgn * amp * _dbump(x) / self.transition_width

    def g_eps(self, y, eps: float):
        p, _ = self._perturbation(y, eps)
        return np.clip(self.g(y) + p, self.spec.a, self.spec.b)

    def dg_eps(self, y, eps: float):
        p, dp = self._perturbation(y, eps)
        raw = self.g(y) + p
        clipped = (raw <= self.spec.a) | (raw >= self.spec.b)
        return np.where(clipped, 0.0, self.dg(y) + dp)

    # -- derived quantities ----------------------------------------------------
    @property
    def plateau_length(self) -> float:
        if self.constant is not None:
            return self.length if self.constant == self.spec.a else 0.0
        return float(sum(ell for _, ell in self.plateau))

    def quadrature(self, fibers: int = 1024):
        """Gauss nodes and weights in ``y`` that respect the kinks of ``g``.

        Transition panels are graded geometrically toward the plateau edge,
        where the fibre energies vary on the scale of ``(g - a)`` itself.
        """
        L = self.length
        h = L / max(1, fibers // len(_GX))
        if self.constant is not None or not self.plateau:
            y, w = _panels(0.0, L, max(1, fibers // len(_GX)))
            return y, w
        wd = self.transition_width
        arcs = sorted(self.plateau)
        ys, ws = [], []
        for k, (s0, ell) in enumerate(arcs):
            nxt = arcs[(k + 1) % len(arcs)][0] + (L if k + 1 == len(arcs) else 0.0)
            pieces = [_graded(s0 - wd, s0, True),
                      _panels(s0, s0 + ell, max(1, math.ceil(ell / h))),
                      _graded(s0 + ell, s0 + ell + wd, False)]
            gap = (nxt - wd) - (s0 + ell + wd)
            if gap > 0:
                pieces.append(_panels(s0 + ell + wd, nxt - wd, max(1, math.ceil(gap / h))))
            for yy, ww in pieces:
                ys.append(yy)
                ws.append(ww)
        y = np.mod(np.concatenate(ys), L)
        return y, np.concatenate(ws)

    def plateau_quadrature(self, fibers: int = 1024):
        if self.constant is not None:
            if self.constant != self.spec.a:
                return np.empty(0), np.empty(0)
            return _panels(0.0, self.length, max(1, fibers // len(_GX)))
        h = self.length / max(1, fibers // len(_GX))
        parts = [_panels(s0, s0 + ell, max(1, math.ceil(ell / h))) for s0, ell in self.plateau]
        if not parts:
            return np.empty(0), np.empty(0)
        return (np.mod(np.concatenate([p[0] for p in parts]), self.length),
                np.concatenate([p[1] for p in parts]))

    def tangential_energy(self, eps: float, fibers: int = 1024) -> float:
        """``int |d/dy g_eps|^2 dy``."""
        y, w = self.quadrature(fibers)
        return float(np.sum(w * self.dg_eps(y, eps) ** 2))


def make_boundary_data(geom: BoundaryGeometry, plateau_arcs: Sequence[tuple[float, float]],
                       transition_width: float, gamma: float = 2.0, A0: float = 1.0,
                       spec: PotentialSpec | None = None, margin: float | None = None) -> BoundaryData:
    """Smoothstep boundary data with ``g = a`` on ``plateau_arcs`` (pairs ``(start, length)``).

    Every plateau point must lie, together with a neighbourhood of width
    ``margin`` (default half the transition width), where ``kappa < 0``.
    """
    if spec is None:
        raise ConfigurationError("a potential is required")
    if not gamma > 1.0:
        raise ConfigurationError(f"gamma must exceed 1, got {gamma}")
    if not transition_width > 0:
        raise ConfigurationError("transition_width must be positive")
    arcs = tuple((float(s) % geom.length, float(ell)) for s, ell in plateau_arcs)
    if any(ell <= 0 for _, ell in arcs):
        raise ConfigurationError("plateau arcs need positive length")
    occupied = sum(ell + 2 * transition_width for _, ell in arcs)
    if occupied > geom.length:
        raise ConfigurationError("plateau arcs and transitions exceed the boundary length")
    data = BoundaryData(geom.length, spec, arcs, float(transition_width), float(gamma), float(A0))
    for i, (s0, l0) in enumerate(arcs):
        for s1, l1 in arcs[i + 1:]:
            c0, c1 = s0 + l0 / 2, s1 + l1 / 2
            sep = abs((c1 - c0 + geom.length / 2) % geom.length - geom.length / 2)
            if sep < (l0 + l1) / 2 + 2 * transition_width:
                raise ConfigurationError("plateau arcs (with transitions) overlap")
    rho = 0.5 * transition_width if margin is None else float(margin)
    d, _ = data._distance(geom.y)
    near = d <= rho
    if arcs and np.any(geom.kappa[near] >= 0.0):
        bad = geom.y[near][geom.kappa[near] >= 0.0]
        raise ConfigurationError(
            f"plateau (margin {rho:g}) reaches kappa >= 0 near y={bad[0]:.4g}; "
            "the constant b cannot be the limit there")
    return data


def constant_boundary_data(geom: BoundaryGeometry, value: float, spec: PotentialSpec) -> BoundaryData:
    if not spec.a <= value <= spec.b:
        raise ConfigurationError("constant boundary value must lie in [a, b]")
    return BoundaryData(geom.length, spec, (), 1.0, 2.0, 0.0, float(value))


# -- first-order check -----------------------------------------------------------

@dataclass(frozen=True)
class U0Report:
    F1_b: float
    F1_a: float
    best_chord: float
    best_chord_endpoints: tuple[float, float] | None
    margin: float
    unique: bool

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def check_u0_b(geom: BoundaryGeometry, data: BoundaryData, spec: PotentialSpec,
               table: GeodesicTable | None = None, n_chord: int = 256, n_fine: int = 8192,
               raise_on_failure: bool = True) -> U0Report:
    """Compare the first-order energy of ``u = b`` with ``u = a`` and single-chord competitors.

    A chord between boundary points ``p_i, p_j`` splits the domain; the
    competitor is ``a`` on one side and ``b`` on the other, with interface cost
    ``C_W |p_i - p_j|``. On non-convex domains a chord may leave the domain,
    which only overestimates the competitor.
    """
    table = table or GeodesicTable(spec)
    C = cW(table)
    y = np.linspace(0.0, data.length, n_fine, endpoint=False)
    h = data.length / n_fine
    g = data.g(y)
    da, db = dW_to_well(table, g, spec.a), dW_to_well(table, g, spec.b)
    F1_a, F1_b = float(np.sum(da) * h), float(np.sum(db) * h)
    # cumulative left-endpoint sums, sampled at the chord grid
    step = n_fine // n_chord
    Ia = np.concatenate([[0.0], np.cumsum(da) * h])[::step][:n_chord]
    Ib = np.concatenate([[0.0], np.cumsum(db) * h])[::step][:n_chord]
    P = geom.point(y[::step][:n_chord])
    i, j = np.triu_indices(n_chord, 1)
    chord = C * np.hypot(*(P[i] - P[j]).T)
    arc_a, arc_b = Ia[j] - Ia[i], Ib[j] - Ib[i]
    inside_a = chord + arc_a + (F1_b - arc_b)
    outside_a = chord + (F1_a - arc_a) + arc_b
    both = np.minimum(inside_a, outside_a)
    k = int(np.argmin(both)) if both.size else None
    best = float(both[k]) if k is not None else math.inf
    ends = (float(y[::step][i[k]]), float(y[::step][j[k]])) if k is not None else None
    rival = min(F1_a, best)
    margin = rival - F1_b
    unique = bool(margin > 1e-12 * max(1.0, abs(F1_b)))
    report = U0Report(F1_b, F1_a, best, ends, float(margin), unique)
    if raise_on_failure and not unique:
        raise ConfigurationError(f"u = b is not the strict first-order minimiser (margin {margin:.4g})")
    return report


def predicted_F2(geom: BoundaryGeometry, data: BoundaryData, spec: PotentialSpec,
                 table: GeodesicTable | None = None, fibers: int = 1024) -> float:
    """``C_W / (sqrt 2 sqrt W''(a)) * int_{g = a} kappa dy``."""
    y, w = data.plateau_quadrature(fibers)
    if y.size == 0:
        return 0.0
    C = cW(table or GeodesicTable(spec))
    return float(C * spec.log_constant_a * np.sum(w * geom.frame(y)[2]))


# -- the master layer solution -----------------------------------------------------

class _Master:
    """``V' = (delta + W(V))^{1/2}``, ``V(0) = a``, with running integrals.

    State: ``V``, ``int e``, ``int e s``, ``int (b - V)``, ``int (b - V) s``
    where ``e = 2W(V) + delta`` is the fast-variable energy density.
    """

    def __init__(self, spec: PotentialSpec, delta: float):
        a, b = spec.a, spec.b
        self.spec, self.delta = spec, delta

        def rhs(s, y):
            w = max(float(spec.W(min(y[0], b))), 0.0)
            e = 2.0 * w + delta
            return [math.sqrt(delta + w), e, e * s, b - y[0], (b - y[0]) * s]

        hit = lambda s, y: y[0] - b
        hit.terminal, hit.direction = True, 1.0
        s_hi = 50.0 + 4.0 * abs(math.log(delta)) / math.sqrt(min(spec.d2W_a, spec.d2W_b)) * 4
        sol = integrate.solve_ivp(rhs, (0.0, s_hi), [a, 0, 0, 0, 0], method="DOP853",
                                  rtol=1e-12, atol=1e-15, events=hit, dense_output=True)
        if sol.status != 1:
            raise ConfigurationError("layer ODE did not reach b")
        self.sigma_b = float(sol.t_events[0][0])
        self.end = np.asarray(sol.y_events[0][0], dtype=float)
        self._sol = sol.sol
        self._s = sol.t
        self._V = np.maximum.accumulate(sol.y[0])

    def state(self, s):
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.sigma_b)
        out = self._sol(s)
        out[0] = np.clip(out[0], self.spec.a, self.spec.b)
        return out

    def V(self, s):
        return self.state(s)[0]

    def sigma_of(self, g):
        """Fast time at which ``V`` reaches ``g`` (Newton from table interpolation)."""
        g = np.asarray(g, dtype=float)
        s = np.interp(g, self._V, self._s)
        d, spec = self.delta, self.spec
        for _ in range(6):
            v = self._sol(s)[0]
            s = s - (v - g) / np.sqrt(d + np.maximum(spec.W(v), 0.0))
            s = np.clip(s, 0.0, self.sigma_b)
        s = np.where(g <= spec.a, 0.0, s)
        return np.where(g >= spec.b, self.sigma_b, s)


# -- fields ----------------------------------------------------------------------------

@dataclass
class FiberData:
    y: np.ndarray
    weights: np.ndarray
    g_eps: np.ndarray
    dg_eps: np.ndarray
    kappa: np.ndarray
    sigma_g: np.ndarray
    T_eps: np.ndarray


@dataclass
class GridData:
    x: np.ndarray
    y: np.ndarray
    h: float
    u: np.ndarray              # (ny, nx); NaN outside the domain
    inside: np.ndarray
    distance: np.ndarray       # signed distance to the boundary, positive inside
    energy: float
    iterations: int
    history: list = field(default_factory=list)


@dataclass
class Field2D:
    """A phase field in the domain, either as normal fibres or as Cartesian node values."""

    representation: str
    epsilon: float
    geom: BoundaryGeometry
    data: BoundaryData
    spec: PotentialSpec
    delta: float
    delta_reg: float | None = None
    fibers: FiberData | None = None
    grid: GridData | None = None
    master: _Master | None = field(default=None, repr=False)

    def trace(self) -> np.ndarray:
        if self.representation != "fiber":
            raise DomainError("trace is stored for fiber fields only")
        return self.master.V(self.fibers.sigma_g)

    def fiber_profile(self, y: float, nodes_per_eps: int = 32) -> ProfileGrid:
        """The profile on the normal through ``y``, as a :class:`ProfileGrid` on ``[0, delta]``."""
        if self.representation != "fiber":
            raise DomainError("fiber profiles exist for fiber fields only")
        eps, m, b = self.epsilon, self.master, self.spec.b
        g0 = float(self.data.g_eps(np.array([y]), eps)[0])
        s0 = float(m.sigma_of(np.array([g0]))[0])
        T_eps = eps * (m.sigma_b - s0)
        n = max(2, int(math.ceil((m.sigma_b - s0) * nodes_per_eps)) + 1)
        t = np.linspace(0.0, T_eps, n)
        tail = np.linspace(T_eps, self.delta, max(2, int(math.ceil((self.delta - T_eps) / (8 * eps))) + 1))[1:]
        v = np.maximum.accumulate(m.V(s0 + t / eps))
        v[0], v[-1] = g0, b
        L = None
        if g0 <= self.spec.c:
            L = eps * (float(m.sigma_of(np.array([self.spec.c]))[0]) - s0)
        dense = lambda tt: m.V(s0 + np.asarray(tt) / eps)
        return ProfileGrid(np.concatenate([t, tail]), np.concatenate([v, np.full(tail.size, b)]),
                           eps, g0, b, T_eps, L, b, self.delta_reg, dense)

    def values(self, points) -> np.ndarray:
        """Field values at points ``(n, 2)``; NaN outside the domain."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.representation == "grid":
            gd = self.grid
            j = np.rint((pts[:, 0] - gd.x[0]) / gd.h).astype(int)
            i = np.rint((pts[:, 1] - gd.y[0]) / gd.h).astype(int)
            ok = (i >= 0) & (i < gd.y.size) & (j >= 0) & (j < gd.x.size)
            out = np.full(len(pts), np.nan)
            out[ok] = gd.u[i[ok], j[ok]]
            return out
        inside = signed_distance(self.geom, pts) >= 0.0
        out = np.where(inside, self.spec.b, np.nan)
        tc = invert_tubular(self.geom, pts, self.delta)
        k = np.flatnonzero(tc.inside)
        if k.size:
            eps, m = self.epsilon, self.master
            s0 = m.sigma_of(self.data.g_eps(tc.y[k], eps))
            out[k] = m.V(s0 + tc.t[k] / eps)
        return out

    def to_csv(self, path, samples_per_fiber: int = 64) -> None:
        """Point cloud ``x, y, u``."""
        if self.representation == "grid":
            gd = self.grid
            X, Y = np.meshgrid(gd.x, gd.y)
            sel = gd.inside
            rows = zip(X[sel], Y[sel], gd.u[sel])
        else:
            fd, eps, m = self.fibers, self.epsilon, self.master
            t = np.linspace(0.0, self.delta, samples_per_fiber)
            T, Nrm, _ = self.geom.frame(fd.y)
            P = self.geom.point(fd.y)
            xs = P[:, None, :] + t[None, :, None] * Nrm[:, None, :]
            us = m.V((fd.sigma_g[:, None] + t[None, :] / eps).ravel())
            rows = zip(xs[..., 0].ravel(), xs[..., 1].ravel(), us.ravel())
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", "u"])
            for x, y, u in rows:
                w.writerow([repr(float(x)), repr(float(y)), repr(float(u))])


def recovery_field(geom: BoundaryGeometry, data: BoundaryData, spec: PotentialSpec, eps: float,
                   delta: float | None = None, delta_reg: float | None = None,
                   fibers: int = 1024) -> Field2D:
    """Fibre-form recovery field on the collar of width ``delta`` (default ``delta_max / 2``)."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    dmax = geom.delta_max
    delta = 0.5 * dmax if delta is None else float(delta)
    if not 0.0 < delta <= dmax:
        raise DomainError(f"delta={delta} outside (0, delta_max={dmax:.6g}]")
    d = eps if delta_reg is None else float(delta_reg)
    master = _Master(spec, d)
    y, w = data.quadrature(fibers)
    g = data.g_eps(y, eps)
    s0 = master.sigma_of(g)
    T_eps = eps * (master.sigma_b - s0)
    if np.max(T_eps) > delta:
        raise ConfigurationError(f"layer length {np.max(T_eps):.4g} exceeds the collar width {delta:.4g}")
    fd = FiberData(y, w, g, data.dg_eps(y, eps), geom.frame(y)[2], s0, T_eps)
    return Field2D("fiber", eps, geom, data, spec, delta, d, fd, None, master)


# -- energies ------------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldEnergy:
    F_eps: float
    normal: float
    tangential: float
    per_fiber_normal: np.ndarray = field(repr=False)
    per_fiber_tangential: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"F_eps": self.F_eps, "normal": self.normal, "tangential": self.tangential}


def energy_F(field: Field2D, spec: PotentialSpec | None = None, geom: BoundaryGeometry | None = None,
             delta: float | None = None) -> FieldEnergy:
    """``F_eps`` of a fibre field in tubular coordinates, split into normal and tangential parts.

    Per fibre the normal part is ``E0 + eps kappa E1`` in the fast variable
    (exact, because ``omega`` is affine in ``t``); the tangential part uses
    ``d_y v = (delta + W(v))^{1/2} / (delta + W(g_eps))^{1/2} g_eps'``.
    """
    if field.representation != "fiber":
        raise DomainError("energy_F needs a fiber field; use energy_F_grid for grid fields")
    spec = spec or field.spec
    eps, m, fd, d = field.epsilon, field.master, field.fibers, field.delta_reg
    P = m.state(fd.sigma_g)
    Pb = m.end
    E0 = Pb[1] - P[1]
    E1 = (Pb[2] - P[2]) - fd.sigma_g * E0
    normal_density = E0 + eps * fd.kappa * E1           # scaled by 1/eps
    tang = np.zeros_like(fd.y)
    for k in np.flatnonzero(fd.dg_eps != 0.0):
        lo = fd.sigma_g[k]
        if lo >= m.sigma_b:
            continue
        nodes, wts = _gauss_on(np.linspace(lo, m.sigma_b, max(2, int(math.ceil((m.sigma_b - lo) / 0.25))) + 1))
        v = m.V(nodes)
        omega = 1.0 + fd.kappa[k] * eps * (nodes - lo)
        inner = eps * np.sum(wts * (d + np.maximum(spec.W(v), 0.0)) / omega)
        tang[k] = eps**2 * fd.dg_eps[k] ** 2 / (d + max(float(spec.W(fd.g_eps[k])), 0.0)) * inner
    normal = eps * float(np.sum(fd.weights * normal_density))
    tangential = float(np.sum(fd.weights * tang))
    return FieldEnergy(normal + tangential, normal, tangential, eps * normal_density, tang)


def boundary_cost(data: BoundaryData, spec: PotentialSpec, table: GeodesicTable | None = None,
                  fibers: int = 1024, well: float | None = None) -> float:
    """``int d_W(well, g) dy`` (default well ``b``) on the fibre quadrature."""
    table = table or GeodesicTable(spec)
    y, w = data.quadrature(fibers)
    return float(np.sum(w * dW_to_well(table, data.g(y), spec.b if well is None else well)))


def second_order_F2(field: Field2D, spec: PotentialSpec, geom: BoundaryGeometry | None = None,
                    data: BoundaryData | None = None, eps: float | None = None,
                    table: GeodesicTable | None = None, energy: FieldEnergy | None = None) -> float:
    """``(F_eps / eps - int d_W(b, g)) / (eps |log eps|)``."""
    data = data or field.data
    eps = field.epsilon if eps is None else eps
    energy = energy or energy_F(field, spec)
    sub = boundary_cost(data, spec, table, fibers=field.fibers.y.size if field.fibers else 1024)
    return (energy.F_eps / eps - sub) / (eps * abs(math.log(eps)))


def l1_distance_to_b(field: Field2D) -> float:
    """``int |u - b| dx`` for a fibre field."""
    if field.representation != "fiber":
        raise DomainError("fiber field required")
    eps, m, fd = field.epsilon, field.master, field.fibers
    P, Pb = m.state(fd.sigma_g), m.end
    M0 = Pb[3] - P[3]
    M1 = (Pb[4] - P[4]) - fd.sigma_g * M0
    return float(eps * np.sum(fd.weights * (M0 + eps * fd.kappa * M1)))


def energy_F_cartesian(field: Field2D, h: float | None = None, refine: int = 8) -> float:
    """``F_eps`` of a fibre field by midpoint quadrature on a Cartesian grid.

    Cells cut by the boundary are subdivided ``refine x refine`` times.
    Derivatives of the field come from its fibre construction; only the
    integration is Cartesian, so this checks the change of variables.
    """
    if field.representation != "fiber":
        raise DomainError("fiber field required")
    geom, eps = field.geom, field.epsilon
    h = eps / 16 if h is None else h
    reach = float(np.max(field.fibers.T_eps)) + 2 * h
    lo, hi = geom.points.min(axis=0) - h, geom.points.max(axis=0) + h
    nx, ny = (np.ceil((hi - lo) / h)).astype(int)
    xc = lo[0] + h * (np.arange(nx) + 0.5)
    yc = lo[1] + h * (np.arange(ny) + 0.5)
    X, Y = np.meshgrid(xc, yc)
    centers = np.column_stack([X.ravel(), Y.ravel()])
    dist = signed_distance(geom, centers)
    half_diag = h / math.sqrt(2.0)
    full = dist > half_diag
    cut = np.abs(dist) <= half_diag
    full &= dist < reach
    total = float(np.sum(_density(field, centers[full]))) * h * h
    if np.any(cut):
        off = (np.arange(refine) + 0.5) / refine - 0.5
        ox, oy = np.meshgrid(off, off)
        sub = (centers[cut][:, None, :] + h * np.column_stack([ox.ravel(), oy.ravel()])[None]).reshape(-1, 2)
        sub = sub[signed_distance(geom, sub) > 0.0]
        total += float(np.sum(_density(field, sub))) * (h / refine) ** 2
    return eps * total


def _density(field: Field2D, pts) -> np.ndarray:
    """``W(u)/eps + eps |grad u|^2`` at points inside the domain."""
    spec, eps, m, data, d = field.spec, field.epsilon, field.master, field.data, field.delta_reg
    out = np.zeros(len(pts))
    tc = invert_tubular(field.geom, pts, field.delta)
    k = np.flatnonzero(tc.inside)
    if k.size == 0:
        return out
    y, t = tc.y[k], tc.t[k]
    g = data.g_eps(y, eps)
    s = m.sigma_of(g) + t / eps
    live = s < m.sigma_b
    v = m.V(s)
    w = np.maximum(spec.W(v), 0.0)
    root = np.sqrt(d + w)
    dt = root / eps
    dy = root / np.sqrt(d + np.maximum(spec.W(g), 0.0)) * data.dg_eps(y, eps)
    omega = 1.0 + t * field.geom.frame(y)[2]
    dens = w / eps + eps * (dt**2 + (dy / omega) ** 2)
    out[k] = np.where(live, dens, 0.0)
    return out


# -- grid minimiser ------------------------------------------------------------------------

def _grid_energy(u_in, ghost_vals, spec, eps, h, edges_in, edges_gh):
    W = float(np.sum(np.maximum(spec.W(u_in), 0.0))) * h * h
    i, j = edges_in
    p, q = edges_gh
    grad = float(np.sum((u_in[i] - u_in[j]) ** 2) + np.sum((u_in[p] - ghost_vals[q]) ** 2))
    return W + eps * eps * grad


def _flow_step(u, lu, S, tau, c, gsum, spec, a, b, ghost_vals, eps, h, ein, egh):
    rhs = (1.0 / tau + S) * u - spec.dW(u) + c * gsum
    u = np.clip(lu.solve(rhs), a, b)
    return u, _grid_energy(u, ghost_vals, spec, eps, h, ein, egh)


def minimize_F_grid(geom: BoundaryGeometry, data: BoundaryData, spec: PotentialSpec, eps: float,
                    grid_h: float | None = None, tau: float = 1.0, S: float | None = None,
                    max_iter: int = 20000, tol: float = 1e-10, initial: Field2D | None = None,
                    flow_steps: int = 200):
    """Minimise the five-point discretisation of ``F_eps``.

    Unknowns are the grid nodes inside the domain; their outside neighbours
    carry ``g_eps`` at the nearest boundary point. Each step solves
    ``(1/tau + S) u' - 2 eps^2 Lap u' = (1/tau + S) u - W'(u)`` with one
    sparse LU factorisation, then truncates to ``[a, b]``. ``S`` defaults to
    half the Lipschitz constant of ``W'`` on ``[a, b]``, which makes every
    step decrease the energy. The flow runs for at most ``flow_steps`` steps;
    if it has not settled, bounded L-BFGS takes over and a final flow step
    checks the relative energy change against ``tol`` (relative to
    ``max(F, eps |boundary|)``).

    Returns ``(field, F_eps)``.
    """
    h = eps / 4 if grid_h is None else float(grid_h)
    if h > eps / 4 * (1 + 1e-12):
        raise DomainError("grid_h must not exceed eps/4")
    a, b = spec.a, spec.b
    if S is None:
        s = np.linspace(a, b, 2001)
        S = 0.5 * float(np.max(np.abs(spec.d2W(s))))
    lo = geom.points.min(axis=0) - 2 * h
    hi = geom.points.max(axis=0) + 2 * h
    nx, ny = (np.ceil((hi - lo) / h)).astype(int) + 1
    xs, ys = lo[0] + h * np.arange(nx), lo[1] + h * np.arange(ny)
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    dist = signed_distance(geom, pts).reshape(ny, nx)
    inside = dist > 0.0
    idx = -np.ones((ny, nx), dtype=int)
    idx[inside] = np.arange(int(inside.sum()))
    n = int(inside.sum())

    # ghost nodes: outside neighbours of inside nodes
    ghost = np.zeros_like(inside)
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ghost |= np.roll(inside, (di, dj), axis=(0, 1))
    ghost &= ~inside
    gidx = -np.ones((ny, nx), dtype=int)
    gidx[ghost] = np.arange(int(ghost.sum()))
    th, _ = _project(geom, pts.reshape(ny, nx, 2)[ghost], math.inf)
    gy = np.mod(geom.arclength_at(th), geom.length)
    ghost_vals = data.g_eps(gy, eps)

    ein, egh = [[], []], [[], []]
    for di, dj in ((0, 1), (1, 0)):
        A, B = idx, np.roll(idx, (-di, -dj), axis=(0, 1))
        GA, GB = gidx, np.roll(gidx, (-di, -dj), axis=(0, 1))
        valid = np.ones_like(inside)
        if di:
            valid[-1, :] = False
        else:
            valid[:, -1] = False
        m_in = valid & (A >= 0) & (B >= 0)
        ein[0].append(A[m_in]); ein[1].append(B[m_in])
        m1 = valid & (A >= 0) & (GB >= 0)
        egh[0].append(A[m1]); egh[1].append(GB[m1])
        m2 = valid & (GA >= 0) & (B >= 0)
        egh[0].append(B[m2]); egh[1].append(GA[m2])
    ein = (np.concatenate(ein[0]), np.concatenate(ein[1]))
    egh = (np.concatenate(egh[0]), np.concatenate(egh[1]))

    c = 2.0 * eps * eps / (h * h)
    deg = np.bincount(ein[0], minlength=n) + np.bincount(ein[1], minlength=n) + np.bincount(egh[0], minlength=n)
    gsum = np.bincount(egh[0], weights=ghost_vals[egh[1]], minlength=n)
    diag = (1.0 / tau + S) + c * deg
    L = sparse.coo_matrix((np.full(ein[0].size, -c), ein), shape=(n, n))
    A_mat = (sparse.diags(diag) + L + L.T).tocsc()
    lu = splu(A_mat)

    if initial is not None:
        u = initial.values(pts[inside.ravel()])
    else:
        u = np.full(n, b)
    u = np.clip(np.nan_to_num(u, nan=b), a, b)
    E = _grid_energy(u, ghost_vals, spec, eps, h, ein, egh)
    history = [E]
    # F_eps is of order eps * |boundary|; this floor only matters when the energy vanishes
    floor = eps * geom.length
    converged = False
    it = 0
    for it in range(1, min(max_iter, flow_steps) + 1):
        u, E_new = _flow_step(u, lu, S, tau, c, gsum, spec, a, b, ghost_vals, eps, h, ein, egh)
        history.append(E_new)
        if abs(E - E_new) <= tol * max(abs(E_new), floor):
            E, converged = E_new, True
            break
        E = E_new
    if not converged and it < max_iter:
        # polish with bounded quasi-Newton, then confirm stationarity with one more flow step
        K = (sparse.diags(deg.astype(float)) + (L + L.T) / c).tocsr()
        h2, e2 = h * h, eps * eps

        def fun(v):
            val = _grid_energy(v, ghost_vals, spec, eps, h, ein, egh)
            grad = h2 * spec.dW(v) + 2.0 * e2 * (K @ v - gsum)
            return val, grad

        res = optimize.minimize(fun, u, jac=True, method="L-BFGS-B", bounds=[(a, b)] * n,
                                callback=lambda v: history.append(_grid_energy(v, ghost_vals, spec, eps, h, ein, egh)),
                                options={"maxiter": max_iter - it, "ftol": 1e-15, "gtol": 1e-12 * h2, "maxcor": 20})
        it += int(res.nit)
        u = np.clip(res.x, a, b)
        E = _grid_energy(u, ghost_vals, spec, eps, h, ein, egh)
        for _ in range(max(max_iter - it, 1)):
            it += 1
            u, E_new = _flow_step(u, lu, S, tau, c, gsum, spec, a, b, ghost_vals, eps, h, ein, egh)
            history.append(E_new)
            done = abs(E - E_new) <= tol * max(abs(E_new), floor)
            E = E_new
            if done:
                converged = True
                break
    if not converged:
        raise SolverError(f"grid solver did not converge in {max_iter} steps", history)
    U = np.full((ny, nx), np.nan)
    U[inside] = u
    gd = GridData(xs, ys, h, U, inside, dist, E, it, history)
    fld = Field2D("grid", eps, geom, data, spec, 0.5 * geom.delta_max, None, None, gd)
    return fld, E


def energy_F_grid(field: Field2D) -> float:
    if field.representation != "grid":
        raise DomainError("grid field required")
    return field.grid.energy


@dataclass(frozen=True)
class DecayReport:
    deltas: tuple[float, ...]
    deficits: tuple[float, ...]
    slope: float
    intercept: float
    nonnegative: bool
    bounded: bool

    @property
    def ok(self) -> bool:
        if not (self.nonnegative and self.bounded):
            return False
        return all(d == 0.0 for d in self.deficits) or self.slope < 0.0

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["ok"] = self.ok
        return out


def check_decay(field: Field2D, geom: BoundaryGeometry | None = None,
                deltas: Sequence[float] | None = None) -> DecayReport:
    """Sup of ``b - u`` on ``{dist >= 2 delta}`` and the slope of its log against ``delta/eps``.

    The default ``delta = eps (5, 6, 7)`` samples past the boundary layer
    (``2 delta >= 10 eps``) and above the solver's stopping floor.
    """
    if field.representation != "grid":
        raise DomainError("decay is checked on grid minimisers")
    gd, spec, eps = field.grid, field.spec, field.epsilon
    deltas = tuple(eps * np.array([5.0, 6.0, 7.0])) if deltas is None else tuple(map(float, deltas))
    u = gd.u[gd.inside]
    dist = gd.distance[gd.inside]
    deficit = spec.b - u
    sups = []
    for dl in deltas:
        sel = dist >= 2 * dl
        sups.append(float(np.max(deficit[sel])) if np.any(sel) else 0.0)
    x = np.array(deltas) / eps
    yv = np.array(sups)
    if np.all(yv > 0):
        slope, intercept = np.polyfit(x, np.log(yv), 1)
    elif np.all(yv == 0):
        slope, intercept = math.nan, math.nan
    else:
        raise FitError("deficit vanishes on part of the ladder only")
    return DecayReport(deltas, tuple(sups), float(slope), float(intercept),
                       bool(np.all(deficit >= 0.0)), bool(np.all(deficit <= spec.b - spec.a)))


def energy_report_json(field: Field2D, energy: FieldEnergy, extra: dict | None = None, path=None) -> str:
    out = {"epsilon": field.epsilon, "representation": field.representation, "delta": field.delta}
    out.update(energy.to_dict())
    out.update(extra or {})
    text = json.dumps(out, indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text
