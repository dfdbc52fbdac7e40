"""Boundary-layer profiles: the regularised recovery profile and the heteroclinic.

The recovery profile solves ``eps v' = (delta + W(v))^{1/2}`` from the Dirichlet
value and stops when it reaches the far value. All integration happens in the
fast variable ``sigma = t/eps`` where the profile is O(1)-smooth, so the same
tolerances work for every ``eps``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy import integrate, optimize

from .errors import ConfigurationError, DomainError
from .geodesic import well_quad
from .potential import PotentialSpec

_RTOL = 1e-12
_ATOL = 1e-15


@dataclass(frozen=True)
class ProfileGrid:
    """A monotone layer profile sampled on a strictly increasing grid ``t``.

    ``dense`` (when present) evaluates the construction exactly between nodes;
    minimiser profiles have no dense output and interpolate linearly.
    """

    t: np.ndarray
    v: np.ndarray
    epsilon: float
    alpha_eps: float
    beta_eps: float
    T_eps: float
    L_eps: float | None
    extension_value: float
    delta_reg: float | None = None
    dense: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False, repr=False)

    @property
    def T(self) -> float:
        return float(self.t[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.dense is None:
            return np.interp(t, self.t, self.v)
        out = np.where(t >= self.T_eps, self.extension_value, 0.0)
        inside = t < self.T_eps
        if np.any(inside):
            out[inside] = self.dense(t[inside])
        return out

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.v) >= 0.0))

    def to_csv(self, path) -> None:
        write_profile_csv(path, self.t, self.v)


def write_profile_csv(path, t, v) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "v"])
        for ti, vi in zip(t, v):
            w.writerow([repr(float(ti)), repr(float(vi))])


def _delta(eps, delta_reg):
    return eps if delta_reg is None else float(delta_reg)


def psi_epsilon(spec: PotentialSpec, eps: float, alpha_eps: float, r: float,
                delta_reg: float | None = None, tol: float = 1e-13) -> float:
    """``eps * int_{alpha_eps}^r (delta + W)^{-1/2}``: the time the profile needs to reach ``r``."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    if r < alpha_eps:
        raise DomainError(f"r={r} lies below alpha_eps={alpha_eps}")
    d = _delta(eps, delta_reg)
    f = lambda s: 1.0 / math.sqrt(d + max(float(spec.W(s)), 0.0))
    return eps * well_quad(f, alpha_eps, r, spec, math.sqrt(d), tol)


def invert_psi(spec: PotentialSpec, eps: float, alpha_eps: float, beta_eps: float, t: float,
               delta_reg: float | None = None) -> float:
    """Value ``r`` with ``psi_epsilon(r) = t``, by bracketing on ``[alpha_eps, beta_eps]``."""
    if t <= 0.0:
        return alpha_eps
    T_eps = psi_epsilon(spec, eps, alpha_eps, beta_eps, delta_reg)
    if t >= T_eps:
        return beta_eps
    g = lambda r: psi_epsilon(spec, eps, alpha_eps, r, delta_reg) - t
    return optimize.brentq(g, alpha_eps, beta_eps, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def recovery_profile(spec: PotentialSpec, eps: float, alpha_eps: float, beta_eps: float, T: float,
                     delta_reg: float | None = None, nodes_per_eps: int = 32) -> ProfileGrid:
    """Recovery profile on ``[0, T]``: the layer ODE up to ``T_eps``, then constant ``beta_eps``."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    if not (spec.a <= alpha_eps <= beta_eps <= spec.b):
        raise DomainError("need a <= alpha_eps <= beta_eps <= b")
    d = _delta(eps, delta_reg)
    if beta_eps == alpha_eps:
        if T <= 0:
            raise ConfigurationError("T must be positive")
        t = np.array([0.0, float(T)])
        return ProfileGrid(t, np.full(2, alpha_eps), eps, alpha_eps, beta_eps, 0.0,
                           _level_time_exact(spec, eps, alpha_eps, beta_eps, d), beta_eps, d)

    T_quad = psi_epsilon(spec, eps, alpha_eps, beta_eps, d)
    if T <= T_quad:
        raise ConfigurationError(f"T={T} does not exceed the layer length {T_quad:.6g}")

    rhs = lambda s, y: np.sqrt(d + np.maximum(spec.W(y), 0.0))
    hit = lambda s, y: y[0] - beta_eps
    hit.terminal, hit.direction = True, 1.0
    s_hi = 1.1 * T_quad / eps + 1.0
    sol = integrate.solve_ivp(rhs, (0.0, s_hi), [alpha_eps], method="DOP853", rtol=_RTOL,
                              atol=_ATOL, events=hit, dense_output=True)
    if sol.status != 1:
        raise ConfigurationError("layer ODE did not reach beta_eps")
    s_end = float(sol.t_events[0][0])
    T_eps = eps * s_end

    n = max(2, int(math.ceil(s_end * nodes_per_eps)) + 1)
    s = np.linspace(0.0, s_end, n)
    v = np.minimum(sol.sol(s)[0], beta_eps)
    v[0], v[-1] = alpha_eps, beta_eps
    v = np.maximum.accumulate(v)
    tail = np.linspace(T_eps, T, max(2, int(math.ceil((T - T_eps) / (8 * eps))) + 1))[1:]
    t = np.concatenate([eps * s, tail])
    v = np.concatenate([v, np.full(tail.size, beta_eps)])

    dense = lambda tt: np.clip(sol.sol(np.asarray(tt) / eps)[0], alpha_eps, beta_eps)
    L = None
    if alpha_eps <= spec.c <= beta_eps:
        L = psi_epsilon(spec, eps, alpha_eps, spec.c, d)
    return ProfileGrid(t, v, eps, alpha_eps, beta_eps, T_eps, L, beta_eps, d, dense)


def _level_time_exact(spec, eps, alpha_eps, beta_eps, d):
    if alpha_eps <= spec.c <= beta_eps:
        return psi_epsilon(spec, eps, alpha_eps, spec.c, d)
    return None


def ode_residual(profile: ProfileGrid, spec: PotentialSpec) -> float:
    """``max |eps v' - (delta + W(v))^{1/2}|`` over interior layer nodes, relative to the max slope."""
    if profile.delta_reg is None:
        raise DomainError("residual is defined for recovery profiles only")
    eps, d = profile.epsilon, profile.delta_reg
    t = profile.t[(profile.t > 0) & (profile.t < profile.T_eps)]
    if t.size == 0:
        return 0.0
    h = 1e-4 * eps
    v = profile(t)
    slope = eps * (profile(t + h) - profile(t - h)) / (2 * h)
    target = np.sqrt(d + np.maximum(spec.W(v), 0.0))
    return float(np.max(np.abs(slope - target)) / np.max(target))


def inverse_consistency(profile: ProfileGrid, spec: PotentialSpec, max_nodes: int = 200) -> float:
    """``max |psi(v(t)) - t| / T_eps`` over (a subsample of) the layer nodes."""
    idx = np.flatnonzero((profile.t > 0) & (profile.t < profile.T_eps))
    if idx.size == 0:
        return 0.0
    idx = idx[np.linspace(0, idx.size - 1, min(max_nodes, idx.size)).astype(int)]
    err = [abs(psi_epsilon(spec, profile.epsilon, profile.alpha_eps, float(profile.v[i]), profile.delta_reg)
               - profile.t[i]) for i in idx]
    return float(max(err) / profile.T_eps)


def _gauss_panels(lo, hi, width, order=16):
    x, w = np.polynomial.legendre.leggauss(order)
    n = max(1, int(math.ceil((hi - lo) / width)))
    edges = np.linspace(lo, hi, n + 1)
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def recovery_energy(profile: ProfileGrid, spec: PotentialSpec, omega: Callable) -> float:
    """``int_0^T (W(v)/eps + eps v'^2) omega dt`` for a recovery profile, using its exact slope.

    On the layer ``eps v'^2 = (delta + W)/eps``, so in the fast variable the
    density is ``2W + delta``. The constant tail contributes ``W(beta)/eps``.
    """
    if profile.delta_reg is None or profile.dense is None:
        raise DomainError("exact energy needs a recovery profile")
    eps, d = profile.epsilon, profile.delta_reg
    total = 0.0
    if profile.T_eps > 0:
        s, w = _gauss_panels(0.0, profile.T_eps / eps, 0.125)
        v = profile.dense(eps * s)
        total += float(np.sum(w * (2 * np.maximum(spec.W(v), 0.0) + d) * omega(eps * s)))
    wb = float(spec.W(profile.extension_value))
    if wb > 0:
        x, w = _gauss_panels(profile.T_eps, profile.T, 0.05)
        total += wb / eps * float(np.sum(w * omega(x)))
    return total


def hitting_times(profile: ProfileGrid, levels: Iterable[float]) -> dict[float, float]:
    """First time the profile reaches each level, by linear interpolation between nodes.

    Levels outside ``[alpha_eps, beta_eps]`` (or never reached) are left out.
    """
    t, v = profile.t, profile.v
    lo, hi = min(profile.alpha_eps, profile.beta_eps), max(profile.alpha_eps, profile.beta_eps)
    out: dict[float, float] = {}
    for level in levels:
        level = float(level)
        if not lo <= level <= hi:
            continue
        if v[0] >= level:
            out[level] = float(t[0])
            continue
        above = np.flatnonzero(v >= level)
        if above.size == 0:
            continue
        j = int(above[0])
        frac = (level - v[j - 1]) / (v[j] - v[j - 1])
        out[level] = float(t[j - 1] + frac * (t[j] - t[j - 1]))
    return out


@dataclass(frozen=True)
class Heteroclinic:
    s: np.ndarray
    z: np.ndarray
    alpha: float
    degenerate: bool = False
    moment: np.ndarray | None = None

    def __call__(self, s):
        return np.interp(s, self.s, self.z)


def _heteroclinic_rhs(spec):
    b = spec.b

    def rhs(s, y):
        z = y[0]
        w = 0.0 if z >= b else max(float(spec.W(z)), 0.0)
        return [math.sqrt(w), 2.0 * w * s]
    return rhs


def heteroclinic(spec: PotentialSpec, alpha: float, s_max: float, n: int = 2001) -> Heteroclinic:
    """``z' = W^{1/2}(z)``, ``z(0) = alpha``, on ``[0, s_max]``; also carries the running layer moment."""
    s = np.linspace(0.0, s_max, n)
    if alpha <= spec.a or alpha >= spec.b:
        return Heteroclinic(s, np.full(n, float(alpha)), float(alpha), True, np.zeros(n))
    sol = integrate.solve_ivp(_heteroclinic_rhs(spec), (0.0, s_max), [alpha, 0.0], method="DOP853",
                              rtol=1e-13, atol=1e-16, t_eval=s)
    z = np.minimum(sol.y[0], spec.b)
    return Heteroclinic(s, z, float(alpha), False, sol.y[1])


@dataclass(frozen=True)
class LayerMoment:
    value: float
    tail_bound: float
    s_max: float


def layer_moment(spec: PotentialSpec, alpha: float, s_max: float = 40.0) -> LayerMoment:
    """``int_0^{s_max} 2 W^{1/2}(z) z' s ds`` along the heteroclinic, with a bound on the remainder.

    The bound uses ``W <= sigma^{-2}(b - z)^2`` and ``b - z`` decaying at least
    like ``exp(-sigma s)`` past ``s_max``.
    """
    het = heteroclinic(spec, alpha, s_max, n=2)
    if het.degenerate:
        return LayerMoment(0.0, 0.0, s_max)
    sig = spec.sigma
    gap = spec.b - float(het.z[-1])
    tail = 2.0 / sig**2 * gap**2 * (s_max / (2 * sig) + 1.0 / (4 * sig**2))
    return LayerMoment(float(het.moment[-1]), tail, s_max)


