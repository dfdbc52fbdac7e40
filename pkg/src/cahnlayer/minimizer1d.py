"""Minimisation of the weighted 1D functional ``G_eps(v) = int (W(v) + eps^2 v'^2) omega dt``.

The functional is discretised with continuous piecewise-linear elements. The
gradient term is integrated exactly and the potential term with 3-point Gauss
quadrature, which is exact for a quartic ``W`` and an affine weight. The same
rule evaluates every energy the module reports, so the discrete minimiser is
never above any competitor interpolated onto its mesh.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import AdmissibilityError, DomainError, SolverError
from .geodesic import GeodesicTable, cW, dW
from .potential import PotentialSpec, taylor_delta
from .profile import ProfileGrid, hitting_times, recovery_profile

_GX, _GW = np.polynomial.legendre.leggauss(3)
_LAM = 0.5 * (1.0 - _GX)  # weight of the left node at each Gauss point


# -- weights ---------------------------------------------------------------

@dataclass(frozen=True)
class WeightFn:
    """Fibre weight ``omega`` on ``[0, T]`` with its derivative."""

    omega: Callable[[np.ndarray], np.ndarray]
    domega: Callable[[np.ndarray], np.ndarray]
    T: float = 1.0
    omega0_gap: float | None = None
    name: str = "custom"
    samples: int = 2001

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError("T must be positive")
        if float(np.min(self.omega(self.grid))) <= 0.0:
            raise DomainError("omega must be positive on [0, T]")

    @classmethod
    def linear(cls, slope: float, T: float = 1.0, intercept: float = 1.0) -> "WeightFn":
        return cls(lambda t: intercept + slope * np.asarray(t, dtype=float),
                   lambda t: np.full(np.shape(t), float(slope)),
                   T=T, name=f"linear({intercept}+{slope}t)")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.samples)

    @property
    def omega_0(self) -> float:
        return float(self.omega(np.array(0.0)))

    @property
    def domega_0(self) -> float:
        return float(self.domega(np.array(0.0)))

    @property
    def strictly_increasing(self) -> bool:
        return bool(np.all(self.domega(self.grid) > 0.0))

    @property
    def strictly_decreasing(self) -> bool:
        return bool(np.all(self.domega(self.grid) < 0.0))

    def holder_norm(self, d: float = 1.0, samples: int = 201) -> float:
        """``sup |omega'(x) - omega'(y)| / |x - y|^d`` over pairs of sample points."""
        x = np.linspace(0.0, self.T, samples)
        dw = self.domega(x)
        i, j = np.triu_indices(samples, 1)
        return float(np.max(np.abs(dw[i] - dw[j]) / np.abs(x[i] - x[j]) ** d))


# -- mesh and discrete functional -----------------------------------------

def graded_mesh(eps: float, T: float, fast_len: float, nodes_per_eps: int = 256,
                growth: float = 1.05, h_max: float | None = None) -> np.ndarray:
    """Uniform spacing ``eps/nodes_per_eps`` on ``[0, fast_len]`` and on ``[T-fast_len, T]``,
    geometric growth in between. Each half has an even element count so ``mesh[::2]`` is a
    nested coarsening.
    """
    h = eps / nodes_per_eps
    half = 0.5 * T
    h_max = 0.02 * T if h_max is None else h_max
    n_fast = int(math.ceil(min(fast_len, half) / h))
    steps = [h] * n_fast
    total = h * n_fast
    if total >= half:
        steps = [half / n_fast] * n_fast
    else:
        grow, step = [], h
        while total + sum(grow) < half:
            step = min(step * growth, h_max)
            grow.append(step)
        grow = np.array(grow) * ((half - total) / sum(grow))
        steps = steps + list(grow)
    if len(steps) % 2:
        last = steps.pop()
        steps += [0.5 * last, 0.5 * last]
    steps = np.array(steps)
    left = np.concatenate([[0.0], np.cumsum(steps)])
    right = T - left[::-1]
    t = np.concatenate([left[:-1], [half], right[1:]])
    t[-1] = T
    return t


class DiscreteFunctional:
    """P1 discretisation of ``G_eps`` on a fixed mesh."""

    def __init__(self, spec: PotentialSpec, omega: Callable, eps: float, t: np.ndarray):
        t = np.asarray(t, dtype=float)
        if t.ndim != 1 or t.size < 3 or np.any(np.diff(t) <= 0):
            raise DomainError("mesh must be strictly increasing with at least 3 nodes")
        self.spec, self.eps, self.t = spec, float(eps), t
        self.h = np.diff(t)
        self.tq = t[:-1, None] * _LAM + t[1:, None] * (1.0 - _LAM)
        self.wq = 0.5 * self.h[:, None] * _GW
        self.om_q = np.asarray(omega(self.tq), dtype=float)
        self.m_om = np.sum(self.wq * self.om_q, axis=1)
        self.mass = np.zeros(t.size)
        self.mass[:-1] += 0.5 * self.m_om
        self.mass[1:] += 0.5 * self.m_om

    def _vq(self, v):
        return v[:-1, None] * _LAM + v[1:, None] * (1.0 - _LAM)

    def element_density(self, v, multiplier=None):
        """Per-element ``int_e (W/eps + eps v'^2) m dt`` for ``m`` given at the Gauss points."""
        m = self.om_q if multiplier is None else multiplier
        slope = np.diff(v) / self.h
        Wq = self.spec.W(self._vq(v))
        return np.sum(self.wq * m * (Wq / self.eps + self.eps * slope[:, None] ** 2), axis=1)

    def energy(self, v) -> float:
        """``G_eps`` (unscaled)."""
        slope = np.diff(v) / self.h
        Wq = self.spec.W(self._vq(v))
        return float(np.sum(self.eps**2 * slope**2 * self.m_om) + np.sum(self.wq * self.om_q * Wq))

    def gradient(self, v) -> np.ndarray:
        slope = np.diff(v) / self.h
        flux = 2.0 * self.eps**2 * slope * self.m_om / self.h
        dWq = self.wq * self.om_q * self.spec.dW(self._vq(v))
        g = np.zeros_like(v)
        g[:-1] += -flux + np.sum(dWq * _LAM, axis=1)
        g[1:] += flux + np.sum(dWq * (1.0 - _LAM), axis=1)
        return g

    def hessian(self, v):
        """Diagonal and off-diagonal of the tridiagonal Hessian."""
        k = 2.0 * self.eps**2 * self.m_om / self.h**2
        d2 = self.wq * self.om_q * self.spec.d2W(self._vq(v))
        diag = np.zeros_like(v)
        diag[:-1] += k + np.sum(d2 * _LAM**2, axis=1)
        diag[1:] += k + np.sum(d2 * (1.0 - _LAM) ** 2, axis=1)
        off = -k + np.sum(d2 * _LAM * (1.0 - _LAM), axis=1)
        return diag, off

    def residual(self, v) -> np.ndarray:
        """Interior Euler-Lagrange residual, normalised by the lumped weighted mass."""
        return (self.gradient(v) / self.mass)[1:-1]


def _banded(diag, off, shift):
    n = diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = off[: n - 1]
    ab[1] = diag + shift
    ab[2, :-1] = off[: n - 1]
    return ab


def newton_minimize(F: DiscreteFunctional, v0: np.ndarray, tol: float, max_iter: int = 200,
                    history: list | None = None) -> tuple[np.ndarray, bool, int]:
    """Damped Newton on the interior nodes with an Armijo line search.

    If the Newton direction is not a descent direction the Hessian is shifted
    by a multiple of the lumped mass until it is.
    """
    a, b = F.spec.a, F.spec.b
    v = np.clip(np.array(v0, dtype=float), a, b)
    history = [] if history is None else history
    E = F.energy(v)
    for it in range(max_iter):
        g = F.gradient(v)[1:-1]
        res = float(np.max(np.abs(g / F.mass[1:-1])))
        history.append(res)
        if res <= tol:
            return v, True, it
        diag, off = F.hessian(v)
        diag, off = diag[1:-1], off[1:-1]
        shift, p = 0.0, None
        scale = float(np.max(np.abs(diag)))
        for _ in range(30):
            try:
                cand = solve_banded((1, 1), _banded(diag, off, shift * F.mass[1:-1]), -g)
            except (np.linalg.LinAlgError, ValueError):
                cand = None
            if cand is not None and np.all(np.isfinite(cand)) and float(g @ cand) < 0:
                p = cand
                break
            shift = scale * 1e-8 if shift == 0 else 10.0 * shift
        if p is None:
            return v, False, it
        slope = float(g @ p)
        step = 1.0
        while True:
            trial = v.copy()
            trial[1:-1] = np.clip(v[1:-1] + step * p, a, b)
            E_new = F.energy(trial)
            # below roundoff the energy cannot rank steps; accept the Newton step
            if E_new <= E + 1e-4 * step * slope or abs(slope) < 1e-13 * max(abs(E), 1e-300):
                break
            step *= 0.5
            if step < 1e-12:
                return v, False, it
        v, E = trial, E_new
    g = F.gradient(v)[1:-1]
    res = float(np.max(np.abs(g / F.mass[1:-1])))
    history.append(res)
    return v, res <= tol, max_iter


def gradient_flow(F: DiscreteFunctional, v0: np.ndarray, tau: float, steps: int) -> np.ndarray:
    """Semi-implicit flow: implicit in the gradient term, explicit in ``W'``."""
    a, b = F.spec.a, F.spec.b
    v = np.array(v0, dtype=float)
    k = 2.0 * F.eps**2 * F.m_om / F.h**2
    diag = np.zeros_like(v)
    diag[:-1] += k
    diag[1:] += k
    m = F.mass
    ab = _banded(diag[1:-1], -k[1:-1], m[1:-1] / tau)
    for _ in range(steps):
        g_full = F.gradient(v)
        # g = K v + f_W(v); solve (M/tau + K) v_new = M/tau v - f_W(v)
        Kv = np.zeros_like(v)
        Kv[:-1] += k * (v[:-1] - v[1:])
        Kv[1:] += k * (v[1:] - v[:-1])
        fW = g_full - Kv
        rhs = m[1:-1] / tau * v[1:-1] - fW[1:-1]
        rhs[0] += k[0] * v[0]
        rhs[-1] += k[-1] * v[-1]
        v[1:-1] = np.clip(solve_banded((1, 1), ab, rhs), a, b)
    return v


# -- reports -----------------------------------------------------------------

@dataclass(frozen=True)
class EnergyReport:
    epsilon: float
    scaling_mode: str
    G_eps: float
    G1: float
    G2_eps_scale: float
    G2_log_scale: float
    subtraction: float
    A: float
    B: float
    C: float
    D: float
    T_split: float

    @property
    def G2(self) -> float:
        return self.G2_log_scale if self.scaling_mode == "eps_log" else self.G2_eps_scale

    @property
    def scale(self) -> float:
        return _scale(self.epsilon, self.scaling_mode)

    def to_dict(self) -> dict:
        return asdict(self)


def _scale(eps, mode):
    if mode == "eps":
        return eps
    if mode == "eps_log":
        return eps * abs(math.log(eps))
    raise DomainError(f"unknown scaling mode {mode!r}")


def energy_report(spec: PotentialSpec, weight: WeightFn, eps: float, profile: ProfileGrid,
                  scaling_mode: str = "eps_log", alpha_limit: float | None = None,
                  mesh: np.ndarray | None = None, table: GeodesicTable | None = None) -> EnergyReport:
    """All energy scales of ``profile`` plus the four-term split at ``T_eps``.

    The subtracted first-order minimum is ``d_W(alpha, b) omega(0)`` with ``alpha``
    the limit Dirichlet value (``a`` in ``eps_log`` mode, ``alpha_eps`` in ``eps``
    mode unless given). When ``mesh`` is given the profile is sampled there.
    """
    scale = _scale(eps, scaling_mode)
    if alpha_limit is None:
        alpha_limit = spec.a if scaling_mode == "eps_log" else profile.alpha_eps
    tol = 1e-12 * max(1.0, abs(spec.b - spec.a))
    if abs(profile.v[0] - profile.alpha_eps) > tol or abs(profile.v[-1] - profile.beta_eps) > tol:
        raise AdmissibilityError("profile does not match its Dirichlet values")
    if abs(profile.T - weight.T) > 1e-12 * weight.T:
        raise AdmissibilityError("profile and weight live on different intervals")
    t = profile.t if mesh is None else np.asarray(mesh, dtype=float)
    v = profile.v if mesh is None else profile(t)
    F = DiscreteFunctional(spec, weight.omega, eps, t)
    table = table or GeodesicTable(spec)
    w0, dw0 = weight.omega_0, weight.domega_0
    sub = dW(table, alpha_limit, spec.b) * w0

    e1 = F.element_density(v, np.ones_like(F.tq))
    et = F.element_density(v, F.tq)
    eom = F.element_density(v)
    G1 = float(np.sum(eom))
    G_eps = F.energy(v)
    j = int(np.argmin(np.abs(t - profile.T_eps)))
    inner = slice(0, j)
    A = (float(np.sum(e1[inner])) * w0 - sub) / scale
    B = float(np.sum(et[inner])) * dw0 / scale
    C = float(np.sum((eom - w0 * e1 - dw0 * et)[inner])) / scale
    D = float(np.sum(eom[j:])) / scale
    return EnergyReport(eps, scaling_mode, G_eps, G1, (G1 - sub) / eps,
                        (G1 - sub) / (eps * abs(math.log(eps))), sub, A, B, C, D, float(t[j]))


@dataclass
class Minimizer1DResult:
    profile: ProfileGrid
    el_residual_max: float
    energies: EnergyReport
    mesh: np.ndarray
    iterations: int
    converged: bool
    interior: bool
    recovery_G1: float
    G1_coarse: float | None = None
    history: list = field(default_factory=list)
    property_flags: dict = field(default_factory=dict)

    @property
    def G1_extrapolated(self) -> float:
        """Richardson value ``(4 G1_h - G1_2h)/3`` from the nested coarse mesh."""
        if self.G1_coarse is None:
            return self.energies.G1
        return (4.0 * self.energies.G1 - self.G1_coarse) / 3.0

    def G2_extrapolated(self) -> float:
        e = self.energies
        return (self.G1_extrapolated - e.subtraction) / e.scale

    def to_json(self, path=None) -> str:
        rec = {
            "epsilon": self.energies.epsilon,
            "energies": self.energies.to_dict(),
            "G1_extrapolated": self.G1_extrapolated,
            "el_residual_max": self.el_residual_max,
            "iterations": self.iterations,
            "converged": self.converged,
            "flags": {**self.property_flags, "interior": self.interior},
        }
        text = json.dumps(rec, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _strictly_interior(v, spec) -> bool:
    """``a < v < b`` at interior nodes, up to rounding inside a plateau.

    Deep in a plateau the minimiser is closer to the well than one ulp, so a
    node stored exactly at a well is accepted when both neighbours are within
    ``1e-8 (b - a)`` of it as well. A clamp binding inside a layer fails this.
    """
    near = 1e-8 * (spec.b - spec.a)
    for well in (spec.a, spec.b):
        for i in np.flatnonzero(v == well):
            lo, hi = max(i - 1, 0), min(i + 2, v.size)
            if np.any(np.abs(v[lo:hi] - well) > near):
                return False
    return True


def _profile_from_nodes(spec, t, v, eps, alpha_eps, beta_eps, k):
    level = beta_eps - eps**k
    hits = hitting_times(ProfileGrid(t, v, eps, alpha_eps, beta_eps, float(t[-1]), None, beta_eps),
                         [level, spec.c])
    T_eps = hits.get(level, float(t[-1]))
    return ProfileGrid(t, v, eps, alpha_eps, beta_eps, T_eps, hits.get(spec.c), beta_eps)


def minimize_G(spec: PotentialSpec, weight: WeightFn, eps: float, alpha_eps: float, beta_eps: float,
               grid_size: int = 256, scaling_mode: str = "eps_log", alpha_limit: float | None = None,
               delta_reg: float | None = None, k: int = 2, richardson: bool = True,
               tol: float | None = None, growth: float = 1.05) -> Minimizer1DResult:
    """Discrete minimiser of ``G_eps`` with ``v(0)=alpha_eps``, ``v(T)=beta_eps``.

    ``grid_size`` is the number of elements per ``eps`` in the two uniform
    end zones. The initial guess is the recovery profile; ``delta_reg`` only
    affects that guess and the recovery energy reported alongside.
    """
    if not (spec.a <= alpha_eps <= spec.b and spec.a <= beta_eps <= spec.b):
        raise DomainError("Dirichlet data must lie in [a, b]")
    T = weight.T
    hi = max(alpha_eps, beta_eps)
    lo = min(alpha_eps, beta_eps)
    if hi > lo:
        rec = recovery_profile(spec, eps, lo, hi, T, delta_reg)
        if alpha_eps > beta_eps:
            rev = rec
            rec = ProfileGrid(T - rev.t[::-1], rev.v[::-1], eps, alpha_eps, beta_eps, T - rev.T_eps,
                              None, alpha_eps, rev.delta_reg, lambda tt: rev(T - np.asarray(tt)))
        layer = rec.T_eps if alpha_eps <= beta_eps else T - rec.T_eps
    else:
        rec, layer = None, 0.0
    fast = max(layer, 0.0) + 12.0 * eps
    mesh = graded_mesh(eps, T, fast, grid_size, growth)
    F = DiscreteFunctional(spec, weight.omega, eps, mesh)
    v0 = np.full(mesh.size, alpha_eps) if rec is None else rec(mesh)
    v0[0], v0[-1] = alpha_eps, beta_eps
    tol = 1e-10 * spec.scale_dW if tol is None else tol

    history: list = []
    v, ok, its = newton_minimize(F, v0, tol, history=history)
    if not ok:
        v = gradient_flow(F, v, tau=0.25, steps=400)
        v, ok, more = newton_minimize(F, v, tol, history=history)
        its += more
    if not ok:
        raise SolverError(f"Newton did not converge (residual {history[-1]:.3e}, tol {tol:.3e})", history)

    res = float(np.max(np.abs(F.residual(v))))
    interior = _strictly_interior(v[1:-1], spec)
    profile = _profile_from_nodes(spec, mesh, v, eps, alpha_eps, beta_eps, k)
    report = energy_report(spec, weight, eps, profile, scaling_mode, alpha_limit)
    rec_G1 = float(np.sum(F.element_density(v0))) if rec is not None else report.G1

    G1c = None
    if richardson:
        coarse = mesh[::2]
        Fc = DiscreteFunctional(spec, weight.omega, eps, coarse)
        vc, okc, _ = newton_minimize(Fc, v[::2], tol)
        if okc:
            G1c = Fc.energy(vc) / eps
    flags = {"energy_below_recovery": bool(report.G1 <= rec_G1 * (1 + 1e-14))}
    return Minimizer1DResult(profile, res, report, mesh, its, ok, interior, rec_G1, G1c, history, flags)


# -- qualitative checks --------------------------------------------------------

def _element_data(profile: ProfileGrid):
    t, v = profile.t, profile.v
    h = np.diff(t)
    return 0.5 * (v[1:] + v[:-1]), np.diff(v) / h


@dataclass(frozen=True)
class MonotonicityReport:
    tau0: float
    monotone: bool
    window_ok: bool
    violations: tuple[int, ...]
    checked: int

    @property
    def ok(self) -> bool:
        return self.monotone and self.window_ok


def check_monotonicity(profile: ProfileGrid, spec: PotentialSpec, eps: float, tau0: float) -> MonotonicityReport:
    """Slope sign and the two-sided slope bounds near each well, on element midpoints.

    Positivity is asserted where ``v <= b - tau0 sqrt(eps)``; the bound near ``a``
    on ``a + tau0 sqrt(eps) <= v <= beta_minus``; near ``b`` on
    ``alpha_minus <= v <= b - tau0 sqrt(eps)``.
    """
    vm, dv = _element_data(profile)
    sig, a, b = spec.sigma, spec.a, spec.b
    cut = tau0 * math.sqrt(eps)
    g2 = (eps * dv) ** 2
    bad = set()
    mono = vm <= b - cut
    bad.update(np.flatnonzero(mono & (dv <= 0)).tolist())
    win_a = (vm >= a + cut) & (vm <= spec.beta_minus)
    da = (vm - a) ** 2
    bad_a = win_a & ((g2 < 0.5 * sig**2 * da) | (g2 > 1.5 * da / sig**2))
    win_b = (vm >= spec.alpha_minus) & (vm <= b - cut)
    db = (b - vm) ** 2
    bad_b = win_b & ((g2 < 0.5 * sig**2 * db) | (g2 > 1.5 * db / sig**2))
    bad.update(np.flatnonzero(bad_a | bad_b).tolist())
    monotone = not bool(np.any(mono & (dv <= 0)))
    window_ok = not bool(np.any(bad_a | bad_b))
    return MonotonicityReport(tau0, monotone, window_ok, tuple(sorted(bad)),
                              int(np.count_nonzero(mono | win_a | win_b)))


def calibrate_tau0(profile: ProfileGrid, spec: PotentialSpec, eps: float,
                   multiples: Sequence[float] = (1, 2, 4, 8)) -> float:
    """Smallest ``m / sigma`` for which the monotonicity checks pass; raises if none does."""
    for m in multiples:
        tau0 = m / spec.sigma
        if check_monotonicity(profile, spec, eps, tau0).ok:
            return tau0
    raise SolverError("no calibration multiple satisfies the monotonicity windows")


@dataclass(frozen=True)
class HittingReport:
    T_eps: float
    T_ratio: float
    S_eps_eta: float | None
    S_ratio: float | None
    S_log_ratio: float | None
    slope_bound: float | None


def check_hitting_bounds(profile: ProfileGrid, spec: PotentialSpec, eps: float, eta: float,
                         k: int = 2, tau0: float | None = None, delta_eta: float | None = None) -> HittingReport:
    """Hitting-time ratios of a minimiser.

    ``T_ratio = T_eps/(eps|log eps|)`` with ``T_eps`` the first time ``v = beta_eps - eps^k``;
    ``S_ratio`` divides ``S_{eps,eta}`` by its leading lower bound ``(1-eta) eps|log eps| / (sqrt2 sqrt W''(a))``
    and ``S_log_ratio`` by ``eps|log eps| / (sqrt2 sqrt W''(a))``; ``slope_bound`` is
    ``min sqrt(eps)|v'|`` while ``v <= a + tau0 sqrt(eps)``.
    """
    L = eps * abs(math.log(eps))
    level_T = profile.beta_eps - eps**k
    dl = taylor_delta(spec, eta) if delta_eta is None else delta_eta
    level_S = spec.a + dl
    hits = hitting_times(profile, [level_T, level_S])
    T_eps = hits.get(level_T, profile.T)
    S = hits.get(level_S)
    c = spec.log_constant_a
    S_ratio = None if S is None else S / (c * (1 - eta) * L)
    S_log = None if S is None else S / (c * L)
    bound = None
    if tau0 is not None:
        vm, dv = _element_data(profile)
        sel = vm <= spec.a + tau0 * math.sqrt(eps)
        # only the initial rise: stop at the first element leaving the window
        if np.any(~sel):
            sel[int(np.argmin(sel)):] = False
        if np.any(sel):
            bound = float(np.min(math.sqrt(eps) * np.abs(dv[sel])))
    return HittingReport(T_eps, T_eps / L, S, S_ratio, S_log, bound)


# -- first-order limit ---------------------------------------------------------

@dataclass(frozen=True)
class G1LimitResult:
    minimizer: str
    t0: float | None
    value: float
    candidates: dict


def g1_limit_minimizer(spec: PotentialSpec, weight: WeightFn, alpha: float, beta: float,
                       table: GeodesicTable | None = None, n_t0: int = 401) -> G1LimitResult:
    """Minimise the first-order limit over constants and single jumps between the wells.

    Ties are resolved in favour of constants.
    """
    table = table or GeodesicTable(spec)
    a, b, T = spec.a, spec.b, weight.T
    w0, wT = weight.omega_0, float(weight.omega(np.array(T)))
    d = lambda x, y: dW(table, x, y)
    C = cW(table)
    cand = {
        "b": d(b, alpha) * w0 + d(b, beta) * wT,
        "a": d(a, alpha) * w0 + d(a, beta) * wT,
    }
    t0 = np.linspace(0.0, T, n_t0)
    om = weight.omega(t0)
    jab = C * om + d(a, alpha) * w0 + d(b, beta) * wT
    jba = C * om + d(b, alpha) * w0 + d(a, beta) * wT
    i, j = int(np.argmin(jab)), int(np.argmin(jba))
    cand["jump_ab"] = float(jab[i])
    cand["jump_ba"] = float(jba[j])
    where = {"jump_ab": float(t0[i]), "jump_ba": float(t0[j])}
    order = ["b", "a", "jump_ab", "jump_ba"]
    best = min(order, key=lambda kname: (round(cand[kname], 12), order.index(kname)))
    return G1LimitResult(best, where.get(best), cand[best], cand)
