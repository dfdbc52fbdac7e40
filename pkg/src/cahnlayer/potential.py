"""Double-well potentials, hypothesis checks and derived constants.

A potential is carried around as an immutable :class:`PotentialSpec`. The
callables are numpy ``Polynomial`` (or :class:`PiecewisePolynomial`) objects so
that specs pickle cleanly for process-level parallelism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import HypothesisViolation, PotentialEvaluationError

ScalarFn = Callable[[np.ndarray], np.ndarray]


class PiecewisePolynomial:
    """Polynomial pieces on ``[breaks[i], breaks[i+1]]``; outermost pieces extend to infinity."""

    def __init__(self, breaks: Sequence[float], pieces: Sequence[Sequence[float] | Polynomial]):
        breaks = np.asarray(breaks, dtype=float)
        if breaks.ndim != 1 or len(pieces) != len(breaks) - 1:
            raise ValueError("need len(pieces) == len(breaks) - 1")
        if np.any(np.diff(breaks) <= 0):
            raise ValueError("breaks must be strictly increasing")
        self.breaks = breaks
        self.pieces = [p if isinstance(p, Polynomial) else Polynomial(p) for p in pieces]

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        idx = np.clip(np.searchsorted(self.breaks, s, side="right") - 1, 0, len(self.pieces) - 1)
        out = np.empty_like(s)
        for k, p in enumerate(self.pieces):
            mask = idx == k
            if np.any(mask):
                out[mask] = p(s[mask])
        return out if out.ndim else float(out)

    def deriv(self) -> "PiecewisePolynomial":
        return PiecewisePolynomial(self.breaks, [p.deriv() for p in self.pieces])


class RootProduct:
    """``lead * prod(s - r)``; keeps full relative accuracy next to the roots."""

    def __init__(self, roots: Sequence[float], lead: float = 1.0):
        self.roots = tuple(float(r) for r in roots)
        self.lead = float(lead)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.full(s.shape, self.lead)
        for r in self.roots:
            out = out * (s - r)
        return out if out.ndim else float(out)

    def __mul__(self, factor: float) -> "RootProduct":
        return RootProduct(self.roots, self.lead * factor)

    __rmul__ = __mul__

    def deriv(self, m: int = 1) -> Polynomial:
        return (Polynomial.fromroots(self.roots) * self.lead).deriv(m)


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    witness: float | None = None
    detail: str = ""


@dataclass(frozen=True)
class HypothesisReport:
    checks: tuple[HypothesisCheck, ...]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> HypothesisCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[HypothesisCheck]:
        return [c for c in self.checks if not c.passed]


@dataclass(frozen=True)
class PotentialSpec:
    """Double-well potential ``W`` with wells ``a < b`` and saddle ``c``.

    ``alpha_minus``/``beta_minus`` default to the midpoints between each well
    and the nearer of ``c`` and ``(a+b)/2``.
    """

    W: ScalarFn
    dW: ScalarFn
    d2W: ScalarFn
    a: float
    b: float
    c: float
    alpha_minus: float | None = None
    beta_minus: float | None = None
    holder_exponent: float = 0.5
    sample_resolution: int = 10_000
    name: str = "custom"
    params: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not (self.a < self.c < self.b):
            raise ValueError(f"need a < c < b, got a={self.a}, c={self.c}, b={self.b}")
        mid = 0.5 * (self.a + self.b)
        if self.alpha_minus is None:
            object.__setattr__(self, "alpha_minus", 0.5 * (self.a + min(self.c, mid)))
        if self.beta_minus is None:
            object.__setattr__(self, "beta_minus", 0.5 * (self.b + max(self.c, mid)))
        if not 0.0 < self.holder_exponent < 1.0:
            raise ValueError("holder_exponent must lie in (0, 1)")

    # -- evaluation -------------------------------------------------------
    def sqrtW(self, s):
        return np.sqrt(np.maximum(self.W(s), 0.0))

    @property
    def d2W_a(self) -> float:
        return float(self.d2W(self.a))

    @property
    def d2W_b(self) -> float:
        return float(self.d2W(self.b))

    @property
    def log_constant_a(self) -> float:
        """``1/(sqrt(2) sqrt(W''(a)))``: the |log eps| rate of the layer integral at ``a``."""
        return 1.0 / (math.sqrt(2.0) * math.sqrt(self.d2W_a))

    @property
    def log_constant_b(self) -> float:
        return 1.0 / (math.sqrt(2.0) * math.sqrt(self.d2W_b))

    @property
    def scale_dW(self) -> float:
        """max |W'| on [a, b], used to normalise Euler-Lagrange residuals."""
        s = np.linspace(self.a, self.b, 2001)
        return float(np.max(np.abs(self.dW(s))))

    @cached_property
    def sigma(self) -> float:
        return sigma_bound(self)

    def scaled(self, factor: float) -> "PotentialSpec":
        """Return the spec for ``factor * W`` (same wells)."""
        return PotentialSpec(
            W=self.W * factor if isinstance(self.W, (Polynomial, RootProduct)) else _Scaled(self.W, factor),
            dW=self.dW * factor if isinstance(self.dW, Polynomial) else _Scaled(self.dW, factor),
            d2W=self.d2W * factor if isinstance(self.d2W, Polynomial) else _Scaled(self.d2W, factor),
            a=self.a, b=self.b, c=self.c,
            alpha_minus=self.alpha_minus, beta_minus=self.beta_minus,
            holder_exponent=self.holder_exponent,
            sample_resolution=self.sample_resolution,
            name=f"{factor}*{self.name}",
            params=self.params + (("scale", factor),),
        )


class _Scaled:
    def __init__(self, fn, factor):
        self.fn, self.factor = fn, factor

    def __call__(self, s):
        return self.factor * self.fn(s)


# -- constructors -----------------------------------------------------------

def polynomial_potential(coeffs: Sequence[float], a: float, b: float, c: float, **kw) -> PotentialSpec:
    """Potential from power-series coefficients ``coeffs[k] * s**k``."""
    W = Polynomial(coeffs)
    return PotentialSpec(W=W, dW=W.deriv(), d2W=W.deriv(2), a=a, b=b, c=c, **kw)


def quartic(**kw) -> PotentialSpec:
    """``W(s) = (1 - s^2)^2`` with wells -1, 1 and saddle 0."""
    kw.setdefault("name", "quartic")
    W = RootProduct([-1.0, -1.0, 1.0, 1.0])
    return PotentialSpec(W=W, dW=W.deriv(), d2W=W.deriv(2), a=-1.0, b=1.0, c=0.0, **kw)


def asym_quartic(a: float, b: float, **kw) -> PotentialSpec:
    """``W(s) = (s-a)^2 (s-b)^2``; the saddle sits at the midpoint."""
    W = RootProduct([a, a, b, b])
    kw.setdefault("name", "asym_quartic")
    kw.setdefault("params", (("a", a), ("b", b)))
    return PotentialSpec(W=W, dW=W.deriv(), d2W=W.deriv(2), a=a, b=b, c=0.5 * (a + b), **kw)


def piecewise_potential(breaks, table, a: float, b: float, c: float, **kw) -> PotentialSpec:
    """Potential from a table of polynomial pieces (power-series coefficients per piece)."""
    W = PiecewisePolynomial(breaks, table)
    dW = W.deriv()
    kw.setdefault("name", "piecewise")
    return PotentialSpec(W=W, dW=dW, d2W=dW.deriv(), a=a, b=b, c=c, **kw)


def potential_from_config(cfg) -> PotentialSpec:
    """Build a potential from a config value.

    Accepts ``"quartic"``, ``"asym_quartic(a,b)"``, or a table
    ``{"kind": "piecewise", "breaks": [...], "pieces": [[...], ...], "a":.., "b":.., "c":..}``
    (``"kind": "polynomial"`` with ``"coeffs"`` works too).
    """
    if isinstance(cfg, str):
        text = cfg.replace(" ", "")
        if text == "quartic":
            return quartic()
        if text.startswith("asym_quartic(") and text.endswith(")"):
            a, b = (float(x) for x in text[len("asym_quartic("):-1].split(","))
            return asym_quartic(a, b)
        raise ValueError(f"unknown potential {cfg!r}")
    cfg = dict(cfg)
    kind = cfg.pop("kind", "piecewise")
    extra = {k: cfg.pop(k) for k in ("alpha_minus", "beta_minus", "holder_exponent", "sample_resolution") if k in cfg}
    if kind == "polynomial":
        return polynomial_potential(cfg["coeffs"], cfg["a"], cfg["b"], cfg["c"], name="polynomial", **extra)
    if kind == "piecewise":
        return piecewise_potential(cfg["breaks"], cfg["pieces"], cfg["a"], cfg["b"], cfg["c"], **extra)
    raise ValueError(f"unknown potential kind {kind!r}")


# -- hypothesis checks ------------------------------------------------------

def _evaluate(fn, s, label):
    vals = np.asarray(fn(s), dtype=float)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        x = float(np.atleast_1d(s)[np.argmax(np.atleast_1d(bad))])
        raise PotentialEvaluationError(f"non-finite {label} at s={x!r}")
    return vals


def _sample_grid(spec: PotentialSpec) -> np.ndarray:
    s = np.linspace(spec.a - 1.0, spec.b + 1.0, spec.sample_resolution)
    return np.unique(np.concatenate([s, [spec.a, spec.b, spec.c]]))


def validate_hypotheses(spec: PotentialSpec) -> HypothesisReport:
    """Check the standing assumptions on ``W`` by dense sampling on ``[a-1, b+1]``."""
    a, b, c = spec.a, spec.b, spec.c
    s = _sample_grid(spec)
    W = _evaluate(spec.W, s, "W")
    dW = _evaluate(spec.dW, s, "W'")
    d2W = _evaluate(spec.d2W, s, "W''")
    scale = max(float(np.max(np.abs(W))), 1.0)
    zero_tol = 1e-12 * scale
    checks = []

    # two zeros exactly at a and b
    Wa, Wb = float(spec.W(a)), float(spec.W(b))
    others = (np.abs(s - a) > 0) & (np.abs(s - b) > 0)
    bad = others & (W <= 0)
    if abs(Wa) > zero_tol:
        checks.append(HypothesisCheck("two_zeros", False, a, f"W(a)={Wa:g} != 0"))
    elif abs(Wb) > zero_tol:
        checks.append(HypothesisCheck("two_zeros", False, b, f"W(b)={Wb:g} != 0"))
    elif np.any(bad) or np.any(W < -zero_tol):
        x = float(s[np.argmax(bad | (W < -zero_tol))])
        checks.append(HypothesisCheck("two_zeros", False, x, "W <= 0 away from the wells"))
    else:
        checks.append(HypothesisCheck("two_zeros", True))

    d2a, d2b = float(spec.d2W(a)), float(spec.d2W(b))
    if d2a <= 0:
        checks.append(HypothesisCheck("nondegenerate_wells", False, a, f"W''(a)={d2a:g}"))
    elif d2b <= 0:
        checks.append(HypothesisCheck("nondegenerate_wells", False, b, f"W''(b)={d2b:g}"))
    else:
        checks.append(HypothesisCheck("nondegenerate_wells", True))

    # coercivity only at two far points
    far = abs(a) + abs(b) + 10.0
    left, right = float(spec.dW(-far)), float(spec.dW(far))
    bound = float(np.max(np.abs(dW[(s >= a) & (s <= b)])))
    if not left < -bound:
        checks.append(HypothesisCheck("far_field_growth", False, -far, f"W'({-far:g})={left:g}"))
    elif not right > bound:
        checks.append(HypothesisCheck("far_field_growth", False, far, f"W'({far:g})={right:g}"))
    else:
        checks.append(HypothesisCheck("far_field_growth", True))

    # W' sign pattern -,+,-,+ with zeros at a, c, b
    dtol = 1e-12 * max(float(np.max(np.abs(dW))), 1.0)
    regions = [(s < a, -1), ((s > a) & (s < c), 1), ((s > c) & (s < b), -1), (s > b, 1)]
    witness = None
    for mask, sign in regions:
        wrong = mask & (sign * dW <= 0)
        if np.any(wrong):
            witness = float(s[np.argmax(wrong)])
            break
    zeros_ok = all(abs(float(spec.dW(x))) <= dtol for x in (a, b, c))
    d2c = float(spec.d2W(c))
    if witness is not None:
        checks.append(HypothesisCheck("three_critical_points", False, witness, "W' has the wrong sign"))
    elif not zeros_ok:
        x = next(x for x in (a, c, b) if abs(float(spec.dW(x))) > dtol)
        checks.append(HypothesisCheck("three_critical_points", False, x, "W' does not vanish"))
    elif d2c >= 0:
        checks.append(HypothesisCheck("three_critical_points", False, c, f"W''(c)={d2c:g} >= 0"))
    else:
        checks.append(HypothesisCheck("three_critical_points", True))

    mid = 0.5 * (a + b)
    am, bm = spec.alpha_minus, spec.beta_minus
    ordered = a < am < min(c, mid) <= max(c, mid) < bm < b
    checks.append(HypothesisCheck("inner_levels_ordered", ordered, None if ordered else am,
                                  "" if ordered else "alpha_minus/beta_minus out of order"))
    return HypothesisReport(tuple(checks))


def _require_valid(spec: PotentialSpec) -> None:
    report = validate_hypotheses(spec)
    if not report.all_passed:
        names = ", ".join(c.name for c in report.failures())
        raise HypothesisViolation(f"potential {spec.name!r} fails: {names}")


def _quadratic_ratios(spec: PotentialSpec):
    """Sampled ``W(s)/(b-s)^2`` on [alpha_-, b+1] and ``W(s)/(s-a)^2`` on [a-1, beta_-]."""
    n = spec.sample_resolution
    sb = np.linspace(spec.alpha_minus, spec.b + 1.0, n)
    sa = np.linspace(spec.a - 1.0, spec.beta_minus, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        rb = spec.W(sb) / (spec.b - sb) ** 2
        ra = spec.W(sa) / (sa - spec.a) ** 2
    rb = np.where(np.isclose(sb, spec.b, rtol=0, atol=1e-14), 0.5 * spec.d2W_b, rb)
    ra = np.where(np.isclose(sa, spec.a, rtol=0, atol=1e-14), 0.5 * spec.d2W_a, ra)
    return ra, rb


def sigma_bound(spec: PotentialSpec) -> float:
    """Largest sigma with ``sigma^2 d^2 <= W <= d^2/sigma^2`` near both wells.

    The admissible set is an interval ``(0, sigma*]``; sigma* is located by
    dyadic bisection against the sampled inequalities.
    """
    _require_valid(spec)
    ra, rb = _quadratic_ratios(spec)
    lo_ratio = min(ra.min(), rb.min())
    hi_ratio = max(ra.max(), rb.max())

    def ok(sig):
        return sig * sig <= lo_ratio and hi_ratio <= 1.0 / (sig * sig)

    lo, hi = 0.0, 1.0
    while ok(hi):
        hi *= 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    if lo <= 1e-6:
        raise HypothesisViolation("no sigma > 1e-6 satisfies the quadratic comparison near the wells")
    return lo


def taylor_delta(spec: PotentialSpec, eta: float) -> float:
    """Largest delta with ``|W(s) / (W''(a)(s-a)^2/2) - 1| <= eta`` on ``[a, a+delta]``.

    Capped at ``alpha_minus - a``.
    """
    if not 0.0 < eta < 0.25:
        raise ValueError("eta must lie in (0, 1/4)")
    a = spec.a
    cap = spec.alpha_minus - a
    half = 0.5 * spec.d2W_a

    def ok_at(x):
        x = np.atleast_1d(x)
        r = spec.W(a + x) / (half * x * x)
        return (r >= 1 - eta) & (r <= 1 + eta)

    grid = np.linspace(0.0, cap, spec.sample_resolution + 1)[1:]
    good = ok_at(grid)
    if good.all():
        return cap
    first_bad = int(np.argmin(good))
    lo = grid[first_bad - 1] if first_bad > 0 else 0.0
    hi = grid[first_bad]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ok_at(mid)[0]:
            lo = mid
        else:
            hi = mid
    return lo
