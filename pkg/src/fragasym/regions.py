"""Exponential growth and decay of x u(t, x) along the rays x = exp(K'(s) t).

Along such a ray x u grows like exp(F(s) t) in the bulk, where

    F(s) = K(s) - 1 - (s - 1) K'(s),

and like exp(G(p, s) t) with G(p, s) = K(p) - 1 - (p - 1) K'(s) when a tail
of the datum with exponent p dominates.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, RootBracketError
from .kernel import FragmentationKernel
from .mellin import InitialDatum

__all__ = [
    "F_exponent",
    "G_exponent",
    "RegionReport",
    "GrowthFragClass",
    "CriticalCurve",
    "region_report",
    "classify_growth_frag",
    "critical_curve_slope",
    "exponent_curves",
]


def F_exponent(kernel: FragmentationKernel, s):
    return kernel.K(s) - 1 - (s - 1) * kernel.dK(s, 1)


def G_exponent(kernel: FragmentationKernel, p, s):
    return kernel.K(p) - 1 - (p - 1) * kernel.dK(s, 1)


@dataclass
class RegionReport:
    p_bar: float
    q_bar: float
    s_bar_p0: float | None
    s_bar_q0: float | None
    growth_interval: tuple[float, float]
    boundary_slopes: tuple[float, float]
    p0: float
    q0: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["growth_interval"] = list(self.growth_interval)
        d["boundary_slopes"] = list(self.boundary_slopes)
        return d


def _root(f, a, b, what):
    fa, fb = f(a), f(b)
    if not (np.sign(fa) * np.sign(fb) < 0):
        raise RootBracketError(f"{what}: no sign change on [{a:.6g}, {b:.6g}] (f={fa:.3g}, {fb:.3g})")
    return brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def _left_point(kernel, f, anchor, want_negative=True):
    """Walk from ``anchor`` toward p1 until f changes sign."""
    p1 = kernel.p1
    for k in range(1, 80):
        s = p1 + (anchor - p1) * 0.5**k if math.isfinite(p1) else anchor - 2.0**k
        try:
            val = f(s)
        except (OverflowError, FloatingPointError):
            break
        if not math.isfinite(val):
            break
        if (val < 0) == want_negative:
            return s
    raise RootBracketError(f"no sign change found between p1 = {p1} and {anchor}")


def _right_point(f, anchor, want_negative=True):
    s = anchor
    for _ in range(80):
        s = 2 * s if s > 0 else s + 1
        if (f(s) < 0) == want_negative:
            return s
    raise RootBracketError(f"no sign change found to the right of {anchor}")


def region_report(kernel: FragmentationKernel, datum: InitialDatum | None = None,
                  p0: float | None = None, q0: float | None = None) -> RegionReport:
    """Zeros of F and G and the resulting growth interval in the saddle coordinate."""
    if datum is not None:
        p0, q0 = datum.p0, datum.q0
    p0 = -math.inf if p0 is None else p0
    q0 = math.inf if q0 is None else q0
    F = lambda s: float(F_exponent(kernel, s))  # noqa: E731
    lo = _left_point(kernel, F, 1.0)
    p_bar = _root(F, lo, 1.0, "p_bar")
    hi = _right_point(F, 2.0)
    q_bar = _root(F, 2.0, hi, "q_bar")

    s_bar_p0 = s_bar_q0 = None
    if math.isfinite(p0) and p_bar < p0 < 1:
        G = lambda s: float(G_exponent(kernel, p0, s))  # noqa: E731
        s_bar_p0 = _root(G, _left_point(kernel, G, p0), p0, "s_bar(p0)")
    if math.isfinite(q0) and 2 < q0 < q_bar:
        G = lambda s: float(G_exponent(kernel, q0, s))  # noqa: E731
        s_bar_q0 = _root(G, q0, _right_point(G, q0), "s_bar(q0)")
    s_left = s_bar_p0 if s_bar_p0 is not None else p_bar
    s_right = s_bar_q0 if s_bar_q0 is not None else q_bar
    slopes = (float(kernel.dK(s_left, 1)), float(kernel.dK(s_right, 1)))
    return RegionReport(p_bar, q_bar, s_bar_p0, s_bar_q0, (s_left, s_right), slopes, p0, q0)


@dataclass
class GrowthFragClass:
    label: str
    c: float
    thresholds: dict
    max_growth_ray: str | None = None
    smooth_data: bool = True
    caveat: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def classify_growth_frag(kernel: FragmentationKernel, datum: InitialDatum | None, c: float) -> GrowthFragClass:
    """Where x v(t, x) grows for the growth-fragmentation solution with rate c."""
    if not c > 0:
        raise DomainError("growth rate c must be positive")
    rep = region_report(kernel, datum)
    upper = -float(kernel.dK(rep.p_bar, 1))
    lower = -float(kernel.dK(rep.q_bar, 1))
    mid = -float(kernel.dK(1.0, 1))
    thresholds = {"minus_K1_p_bar": upper, "minus_K1_q_bar": lower, "minus_K1_at_1": mid}
    smooth = datum is None or (not math.isfinite(datum.p0) and not math.isfinite(datum.q0))
    caveat = "" if smooth else "datum has power tails; classification assumes smooth data"
    if c > upper:
        return GrowthFragClass("zone_to_infinity", c, thresholds, None, smooth, caveat)
    if c < lower:
        return GrowthFragClass("zone_to_zero", c, thresholds, None, smooth, caveat)
    ray = "toward_zero" if c + float(kernel.dK(1.0, 1)) < 0 else "toward_infinity"
    return GrowthFragClass("mixed", c, thresholds, ray, smooth, caveat)


@dataclass
class CriticalCurve:
    c: float
    s: float
    roots: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def critical_curve_slope(kernel: FragmentationKernel) -> CriticalCurve | None:
    """Slope c of the ray -log x = c t on which phi(s_+) vanishes, if any.

    Solves K(s) - s K'(s) = 0 over s > p1 after a geometric scan for sign
    changes; c = -K'(s).  The root with the largest c is reported first.
    """
    p1 = kernel.p1
    mags = np.logspace(-8, 3, 1200)
    if math.isfinite(p1):
        grid = p1 + mags
    else:
        grid = np.concatenate([-mags[::-1], [0.0], mags])
    h = lambda s: float(kernel.K(s) - s * kernel.dK(s, 1))  # noqa: E731
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.array([h(s) for s in grid])
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if not (np.isfinite(fa) and np.isfinite(fb)):
            continue
        if fa == 0:
            roots.append(float(a))
        elif np.sign(fa) != np.sign(fb):
            roots.append(float(brentq(h, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)))
    roots = [r for r in roots if -float(kernel.dK(r, 1)) > 0]
    if not roots:
        return None
    entries = [{"s": r, "c": -float(kernel.dK(r, 1))} for r in roots]
    entries.sort(key=lambda e: -e["c"])
    return CriticalCurve(entries[0]["c"], entries[0]["s"], entries)


def exponent_curves(kernel: FragmentationKernel, s_grid, p_values=()) -> dict:
    """F(s) and G(p, s) sampled on ``s_grid`` for plotting and CSV export."""
    s_grid = np.asarray(s_grid, dtype=float)
    out = {"s": s_grid, "F": np.asarray(F_exponent(kernel, s_grid), dtype=float)}
    for p in p_values:
        out[f"G_{p:g}"] = np.asarray(G_exponent(kernel, p, s_grid), dtype=float)
    return out
