"""Saddle points and long-time leading terms of u(t, x).

For 0 < x < 1 the phase phi(s) = -s log x + t K(s) is strictly convex on
(p1, inf) and has a unique critical point s_+ with K'(s_+) = log(x)/t.  The
position of s_+ relative to the Mellin strip (p0, q0) of the datum decides
which term dominates.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BoundaryRegimeWarning,
    BracketError,
    ConditionHError,
    DomainError,
    MissingTailError,
)
from .kernel import FragmentationKernel, condition_h
from .mellin import InitialDatum, _y_extent, mellin_u0

__all__ = [
    "SaddleData",
    "AsymptoticValue",
    "saddle_point",
    "phi_eval",
    "leading_term",
    "theorem3b_series",
    "poisson_approx",
    "error_scale",
]

T1 = "T1_large_x"
T2_LOWER = "T2_lower"
T2_UPPER = "T2_upper"
T3A = "T3a_bulk"
T3B = "T3b_oscillatory"


@dataclass(frozen=True)
class SaddleData:
    s_plus: float
    phi_at_saddle: float
    K2_at_saddle: float
    t: float
    x: float

    def to_dict(self) -> dict:
        return {"s_plus": self.s_plus, "phi": self.phi_at_saddle, "K2": self.K2_at_saddle, "t": self.t, "x": self.x}


@dataclass
class AsymptoticValue:
    value: float
    regime: str
    saddle: SaddleData | None = None
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"value": self.value, "regime": self.regime}
        if self.saddle is not None:
            d["saddle"] = self.saddle.to_dict()
        d.update(self.detail)
        return d


def _solve_increasing(f, df, target, lo, hi, tol=1e-14, maxiter=200):
    """Root of the increasing f - target on [lo, hi]: Newton steps kept inside a shrinking bracket."""
    s = 2.0 if lo < 2.0 < hi else 0.5 * (lo + hi)
    for _ in range(maxiter):
        r = f(s) - target
        if r == 0:
            return s
        if r > 0:
            hi = s
        else:
            lo = s
        d = df(s)
        step = s - r / d if d > 0 else math.nan
        s_new = step if lo < step < hi else 0.5 * (lo + hi)
        if abs(s_new - s) <= tol * max(1.0, abs(s)):
            return s_new
        s = s_new
    return s


def saddle_point(kernel: FragmentationKernel, t: float, x: float) -> SaddleData:
    """s_+ with K'(s_+) = log(x)/t for 0 < x < 1."""
    if not (t > 0 and 0 < x < 1):
        raise DomainError(f"saddle point needs t > 0 and 0 < x < 1, got t={t}, x={x}")
    target = math.log(x) / t
    k1 = lambda s: float(kernel.dK(s, 1))  # noqa: E731
    k2 = lambda s: float(kernel.dK(s, 2))  # noqa: E731
    hi = 2.0
    for _ in range(200):
        if k1(hi) > target:
            break
        hi = 2 * hi
    else:
        raise BracketError(f"K' stays below {target:.3g} on (2, {hi:g})")
    p1 = kernel.p1
    lo = 2.0
    for k in range(1, 200):
        lo = p1 + (2.0 - p1) * 0.5**k if math.isfinite(p1) else 2.0 - 2.0**k
        try:
            if k1(lo) < target:
                break
        except (DomainError, OverflowError, ZeroDivisionError):
            raise BracketError("left bracket for s_+ reached p1") from None
    else:
        raise BracketError(f"K' stays above {target:.3g} down to p1 = {p1}; inconsistent p1")
    s = _solve_increasing(k1, k2, target, lo, hi)
    return SaddleData(s, phi_eval(kernel, s, t, x), k2(s), t, x)


def phi_eval(kernel: FragmentationKernel, s, t: float, x: float):
    """phi(s, t, x) = -s log x + t K(s)."""
    return -s * math.log(x) + t * kernel.K(s)


def error_scale(t: float) -> float:
    """Width eps(t) = t^(-1/3) of the saddle neighbourhood; eps -> 0 while t eps^2 -> inf."""
    return t ** (-1.0 / 3.0)


def _bulk_prefactor(kernel, sd: SaddleData) -> float:
    return math.exp(-sd.s_plus * math.log(sd.x) + (float(kernel.K(sd.s_plus)) - 1) * sd.t) / math.sqrt(
        2 * math.pi * sd.t * sd.K2_at_saddle
    )


def _is_condition_h(kernel) -> bool:
    return kernel.is_discrete and bool(kernel.atoms) and condition_h(kernel.atoms).satisfied


def leading_term(datum: InitialDatum, kernel: FragmentationKernel, t: float, x: float) -> AsymptoticValue:
    """Dominant long-time term of u(t, x), with the regime that produced it."""
    if not (t > 0 and x > 0):
        raise DomainError(f"need t > 0 and x > 0, got t={t}, x={x}")
    up, low = datum.upper_tail, datum.lower_tail
    if x >= 1:
        if up is None:
            raise MissingTailError("x >= 1 needs the upper tail (a0, q0) of the datum")
        return AsymptoticValue(up.a0 * x ** (-up.q0) * math.exp((float(kernel.K(up.q0)) - 1) * t), T1)
    sd = saddle_point(kernel, t, x)
    s = sd.s_plus
    if s > datum.q0:
        if up is None:
            raise MissingTailError("saddle beyond q0 needs the upper tail (a0, q0)")
        val = up.a0 * x ** (-up.q0) * math.exp((float(kernel.K(up.q0)) - 1) * t)
        return AsymptoticValue(val, T2_UPPER, sd)
    if s < datum.p0:
        if low is None:
            raise MissingTailError("saddle below p0 needs the lower tail (b0, p0)")
        val = low.b0 * x ** (-low.p0) * math.exp((float(kernel.K(low.p0)) - 1) * t)
        return AsymptoticValue(val, T2_LOWER, sd)
    if s in (datum.p0, datum.q0):
        warnings.warn("saddle sits on the strip boundary; bulk formula used", BoundaryRegimeWarning, stacklevel=2)
        U = float(np.real(mellin_u0(datum, s + 1e-12 if s == datum.p0 else s - 1e-12)))
    else:
        U = float(np.real(mellin_u0(datum, s)))
    if _is_condition_h(kernel):
        warnings.warn("kernel satisfies Condition H; theorem3b_series carries the oscillating terms",
                      UserWarning, stacklevel=2)
    return AsymptoticValue(_bulk_prefactor(kernel, sd) * U, T3A, sd)


def _condition_h_kernel(kernel):
    if not kernel.is_discrete or not kernel.atoms:
        raise ConditionHError("oscillatory series needs a purely atomic kernel")
    res = condition_h(kernel.atoms)
    if not res.satisfied:
        raise ConditionHError("kernel fails Condition H: " + res.certificate)
    return res


def theorem3b_series(datum: InitialDatum, kernel: FragmentationKernel, t: float, x: float,
                     k_max: int | None = None, rtol: float = 1e-10, k_cap: int = 1 << 14) -> AsymptoticValue:
    """Bulk asymptotics with the log-periodic modes s_k = s_+ + i k v* included.

    ``k_max=None`` starts at 50 and doubles until the estimated truncation
    tail falls below ``rtol`` relative to the sum.
    """
    res = _condition_h_kernel(kernel)
    sd = saddle_point(kernel, t, x)
    s = sd.s_plus
    if not datum.p0 < s < datum.q0:
        raise DomainError(f"s_+ = {s:.6g} outside the strip ({datum.p0}, {datum.q0})")
    vstar = res.v_star
    phase = -vstar * math.log(x)

    def partial(n):
        if n == 0:
            return float(np.real(mellin_u0(datum, s))), 0.0
        k = np.arange(1, n + 1)
        U = mellin_u0(datum, s + 1j * k * vstar)
        total = float(np.real(mellin_u0(datum, s))) + 2 * float(np.sum(np.real(U * np.exp(1j * k * phase))))
        # |U0(s_k)| <= C / |v_k|^2 with C fitted on the last retained mode
        c_fit = float(abs(U[-1])) * (n * vstar) ** 2
        tail = 2 * c_fit / (vstar**2 * n)
        return total, tail

    if k_max is None:
        n = 50
        total, tail = partial(n)
        while tail > rtol * abs(total) and 2 * n <= k_cap:
            n *= 2
            total, tail = partial(n)
    else:
        if k_max < 0:
            raise DomainError("k_max must be >= 0")
        n = k_max
        total, tail = partial(n)
    pref = _bulk_prefactor(kernel, sd)
    return AsymptoticValue(pref * total, T3B, sd,
                           {"k_max": n, "tail_bound": pref * tail, "theta": res.theta, "v_star": vstar})


def poisson_approx(datum: InitialDatum, theta: float, kernel: FragmentationKernel, t: float, x: float) -> float:
    """Poisson-summed form: |log theta| e^((K(s+)-1)t) / sqrt(2 pi t K'') * sum_n u0(theta^n x) theta^(n s+)."""
    if not 0 < theta < 1:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    res = _condition_h_kernel(kernel)
    if abs(res.theta - theta) > 1e-9:
        raise ConditionHError(f"kernel base is {res.theta:.12g}, not {theta:.12g}")
    sd = saddle_point(kernel, t, x)
    s = sd.s_plus
    if not datum.p0 < s < datum.q0:
        raise DomainError(f"s_+ = {s:.6g} outside the strip ({datum.p0}, {datum.q0})")
    lt, lx = math.log(theta), math.log(x)
    ya, yb = _y_extent(datum, s, s)
    if yb <= ya:
        return 0.0
    # y_n = log x + n log(theta) must fall in [ya, yb]
    n_lo = math.floor((yb - lx) / lt)
    n_hi = math.ceil((ya - lx) / lt)
    n = np.arange(n_lo, n_hi + 1)
    xn = x * theta**n
    terms = datum(xn) * np.exp(n * lt * s)
    total = 0.0
    for term in terms[np.argsort(-np.abs(terms))]:
        if total and abs(term) < 1e-16 * abs(total):
            break
        total += term
    pref = math.exp((float(kernel.K(s)) - 1) * t) / math.sqrt(2 * math.pi * t * sd.K2_at_saddle)
    return abs(lt) * pref * float(total)
