"""Initial data, their Mellin transforms, and inversion of the exact solution.

In Mellin variables the fragmentation equation is diagonal,

    U(t, s) = U0(s) exp((K(s) - 1) t),

so u(t, x) is recovered by integrating along a vertical line Re(s) = nu
inside the strip (p0, q0) where U0 is analytic.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import (
    ConditioningWarning,
    ConvergenceError,
    DomainError,
    PoleError,
    QuadratureError,
    SmoothnessWarning,
)
from .kernel import FragmentationKernel

__all__ = [
    "UpperTail",
    "LowerTail",
    "InitialDatum",
    "ContourConfig",
    "InversionResult",
    "log_gaussian",
    "two_sided_power",
    "indicator",
    "compact_bump",
    "tabulated_datum",
    "custom_datum",
    "mellin_u0",
    "meromorphic_extension",
    "laurent_coefficient",
    "fragmentation_operator",
    "inverse_mellin_u",
    "inverse_mellin_detail",
    "check_datum",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


@dataclass(frozen=True)
class UpperTail:
    """u0(x) = a0 x^(-q0) + O(x^(-r)) as x -> infinity."""

    a0: float
    q0: float
    r: float = math.inf


@dataclass(frozen=True)
class LowerTail:
    """u0(x) = b0 x^(-p0) + O(x^(-rho)) as x -> 0."""

    b0: float
    p0: float
    rho: float = -math.inf


@dataclass(frozen=True, eq=False)
class InitialDatum:
    """Nonnegative initial condition u0 with its Mellin strip.

    ``breakpoints`` lists sizes where u0 or a derivative jumps; quadratures
    split there.  ``support`` bounds the set where u0 may be nonzero.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    p0: float
    q0: float
    upper_tail: UpperTail | None = None
    lower_tail: LowerTail | None = None
    closed_form_mellin: Callable[[np.ndarray], np.ndarray] | None = None
    support: tuple[float, float] = (0.0, math.inf)
    breakpoints: tuple[float, ...] = ()
    form: str = "custom"
    params: dict = field(default_factory=dict)
    smooth: bool = True
    mass: float = field(init=False)

    def __post_init__(self):
        if not self.p0 < self.q0:
            raise DomainError(f"empty Mellin strip ({self.p0}, {self.q0})")
        if not (self.p0 < 1 and self.q0 > 2):
            raise DomainError(f"strip ({self.p0}, {self.q0}) must contain [1, 2] for int u0 (1+x) dx < inf")
        if self.upper_tail and not (self.upper_tail.a0 > 0 and self.upper_tail.r > self.upper_tail.q0):
            raise DomainError("upper tail needs a0 > 0 and r > q0")
        if self.lower_tail and not (self.lower_tail.b0 > 0 and self.lower_tail.rho < self.lower_tail.p0):
            raise DomainError("lower tail needs b0 > 0 and rho < p0")
        object.__setattr__(self, "mass", float(np.real(mellin_u0(self, 2.0))))

    def __call__(self, x):
        return self.evaluate(np.asarray(x, dtype=float))

    def mellin(self, s):
        return mellin_u0(self, s)

    def describe(self) -> dict:
        d = {"form": self.form, "params": dict(self.params)}
        tails = {}
        if self.upper_tail:
            tails["upper"] = {"a0": self.upper_tail.a0, "q0": self.upper_tail.q0, "r": self.upper_tail.r}
        if self.lower_tail:
            tails["lower"] = {"b0": self.lower_tail.b0, "p0": self.lower_tail.p0, "rho": self.lower_tail.rho}
        if tails:
            d["tails"] = tails
        return d


# -- factories ----------------------------------------------------------------


def log_gaussian(y0: float = -5.0, amplitude: float = 1.0) -> InitialDatum:
    """u0(x) = A exp(-(log x - y0)^2 / 2); U0(s) = A sqrt(2 pi) exp(s y0 + s^2 / 2)."""

    def ev(x):
        with np.errstate(divide="ignore"):
            return amplitude * np.exp(-0.5 * (np.log(x) - y0) ** 2)

    def mel(s):
        return amplitude * math.sqrt(2 * math.pi) * np.exp(s * y0 + 0.5 * s * s)

    return InitialDatum(ev, -math.inf, math.inf, closed_form_mellin=mel, form="log_gaussian",
                        params={"y0": y0, "amplitude": amplitude})


def two_sided_power(p0: float = 0.0, q0: float = 3.0, a0: float = 1.0, b0: float = 1.0) -> InitialDatum:
    """u0 = b0 x^(-p0) on (0, 1], a0 x^(-q0) on (1, inf); both tails exact."""

    def ev(x):
        x = np.asarray(x, dtype=float)
        safe = np.where(x > 0, x, 1.0)
        return np.where(x <= 1, b0 * safe ** (-p0), a0 * safe ** (-q0)) * (x > 0)

    def mel(s):
        return b0 / (s - p0) + a0 / (q0 - s)

    return InitialDatum(ev, p0, q0, UpperTail(a0, q0), LowerTail(b0, p0), mel, breakpoints=(1.0,),
                        form="two_sided_power", params={"p0": p0, "q0": q0, "a0": a0, "b0": b0},
                        smooth=a0 == b0)


def indicator(lo: float = 0.0, hi: float = 1.0) -> InitialDatum:
    """Indicator of (lo, hi)."""
    if not 0 <= lo < hi < math.inf:
        raise DomainError(f"indicator needs 0 <= lo < hi < inf, got ({lo}, {hi})")

    def ev(x):
        x = np.asarray(x, dtype=float)
        return ((x > lo) & (x < hi)).astype(float)

    if lo == 0:

        def mel(s):
            return np.exp(s * math.log(hi)) / s

        return InitialDatum(ev, 0.0, math.inf, lower_tail=LowerTail(1.0, 0.0), closed_form_mellin=mel,
                            support=(0.0, hi), breakpoints=(hi,), form="indicator",
                            params={"lo": lo, "hi": hi}, smooth=False)
    width = math.log(hi / lo)

    def mel(s):
        s = np.asarray(s, dtype=complex)
        safe = np.where(s == 0, 1.0, s)
        return np.where(s == 0, width, np.exp(s * math.log(lo)) * np.expm1(s * width) / safe)

    return InitialDatum(ev, -math.inf, math.inf, closed_form_mellin=mel, support=(lo, hi),
                        breakpoints=(lo, hi), form="indicator", params={"lo": lo, "hi": hi}, smooth=False)


def compact_bump(center: float = 1.0, width: float = 1.0) -> InitialDatum:
    """Smooth bump exp(-1/(1 - xi^2)), xi = log(x/center)/width, supported in one log-window."""
    if not (center > 0 and width > 0):
        raise DomainError("bump needs center > 0 and width > 0")
    lc = math.log(center)

    def ev(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = (np.log(np.where(x > 0, x, 1e-300)) - lc) / width
            inside = np.abs(xi) < 1
            return np.where(inside, np.exp(-1.0 / np.where(inside, 1 - xi * xi, 1.0)), 0.0)

    lo, hi = center * math.exp(-width), center * math.exp(width)
    return InitialDatum(ev, -math.inf, math.inf, support=(lo, hi), breakpoints=(lo, hi),
                        form="compact_bump", params={"center": center, "width": width})


def tabulated_datum(x: Sequence[float], values: Sequence[float]) -> InitialDatum:
    """Piecewise-linear datum through the given nodes, zero outside them."""
    xs = np.asarray(x, dtype=float)
    vs = np.asarray(values, dtype=float)
    if xs.ndim != 1 or xs.shape != vs.shape or xs.size < 2 or np.any(np.diff(xs) <= 0) or xs[0] <= 0:
        raise DomainError("tabulated datum needs increasing positive nodes with matching values")
    if np.any(vs < 0):
        raise DomainError("tabulated datum values must be nonnegative")

    def ev(z):
        return np.interp(z, xs, vs, left=0.0, right=0.0)

    return InitialDatum(ev, -math.inf, math.inf, support=(xs[0], xs[-1]), breakpoints=tuple(xs),
                        form="tabulated", params={"x": xs.tolist(), "values": vs.tolist()}, smooth=False)


def custom_datum(func, p0=-math.inf, q0=math.inf, **kw) -> InitialDatum:
    return InitialDatum(func, p0, q0, **kw)


# -- forward transform ----------------------------------------------------------


def _y_extent(datum: InitialDatum, re_lo: float, re_hi: float, g=None, ya=None, yb=None) -> tuple[float, float]:
    """Window in y = log x outside which x^s u0 is below 1e-18 of its peak."""
    g = g or (lambda x: datum(x))
    ylo = math.log(datum.support[0]) if datum.support[0] > 0 else -745.0
    yhi = math.log(datum.support[1]) if math.isfinite(datum.support[1]) else 709.0
    ylo = ylo if ya is None else max(ylo, ya)
    yhi = yhi if yb is None else min(yhi, yb)
    if yhi <= ylo:
        return 0.0, 0.0
    y = np.linspace(ylo, yhi, 8001)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        vals = np.abs(g(np.exp(y)))
        logv = np.where(vals > 0, np.log(np.where(vals > 0, vals, 1.0)), -np.inf)
        mag = np.maximum(logv + re_lo * y, logv + re_hi * y)
    if not np.any(mag > -np.inf):
        return 0.0, 0.0
    keep = np.nonzero(mag > np.max(mag) - 41.5)[0]
    step = y[1] - y[0]
    a = max(ylo, y[keep[0]] - step)
    b = min(yhi, y[keep[-1]] + step)
    return a, b


def _panel_quad(g, s: np.ndarray, ya: float, yb: float, cuts: Sequence[float], tol: float = 1e-10,
                max_panels: int = 1 << 16) -> np.ndarray:
    """int_{ya}^{yb} exp(s y) g(exp(y)) dy by composite Gauss-Legendre, panel count doubled to converge.

    Panels never straddle ``cuts`` and are no wider than one period of the
    fastest oscillation exp(i Im(s) y) in the batch.
    """
    s = np.asarray(s, dtype=complex)
    if yb <= ya:
        return np.zeros_like(s)
    edges = sorted({ya, yb, *[c for c in cuts if ya < c < yb]})
    vmax = float(np.max(np.abs(s.imag))) if s.size else 0.0
    hmax = min(1.0, 2 * math.pi / vmax) if vmax > 0 else 1.0
    per = [max(1, math.ceil((b - a) / hmax)) for a, b in zip(edges[:-1], edges[1:])]

    def run(mult):
        nodes, weights = [], []
        for (a, b), m in zip(zip(edges[:-1], edges[1:]), per):
            m *= mult
            grid = np.linspace(a, b, m + 1)
            half = 0.5 * np.diff(grid)
            mid = 0.5 * (grid[1:] + grid[:-1])
            nodes.append((mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel())
            weights.append((half[:, None] * _GL_WEIGHTS[None, :]).ravel())
        yq = np.concatenate(nodes)
        wq = np.concatenate(weights) * g(np.exp(yq))
        out = np.empty(s.shape, dtype=complex)
        flat = s.ravel()
        res = out.reshape(-1)
        scale = np.empty(flat.shape)
        chunk = max(1, 4_000_000 // yq.size)
        for i in range(0, flat.size, chunk):
            e = np.exp(np.outer(flat[i:i + chunk], yq))
            res[i:i + chunk] = e @ wq
            scale[i:i + chunk] = np.abs(e) @ np.abs(wq)
        return out, scale.reshape(s.shape)

    mult = 1
    prev, _ = run(mult)
    while True:
        mult *= 2
        if sum(per) * mult > max_panels:
            raise QuadratureError(f"Mellin quadrature did not converge within {max_panels} panels")
        cur, scale = run(mult)
        if np.all(np.abs(cur - prev) <= tol * np.maximum(scale, 1e-300)):
            return cur
        prev = cur


def _quad_mellin(datum: InitialDatum, s, g=None, ya=None, yb=None) -> np.ndarray:
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    lo, hi = _y_extent(datum, float(np.min(s.real)), float(np.max(s.real)), g, ya, yb)
    cuts = [math.log(b) for b in datum.breakpoints if b > 0]
    return _panel_quad(g or datum.evaluate, s, lo, hi, cuts)


def _in_strip(datum: InitialDatum, s) -> None:
    re = np.real(s)
    if np.any(re <= datum.p0) or np.any(re >= datum.q0):
        raise DomainError(f"Re(s) outside the Mellin strip ({datum.p0}, {datum.q0})")


def mellin_u0(datum: InitialDatum, s, use_closed_form: bool = True):
    """U0(s) = int_0^inf x^(s-1) u0(x) dx inside the strip."""
    scalar = np.ndim(s) == 0
    s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
    _in_strip(datum, s_arr)
    if use_closed_form and datum.closed_form_mellin is not None:
        out = np.asarray(datum.closed_form_mellin(s_arr), dtype=complex)
    else:
        out = _quad_mellin(datum, s_arr)
    return out[0] if scalar else out


def meromorphic_extension(datum: InitialDatum, s):
    """U0 continued past q0 (up to r) or past p0 (down to rho) using the tail expansion.

    Upper:  int_0^1 x^(s-1) u0 dx - a0/(s - q0) + int_1^inf x^(s-1) (u0 - a0 x^-q0) dx
    Lower:  int_0^1 x^(s-1) (u0 - b0 x^-p0) dx + b0/(s - p0) + int_1^inf x^(s-1) u0 dx
    The pole at q0 has residue -a0, the one at p0 residue +b0.
    """
    scalar = np.ndim(s) == 0
    s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
    re = s_arr.real
    up, low = datum.upper_tail, datum.lower_tail
    if up and np.all((re > up.q0 - 1e-300) & (re < up.r)) and np.all(re > datum.p0):
        if np.any(np.abs(s_arr - up.q0) < 1e-8):
            raise PoleError(f"s within 1e-8 of the pole q0 = {up.q0}")
        head = _quad_mellin(datum, s_arr, yb=0.0)
        diff = lambda x: datum(x) - up.a0 * x ** (-up.q0)  # noqa: E731
        tail = _quad_mellin(datum, s_arr, g=diff, ya=0.0)
        out = head - up.a0 / (s_arr - up.q0) + tail
    elif low and np.all((re < low.p0) & (re > low.rho)) and np.all(re < datum.q0):
        if np.any(np.abs(s_arr - low.p0) < 1e-8):
            raise PoleError(f"s within 1e-8 of the pole p0 = {low.p0}")
        diff = lambda x: datum(x) - low.b0 * x ** (-low.p0)  # noqa: E731
        head = _quad_mellin(datum, s_arr, g=diff, yb=0.0)
        tail = _quad_mellin(datum, s_arr, ya=0.0)
        out = head + low.b0 / (s_arr - low.p0) + tail
    else:
        raise DomainError("extension needs tail data and q0 < Re(s) < r or rho < Re(s) < p0")
    return out[0] if scalar else out


def laurent_coefficient(datum: InitialDatum, pole: str = "upper", eps: float = 1e-6) -> float:
    """Numerical (s - pole) * U0(s) limit from the extended side."""
    if pole == "upper":
        s0 = datum.upper_tail.q0
        return float(np.real(eps * meromorphic_extension(datum, s0 + eps)))
    s0 = datum.lower_tail.p0
    return float(np.real(-eps * meromorphic_extension(datum, s0 - eps)))


# -- inverse transform ------------------------------------------------------------


@dataclass(frozen=True)
class ContourConfig:
    nu: float
    half_height: float
    nodes: int = 1024
    rule: str = "trapezoid"

    def __post_init__(self):
        if not self.half_height > 0 or self.nodes < 64:
            raise DomainError("contour needs V > 0 and at least 64 nodes")
        if self.rule not in ("trapezoid", "gauss-legendre"):
            raise DomainError(f"unknown rule {self.rule!r}")


@dataclass
class InversionResult:
    value: float
    imag_residue: float
    nu: float
    half_height: float
    nodes: int
    subtracted: float


def fragmentation_operator(kernel: FragmentationKernel, func, x: float, breakpoints=(), upper: float = 700.0) -> float:
    """(L f)(x) = int_x^inf (1/y) k0(x/y) f(y) dy, written as int_0^inf k0(e^-z) f(x e^z) dz plus atoms.

    ``upper`` is log of the size beyond which f is negligible.
    """
    total = sum(a / sg * float(func(np.asarray(x / sg))) for sg, a in kernel.atoms)
    if kernel.density is not None:
        lx = math.log(x)
        zmax = upper - lx
        if zmax <= 0:
            return total
        pts = sorted({math.log(b) - lx for b in breakpoints if x < b < math.exp(upper)})
        integrand = lambda z: float(kernel.density_at(math.exp(-z)) * func(np.asarray(x * math.exp(z))))  # noqa: E731
        edges = [0.0, *pts, zmax]
        for a, b in zip(edges[:-1], edges[1:]):
            val, _ = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=1e-12, limit=400)
            total += val
    return total


def _choose_nu(datum, kernel, t, x, U0):
    lo = max(datum.p0, kernel.p1)
    hi = datum.q0
    # margins of 5% of the strip width; an open end only gets a fixed search range
    delta = 0.05 * (hi - lo) if math.isfinite(hi - lo) else 0.05
    if not math.isfinite(lo):
        lo = -40.0 if not math.isfinite(hi) else hi - 40.0
    if not math.isfinite(hi):
        hi = lo + 40.0 if lo > -40.0 else 40.0
    lx = math.log(x)

    def obj(nu):
        val = float(np.real(U0(nu)))
        if not val > 0:
            return math.inf
        return math.log(val) + t * (float(kernel.K(nu)) - 1) - nu * lx

    res = optimize.minimize_scalar(obj, bounds=(lo + delta, hi - delta), method="bounded",
                                   options={"xatol": 1e-6})
    return float(res.x)


def inverse_mellin_detail(datum: InitialDatum, kernel: FragmentationKernel, t: float, x: float,
                          config: ContourConfig | None = None, nu: float | None = None,
                          rtol: float = 1e-9, max_nodes: int = 1 << 20) -> InversionResult:
    """Contour evaluation of u(t, x) with full diagnostics.

    The parts of the solution known in closed form are removed before
    integrating: e^(-t) u0(x) always, and e^(-t) t (L u0)(x) when the kernel
    is a pure density (then K(s) -> 0 and the remaining integrand decays two
    orders faster along the line).
    """
    if t < 0 or not x > 0:
        raise DomainError(f"need t >= 0 and x > 0, got t={t}, x={x}")
    u0x = float(datum(np.asarray(x)))
    if t == 0:
        return InversionResult(u0x, 0.0, math.nan, 0.0, 0, u0x)
    if not datum.smooth:
        warnings.warn("datum is not smooth; contour integral may converge slowly", SmoothnessWarning,
                      stacklevel=2)
    U0 = datum.closed_form_mellin or (lambda s: mellin_u0(datum, s))
    second = kernel.density is not None and not kernel.atoms
    subtracted = math.exp(-t) * u0x
    if second:
        subtracted += math.exp(-t) * t * fragmentation_operator(kernel, datum, x, datum.breakpoints,
                                                              _y_extent(datum, 0.0, 0.0)[1])
    if config is not None:
        nu = config.nu
    elif nu is None:
        nu = _choose_nu(datum, kernel, t, x, U0)
    if not (max(datum.p0, kernel.p1) < nu < datum.q0):
        raise DomainError(f"abscissa {nu} outside ({max(datum.p0, kernel.p1)}, {datum.q0})")
    lx = math.log(x)

    def f(v):
        s = nu + 1j * np.asarray(v, dtype=float)
        kt = kernel.K(s) * t
        core = np.expm1(kt) - kt if second else np.expm1(kt)
        return np.asarray(U0(s)) * core * np.exp(-t - s * lx) / (2 * math.pi)

    def trapezoid(V, n):
        v = np.linspace(-V, V, n + 1)
        w = np.full(n + 1, 2 * V / n)
        w[0] = w[-1] = V / n
        return np.sum(w * f(v))

    def gauss(V, n):
        panels = max(1, n // 20)
        grid = np.linspace(-V, V, panels + 1)
        half = 0.5 * np.diff(grid)[:, None]
        mid = 0.5 * (grid[1:] + grid[:-1])[:, None]
        return np.sum((half * _GL_WEIGHTS) * f(mid + half * _GL_NODES))

    if config is not None:
        rule = trapezoid if config.rule == "trapezoid" else gauss
        val = rule(config.half_height, config.nodes)
        return _finish(val, subtracted, nu, config.half_height, config.nodes)

    f0 = abs(complex(f(0.0)))
    if f0 == 0:
        return InversionResult(subtracted, 0.0, nu, 0.0, 0, subtracted)
    V = 4.0
    while True:
        probe = np.abs(f(np.linspace(V, 2 * V, 33)))
        probe_neg = np.abs(f(-np.linspace(V, 2 * V, 33)))
        if max(probe.max(), probe_neg.max()) <= 1e-14 * f0:
            break
        V *= 2
        if V > 1e8:
            raise ConvergenceError("integrand does not decay along the contour")
    n = 512
    prev = trapezoid(V, n)
    while True:
        n *= 2
        if n > max_nodes:
            raise ConvergenceError(f"contour quadrature needs more than {max_nodes} nodes (V={V:g})")
        cur = trapezoid(V, n)
        total = abs(cur.real + subtracted)
        if abs(cur - prev) <= rtol * max(total, 1e-300):
            return _finish(cur, subtracted, nu, V, n)
        prev = cur


def _finish(val, subtracted, nu, V, n) -> InversionResult:
    value = float(val.real) + subtracted
    resid = abs(float(val.imag))
    if resid > 1e-6 * abs(value) and resid > 1e-300:
        warnings.warn(f"imaginary residue {resid:.3g} relative to value {value:.3g}", ConditioningWarning,
                      stacklevel=3)
    return InversionResult(value, resid, nu, V, n, subtracted)


def inverse_mellin_u(datum: InitialDatum, kernel: FragmentationKernel, t: float, x: float,
                     config: ContourConfig | None = None, nu: float | None = None) -> float:
    """u(t, x) from the inverse Mellin integral."""
    return inverse_mellin_detail(datum, kernel, t, x, config=config, nu=nu).value


# -- validation -------------------------------------------------------------------


def check_datum(datum: InitialDatum) -> dict:
    """Measured datum invariants (nonnegativity, integrability, tails, closed form)."""
    out = {}
    xs = np.logspace(-8, 8, 1601)
    vals = datum(xs)
    out["nonnegative"] = bool(np.all(vals >= 0))
    out["mass"] = datum.mass
    out["integrable"] = bool(np.isfinite(datum.mass) and np.isfinite(np.real(mellin_u0(datum, 1.0))))
    if datum.upper_tail:
        up = datum.upper_tail
        pts = np.array([10.0, 100.0, 1000.0])
        r = up.r if math.isfinite(up.r) else up.q0 + 1
        c = np.abs(datum(pts) - up.a0 * pts ** (-up.q0)) * pts**r
        out["upper_tail_constants"] = c.tolist()
        out["upper_tail_ok"] = bool(c[-1] <= 10 * c[0] + 1e-12)
    if datum.lower_tail:
        low = datum.lower_tail
        pts = np.array([0.1, 0.01, 0.001])
        rho = low.rho if math.isfinite(low.rho) else low.p0 - 1
        c = np.abs(datum(pts) - low.b0 * pts ** (-low.p0)) * pts**rho
        out["lower_tail_constants"] = c.tolist()
        out["lower_tail_ok"] = bool(c[-1] <= 10 * c[0] + 1e-12)
    if datum.closed_form_mellin is not None:
        lo = datum.p0 if math.isfinite(datum.p0) else -2.0
        hi = datum.q0 if math.isfinite(datum.q0) else 5.0
        re = lo + (hi - lo) * np.array([0.2, 0.35, 0.5, 0.65, 0.8])
        s = re + 1j * np.array([0.0, 0.7, -1.3, 2.1, -0.4])
        exact = np.asarray(datum.closed_form_mellin(s))
        quad = mellin_u0(datum, s, use_closed_form=False)
        rel = float(np.max(np.abs(quad - exact) / np.abs(exact)))
        out["closed_form_rel_error"] = rel
        out["closed_form_ok"] = rel <= 1e-8
    return out
