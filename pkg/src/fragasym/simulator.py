"""Direct solvers in the log variable y = log x, and diagnostics built on them.

With n(t, y) = u(t, e^y) the fragmentation equation reads

    dn/dt + n = int_0^inf kappa0(z) n(t, y + z) dz,   kappa0(z) = k0(e^-z),

where an atom of weight a at sigma contributes (a / sigma) n(t, y - log sigma).
Information only travels toward smaller y, so values on the grid never
depend on what happens below y_min.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, interpolate, signal, stats

from .errors import ContractionError, DomainError, RangeError, StabilityError, SupportOverflowWarning
from .kernel import FragmentationKernel, PowerDensity
from .mellin import InitialDatum, inverse_mellin_u, mellin_u0

__all__ = [
    "LogGridOperator",
    "LogGridSolution",
    "DiagnosticsReport",
    "ProfileReport",
    "simulate_log_grid",
    "picard_solve",
    "dirac_diagnostics",
    "rescaled_profiles",
    "exact_profile_moments",
    "growth_frag_transform",
    "mellin_evaluator",
    "grid_evaluator",
    "support_boundaries",
    "self_similar_residual",
]

# end weights of the fourth-order Gregory rule
_GREGORY = np.array([3 / 8, 7 / 6, 23 / 24])


class LogGridOperator:
    """Fragmentation gain term on a uniform y-grid, with zero values above the grid."""

    def __init__(self, kernel: FragmentationKernel, y: np.ndarray):
        self.kernel = kernel
        self.y = np.asarray(y, dtype=float)
        self.N = self.y.size
        self.dy = float(self.y[1] - self.y[0])
        self._atoms = []
        for sigma, weight in kernel.atoms:
            m = -math.log(sigma) / self.dy
            mi = round(m)
            if abs(m - mi) < 1e-9:
                self._atoms.append((weight / sigma, mi, None))
            else:
                m0 = math.floor(m)
                th = m - m0
                w = np.array([
                    -th * (th - 1) * (th - 2) / 6,
                    (th + 1) * (th - 1) * (th - 2) / 2,
                    -(th + 1) * th * (th - 2) / 2,
                    (th + 1) * th * (th - 1) / 6,
                ])
                self._atoms.append((weight / sigma, m0, w))
        self._ratio = None
        self._kappa = None
        dens = kernel.density
        if isinstance(dens, PowerDensity):
            self._coef = dens.weight * (dens.a + 2)
            self._ratio = math.exp(-dens.a * self.dy)
            self._kappa = self._coef * self._ratio ** np.arange(3)
        elif dens is not None:
            z = self.dy * np.arange(self.N)
            self._kappa = np.asarray(dens(np.exp(-z)), dtype=float)

    def _shift(self, n, m):
        out = np.zeros_like(n)
        if m < self.N:
            out[: self.N - m] = n[m:]
        return out

    def apply(self, n: np.ndarray) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        out = np.zeros_like(n)
        for coef, m0, w in self._atoms:
            if w is None:
                out += coef * self._shift(n, m0)
            else:
                padded = np.concatenate([[0.0], n, np.zeros(m0 + 3)])
                acc = np.zeros_like(n)
                for k in range(4):
                    start = 1 + m0 + k - 1
                    acc += w[k] * padded[start:start + self.N]
                out += coef * acc
        if self._kappa is not None:
            if self._ratio is not None:
                total = signal.lfilter([1.0], [1.0, -self._ratio], n[::-1])[::-1] * self._coef
            else:
                total = signal.fftconvolve(n, self._kappa[::-1], mode="full")[self.N - 1:]
            corr = sum((_GREGORY[k] - 1) * self._kappa[k] * self._shift(n, k) for k in range(3))
            out += self.dy * (total + corr)
        return out

    __call__ = apply


@dataclass
class LogGridSolution:
    y: np.ndarray
    times: np.ndarray
    values: np.ndarray
    mass_times: np.ndarray
    mass: np.ndarray
    leak: np.ndarray
    dt: float
    dy: float
    integrator: str = "rk4"
    overflow_time: float | None = None

    def snapshot(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise RangeError(f"no snapshot at t={t}; stored times span {self.times[0]}..{self.times[-1]}")
        return self.values[i]

    def relative_mass_drift(self) -> np.ndarray:
        return np.abs(self.mass - self.mass[0]) / self.mass[0]


def _mass(y, n):
    return float(integrate.trapezoid(np.exp(2 * y) * n, y))


def _leak_rate(kernel, y, n):
    return float(integrate.trapezoid(np.exp(2 * y) * n * kernel.first_moment_cdf(np.exp(y[0] - y)), y))


def simulate_log_grid(kernel: FragmentationKernel, datum: InitialDatum | None, y_min: float, y_max: float,
                      dy: float, dt: float, t_end: float, n_snapshots: int = 81,
                      initial: np.ndarray | None = None) -> LogGridSolution:
    """Method of lines on a uniform y-grid with classical RK4 in time."""
    if not (y_max > y_min and dy > 0 and dt > 0 and t_end >= 0):
        raise DomainError("need y_max > y_min, dy > 0, dt > 0, t_end >= 0")
    k1 = float(kernel.K(1.0))
    if dt * (k1 + 1) > 0.5:
        raise StabilityError(f"dt (K(1) + 1) = {dt * (k1 + 1):.3g} exceeds 0.5")
    N = int(round((y_max - y_min) / dy)) + 1
    y = y_min + dy * np.arange(N)
    if initial is not None:
        n = np.array(initial, dtype=float)
        if n.shape != y.shape:
            raise DomainError(f"initial field has shape {n.shape}, grid has {y.shape}")
    else:
        n = np.asarray(datum(np.exp(y)), dtype=float)
        peak = float(np.max(n)) if n.size else 0.0
        if peak > 0 and n[-1] > 1e-12 * peak:
            warnings.warn("datum is not negligible at y_max; upper truncation will bias the solution",
                          SupportOverflowWarning, stacklevel=2)
    op = LogGridOperator(kernel, y)
    steps = max(1, math.ceil(t_end / dt - 1e-12)) if t_end > 0 else 0
    h = t_end / steps if steps else dt
    snap_at = set(np.unique(np.round(np.linspace(0, steps, min(n_snapshots, steps + 1))).astype(int)).tolist())

    rhs = lambda v: op(v) - v  # noqa: E731
    times, values, masses, leaks = [], [], [], []
    leaked = 0.0
    rate = _leak_rate(kernel, y, n)
    m0 = _mass(y, n)
    edge = slice(0, min(N, 5))
    overflow = None
    for step in range(steps + 1):
        if step in snap_at:
            times.append(step * h)
            values.append(n.copy())
            masses.append(_mass(y, n))
            leaks.append(leaked)
            if overflow is None and m0 > 0:
                near = float(integrate.trapezoid(np.exp(2 * y[edge]) * n[edge], y[edge])) if N > 1 else 0.0
                if near > 1e-8 * m0:
                    overflow = step * h
                    warnings.warn(f"mass reaches y_min at t={overflow:.4g}", SupportOverflowWarning, stacklevel=2)
        if step == steps:
            break
        a = rhs(n)
        b = rhs(n + 0.5 * h * a)
        c = rhs(n + 0.5 * h * b)
        d = rhs(n + h * c)
        n = n + h / 6 * (a + 2 * b + 2 * c + d)
        new_rate = _leak_rate(kernel, y, n)
        leaked += 0.5 * h * (rate + new_rate)
        rate = new_rate
    return LogGridSolution(y, np.array(times), np.array(values), np.array(times), np.array(masses),
                           np.array(leaks), h, dy, "rk4", overflow)


def self_similar_residual(kernel: FragmentationKernel, sigma: float, dy: float, dt: float,
                          y_min: float, y_max: float, eval_window: tuple[float, float]) -> float:
    """Max relative one-step defect of the scheme on n = exp(-sigma y), divided by dt."""
    N = int(round((y_max - y_min) / dy)) + 1
    y = y_min + dy * np.arange(N)
    n0 = np.exp(-sigma * y)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SupportOverflowWarning)
        sol = simulate_log_grid(kernel, None, y_min, y_max, dy, dt, dt, n_snapshots=2, initial=n0)
    exact = n0 * math.exp((float(kernel.K(sigma)) - 1) * sol.dt)
    mask = (y >= eval_window[0]) & (y <= eval_window[1])
    return float(np.max(np.abs(sol.values[-1][mask] - exact[mask]) / exact[mask]) / sol.dt)


# -- Picard iteration -----------------------------------------------------------------


def _collocation(m: int):
    """Gauss-Legendre nodes on [0, 1], weights, and the matrix A_ij = int_0^{c_i} l_j."""
    xg, wg = np.polynomial.legendre.leggauss(m)
    c = 0.5 * (xg + 1)
    b = 0.5 * wg
    A = np.empty((m, m))
    for j in range(m):
        others = np.delete(c, j)
        poly = np.poly1d(others, r=True) / np.prod(c[j] - others)
        prim = np.polyint(poly)
        A[:, j] = prim(c) - prim(0.0)
    return c, b, A


def picard_solve(kernel: FragmentationKernel, datum: InitialDatum, t: float, x_grid: np.ndarray,
                 tau: float = 0.5, tol: float = 1e-10, nodes: int = 8, max_iter: int = 200) -> np.ndarray:
    """u(t, x_grid) from fixed-point iteration of w = u0 + int_0^t L w ds, w = e^t u.

    The time integral on each sub-interval of length ``tau`` is represented
    by Gauss-Legendre collocation; the size integral reuses the grid
    operator, so ``x_grid`` must be log-uniform.
    """
    x_grid = np.asarray(x_grid, dtype=float)
    y = np.log(x_grid)
    if x_grid.size < 4 or not np.allclose(np.diff(y), y[1] - y[0], rtol=1e-8, atol=1e-12):
        raise DomainError("picard_solve needs a log-uniform x grid with at least 4 points")
    if not 0 < tau < 1:
        raise DomainError("sub-interval length must lie in (0, 1)")
    op = LogGridOperator(kernel, y)
    w = np.asarray(datum(x_grid), dtype=float)
    peak = float(np.max(w))
    if peak > 0 and w[-1] > 1e-12 * peak:
        warnings.warn("datum is not negligible at the top of the grid", SupportOverflowWarning, stacklevel=2)
    weight = (1 + x_grid) * x_grid * (y[1] - y[0])

    def norm(v):
        return float(np.sum(np.abs(v) * weight, axis=-1).max()) if v.ndim > 1 else float(np.sum(np.abs(v) * weight))

    c, b, A = _collocation(nodes)
    done = 0.0
    while done < t - 1e-14:
        h = min(tau, t - done)
        W = np.tile(w, (nodes, 1))
        scale = max(norm(w), 1e-300)
        prev_change = math.inf
        for it in range(max_iter):
            LW = np.array([op(Wi) for Wi in W])
            W_new = w[None, :] + h * (A @ LW)
            change = norm(W_new - W)
            # the weighted norm barely sees small x, so also demand pointwise stability there
            floor = 1e-8 * float(np.max(np.abs(W_new)))
            pointwise = float(np.max(np.abs(W_new - W) / np.maximum(np.abs(W_new), floor)))
            W = W_new
            if change <= tol * scale and pointwise <= 1e3 * tol:
                break
            if it > 5 and change > 10 * prev_change:
                raise ContractionError(f"Picard iterates diverge on [{done:.3g}, {done + h:.3g}]")
            prev_change = change
        else:
            raise ContractionError(f"no convergence after {max_iter} Picard iterations")
        LW = np.array([op(Wi) for Wi in W])
        w = w + h * (b @ LW)
        done += h
    return math.exp(-t) * w


# -- evaluators ---------------------------------------------------------------------


def mellin_evaluator(datum: InitialDatum, kernel: FragmentationKernel) -> Callable:
    def ev(t, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.array([inverse_mellin_u(datum, kernel, t, float(xi)) for xi in x])

    return ev


def grid_evaluator(solution: LogGridSolution) -> Callable:
    """Cubic interpolation in y of the stored snapshots."""
    cache = {}

    def ev(t, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        yq = np.log(x)
        if np.any(yq < solution.y[0] - 1e-12) or np.any(yq > solution.y[-1] + 1e-12):
            raise RangeError("evaluation point outside the simulation grid")
        key = float(t)
        if key not in cache:
            cache[key] = interpolate.CubicSpline(solution.y, solution.snapshot(t))
        return cache[key](yq)

    return ev


def growth_frag_transform(u_evaluator: Callable, c: float, t: float, x):
    """v(t, x) = e^(-ct) u(t, x e^(-ct)), the solution with growth rate c."""
    x = np.asarray(x, dtype=float)
    scale = math.exp(-c * t)
    try:
        val = u_evaluator(t, x * scale)
    except RangeError:
        raise
    except (ValueError, IndexError) as exc:
        raise RangeError(f"pulled-back point outside evaluator range: {exc}") from exc
    val = scale * np.asarray(val, dtype=float)
    return float(val[0]) if x.ndim == 0 else val


# -- diagnostics --------------------------------------------------------------------


@dataclass
class DiagnosticsReport:
    times: np.ndarray
    z_grid: np.ndarray
    entropy: np.ndarray
    dissipation: np.ndarray
    tail_mass: np.ndarray
    quantile_interval: np.ndarray
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "z": self.z_grid.tolist(),
            "entropy": self.entropy.tolist(),
            "dissipation": self.dissipation.tolist(),
            "quantile_interval_90": self.quantile_interval.tolist(),
            "flags": self.flags,
        }


def _mass_quantiles(y, dens, lo=0.05, hi=0.95):
    cum = integrate.cumulative_trapezoid(dens, y, initial=0.0)
    total = cum[-1]
    if total <= 0:
        return math.nan, math.nan
    return float(np.interp(lo * total, cum, y)), float(np.interp(hi * total, cum, y))


def dirac_diagnostics(solution: LogGridSolution, kernel: FragmentationKernel, z_grid) -> DiagnosticsReport:
    """Entropy H(z;t) = int_z^inf x u dx, dissipation D(z;t), and the 90% mass interval."""
    z_grid = np.asarray(z_grid, dtype=float)
    y = solution.y
    ex = np.exp(2 * y)
    H = np.empty((solution.times.size, z_grid.size))
    D = np.empty_like(H)
    q = np.empty((solution.times.size, 2))
    for i, n in enumerate(solution.values):
        dens = ex * n
        for j, z in enumerate(z_grid):
            mask = y >= math.log(z) if z > 0 else np.ones_like(y, dtype=bool)
            if np.count_nonzero(mask) < 2:
                H[i, j] = D[i, j] = 0.0
                continue
            H[i, j] = integrate.trapezoid(dens[mask], y[mask])
            fc = kernel.first_moment_cdf(z * np.exp(-y[mask])) if z > 0 else np.zeros(np.count_nonzero(mask))
            D[i, j] = -integrate.trapezoid(fc * dens[mask], y[mask])
        lo, hi = _mass_quantiles(y, dens)
        q[i] = (math.exp(lo), math.exp(hi))
    zero = z_grid == 0
    # H(0; t) is the discrete mass, so increments below the scheme's own mass defect are not violations
    slack = float(np.max(np.abs(solution.mass - solution.mass[0]))) + 1e-12 * float(np.max(np.abs(H)))
    flags = {
        "dissipation_nonpositive": bool(np.all(D <= 1e-15 * max(1.0, float(np.max(np.abs(H)))))),
        "entropy_nonincreasing": bool(np.all(np.diff(H, axis=0) <= slack)),
        "entropy_at_zero_is_mass": bool(np.allclose(H[:, zero], solution.mass[:, None], rtol=1e-12, atol=0))
        if np.any(zero) else None,
        "F_cum_at_1": float(kernel.first_moment_cdf(np.array(1.0))),
    }
    return DiagnosticsReport(solution.times, z_grid, H, D, H.copy(), q, flags)


@dataclass
class ProfileReport:
    t: float
    y: np.ndarray
    r: np.ndarray
    z: np.ndarray
    r_tilde: np.ndarray
    integral_r: float
    mean_r: float
    var_r: float
    integral_rt: float
    mean_rt: float
    var_rt: float
    center: float
    sigma: float

    def moments(self) -> dict:
        return {k: getattr(self, k) for k in ("t", "integral_r", "mean_r", "var_r", "integral_rt", "mean_rt",
                                             "var_rt", "center", "sigma")}


def _moments(x, f):
    m0 = integrate.trapezoid(f, x)
    m1 = integrate.trapezoid(x * f, x) / m0
    m2 = integrate.trapezoid((x - m1) ** 2 * f, x) / m0
    return float(m0), float(m1), float(m2)


def rescaled_profiles(datum: InitialDatum, kernel: FragmentationKernel, u_evaluator: Callable, t: float,
                      y_grid=None, z_grid=None, log_x_bounds=None) -> ProfileReport:
    """r(t, y) = t e^(2ty) u(t, e^(ty)) and r~(t, z) = r(t, y0 + sigma z / sqrt(t)) sigma / sqrt(t).

    y0 = K'(2), sigma^2 = K''(2).  Means and variances are of the profiles
    normalised by their own integrals.  ``log_x_bounds`` clips the default
    sampling windows to the range where the evaluator is defined.
    """
    if not t > 0:
        raise DomainError("profiles need t > 0")
    y0 = float(kernel.dK(2.0, 1))
    sigma = math.sqrt(float(kernel.dK(2.0, 2)))
    lo_b, hi_b = (-math.inf, math.inf) if log_x_bounds is None else (log_x_bounds[0] / t, log_x_bounds[1] / t)
    if y_grid is None:
        half = 12 * sigma / math.sqrt(t) + 12 / t
        y_grid = np.linspace(max(y0 - half, lo_b), min(y0 + half, hi_b), 801)
    if z_grid is None:
        half = 12 + 12 / (sigma * math.sqrt(t))
        scale = sigma / math.sqrt(t)
        z_grid = np.linspace(max(-half, (lo_b - y0) / scale), min(half, (hi_b - y0) / scale), 801)
    y_grid = np.asarray(y_grid, dtype=float)
    z_grid = np.asarray(z_grid, dtype=float)

    def r_of(y):
        return t * np.exp(2 * t * y) * np.asarray(u_evaluator(t, np.exp(t * y)), dtype=float)

    r = r_of(y_grid)
    rt = r_of(y0 + sigma * z_grid / math.sqrt(t)) * sigma / math.sqrt(t)
    i_r, m_r, v_r = _moments(y_grid, r)
    i_t, m_t, v_t = _moments(z_grid, rt)
    return ProfileReport(t, y_grid, r, z_grid, rt, i_r, m_r, v_r, i_t, m_t, v_t, y0, sigma)


def exact_profile_moments(datum: InitialDatum, kernel: FragmentationKernel, t: float, h: float = 1e-3) -> dict:
    """Mean and variance of r/M and r~/M from the cumulants of the mass measure in log x.

    The mass measure x u dx has log-moment generating function
    log U(t, 2 + s) = log U0(2 + s) + t (K(2 + s) - 1), so its first two
    cumulants in Y = log x are (log U0)'(2) + t K'(2) and (log U0)''(2) + t K''(2).
    """
    lu = lambda s: math.log(float(np.real(mellin_u0(datum, s))))  # noqa: E731
    d1 = (lu(2 + h) - lu(2 - h)) / (2 * h)
    d2 = (lu(2 + h) - 2 * lu(2) + lu(2 - h)) / h**2
    mean_Y = d1 + t * float(kernel.dK(2.0, 1))
    var_Y = d2 + t * float(kernel.dK(2.0, 2))
    y0 = float(kernel.dK(2.0, 1))
    sig2 = float(kernel.dK(2.0, 2))
    return {
        "mean_r": mean_Y / t,
        "var_r": var_Y / t**2,
        "mean_rt": (mean_Y / t - y0) * math.sqrt(t / sig2),
        "var_rt": var_Y / (t * sig2),
    }


def support_boundaries(solution: LogGridSolution, level: float = 0.1, margin: int = 5) -> dict:
    """Edges of {y : n >= level max n} per snapshot, and straight-line fits in t.

    A snapshot is used only while the level set and the maximum stay at
    least ``margin`` cells inside the grid.
    """
    ts, lo, hi = [], [], []
    N = solution.y.size
    for t, n in zip(solution.times, solution.values):
        imax = int(np.argmax(n))
        if imax < margin or imax > N - 1 - margin:
            continue
        idx = np.nonzero(n >= level * n[imax])[0]
        if idx[0] < margin or idx[-1] > N - 1 - margin:
            continue
        ts.append(t)
        lo.append(_crossing(solution.y, n, level * n[imax], idx[0], -1))
        hi.append(_crossing(solution.y, n, level * n[imax], idx[-1], 1))
    out = {"t": np.array(ts), "lower": np.array(lo), "upper": np.array(hi)}
    for key in ("lower", "upper"):
        if len(ts) >= 3:
            fit = stats.linregress(out["t"], out[key])
            out[key + "_slope"] = float(fit.slope)
            out[key + "_intercept"] = float(fit.intercept)
            out[key + "_r2"] = float(fit.rvalue**2)
        else:
            out[key + "_slope"] = out[key + "_intercept"] = out[key + "_r2"] = math.nan
    return out


def _crossing(y, n, level, i, direction):
    """Linear interpolation of the level crossing between node i and its outer neighbour."""
    j = i + direction
    a, b = n[j], n[i]
    if b == a:
        return float(y[i])
    frac = (level - a) / (b - a)
    return float(y[j] + frac * (y[i] - y[j]))
