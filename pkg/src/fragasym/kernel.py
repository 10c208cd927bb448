"""Fragmentation kernels k0 on (0, 1) and their Mellin transforms.

A kernel is a nonnegative measure made of an optional density part and an
optional finite list of atoms ``(sigma, weight)``.  Its Mellin transform

    K(s) = int_0^1 z^(s-1) dk0(z)

is evaluated exactly for every supported form: closed forms for power
densities, finite sums for atoms and exact panel integrals of the
piecewise-linear reconstruction for tabulated densities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import DomainError, EstimationError, PrecisionError

__all__ = [
    "PowerDensity",
    "TabulatedDensity",
    "FragmentationKernel",
    "CheckEntry",
    "AdmissibilityReport",
    "ConditionHResult",
    "homogeneous",
    "power",
    "mitosis",
    "from_atoms",
    "tabulated",
    "mellin_K",
    "mellin_K_derivative",
    "check_admissible",
    "lower_abscissa",
    "condition_h",
]


def _phi(k: int, w: np.ndarray) -> np.ndarray:
    """int_0^1 tau^k exp(w tau) dtau, stable for small and large |w|."""
    w = np.asarray(w, dtype=complex)
    out = np.empty_like(w)
    small = np.abs(w) < 1.0
    if np.any(small):
        ws = w[small]
        acc = np.zeros_like(ws)
        term = np.ones_like(ws)
        for n in range(32):
            acc += term / (n + k + 1)
            term = term * ws / (n + 1)
        out[small] = acc
    big = ~small
    if np.any(big):
        wb = w[big]
        ew = np.exp(wb)
        val = np.expm1(wb) / wb
        for j in range(1, k + 1):
            val = (ew - j * val) / wb
        out[big] = val
    return out


def _log_moment(k: int, s: np.ndarray, la: np.ndarray, lb: np.ndarray) -> np.ndarray:
    """int_{la}^{lb} Y^k exp(s Y) dY for arrays s (M,) and panels (P,) -> (M, P)."""
    s = np.asarray(s, dtype=complex)[:, None]
    la = la[None, :]
    width = (lb - la[0])[None, :]
    total = np.zeros(np.broadcast(s, la).shape, dtype=complex)
    for j in range(k + 1):
        total += math.comb(k, j) * la ** (k - j) * width**j * _phi(j, s * width)
    return width * np.exp(s * la) * total


@dataclass(frozen=True)
class PowerDensity:
    """Density ``weight * (a + 2) * z**a`` on (0, 1); ``a = 0`` is the homogeneous kernel."""

    a: float
    weight: float = 1.0

    def __post_init__(self):
        if not self.a > -1:
            raise DomainError(f"power exponent must exceed -1, got {self.a}")
        if not self.weight > 0:
            raise DomainError("density weight must be positive")

    @property
    def p1(self) -> float:
        return -self.a

    def mellin(self, s: np.ndarray, order: int = 0) -> np.ndarray:
        c = self.weight * (self.a + 2)
        return c * (-1) ** order * math.factorial(order) / (s + self.a) ** (order + 1)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return np.where((z > 0) & (z <= 1), self.weight * (self.a + 2) * np.power(np.clip(z, 1e-300, None), self.a), 0.0)

    def first_moment_cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return self.weight * x ** (self.a + 2)


@dataclass(frozen=True, eq=False)
class TabulatedDensity:
    """Density given by nodal values on a grid inside (0, 1].

    Between nodes the density is linear in z.  Below the first node it is
    continued by the power law ``C z**a`` fitted by least squares on the
    smallest decade of the grid; above the last node it is zero.
    """

    z: np.ndarray
    values: np.ndarray
    p1_margin: float = 0.1
    head_coef: float = field(init=False)
    head_exp: float = field(init=False)

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if z.ndim != 1 or z.shape != v.shape or z.size < 2:
            raise DomainError("tabulated density needs matching 1-d grids with >= 2 nodes")
        if np.any(np.diff(z) <= 0) or z[0] <= 0 or z[-1] > 1:
            raise DomainError("tabulated grid must be strictly increasing inside (0, 1]")
        if np.any(v < 0):
            raise DomainError("tabulated density values must be nonnegative")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "values", v)
        decade = z <= 10 * z[0]
        zd, vd = z[decade], v[decade]
        if np.all(vd == 0):
            coef, expo = 0.0, math.inf
        elif np.any(vd == 0) or zd.size < 2:
            raise EstimationError(
                "cannot resolve small-z behaviour of tabulated density "
                f"({zd.size} nodes in the smallest decade, {int(np.sum(vd == 0))} zero)"
            )
        else:
            expo, logc = np.polyfit(np.log(zd), np.log(vd), 1)
            if expo <= -1:
                raise EstimationError(f"fitted small-z exponent {expo:.3g} is not integrable")
            coef = math.exp(logc)
        object.__setattr__(self, "head_coef", float(coef))
        object.__setattr__(self, "head_exp", float(expo))

    @property
    def p1(self) -> float:
        if self.head_coef == 0.0:
            return -math.inf
        return -self.head_exp + self.p1_margin

    def _panels(self):
        z, v = self.z, self.values
        beta = np.diff(v) / np.diff(z)
        alpha = v[:-1] - beta * z[:-1]
        return np.log(z[:-1]), np.log(z[1:]), alpha, beta

    def mellin(self, s: np.ndarray, order: int = 0) -> np.ndarray:
        s = np.asarray(s, dtype=complex)
        flat = s.ravel()
        la, lb, alpha, beta = self._panels()
        body = _log_moment(order, flat, la, lb) @ alpha + _log_moment(order, flat + 1, la, lb) @ beta
        if self.head_coef:
            # d^k/ds^k of C z0^(a+s) / (a+s)
            w = flat + self.head_exp
            l0 = math.log(self.z[0])
            acc = np.zeros_like(w)
            for j in range(order + 1):
                acc += (-1) ** j * math.factorial(order) / math.factorial(order - j) * l0 ** (order - j) / w ** (j + 1)
            body = body + self.head_coef * np.exp(w * l0) * acc
        return body.reshape(s.shape)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        inside = np.interp(z, self.z, self.values, left=0.0, right=0.0)
        if self.head_coef:
            head = self.head_coef * np.power(np.clip(z, 1e-300, None), self.head_exp)
            inside = np.where((z > 0) & (z < self.z[0]), head, inside)
        return inside

    def first_moment_cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        z, v = self.z, self.values
        beta = np.diff(v) / np.diff(z)
        alpha = v[:-1] - beta * z[:-1]

        def prim(y, i):
            return alpha[i] * y**2 / 2 + beta[i] * y**3 / 3

        head_total = 0.0
        if self.head_coef:
            head_total = self.head_coef * z[0] ** (self.head_exp + 2) / (self.head_exp + 2)
        cum = np.concatenate([[head_total], head_total + np.cumsum(prim(z[1:], np.arange(z.size - 1)) - prim(z[:-1], np.arange(z.size - 1)))])
        idx = np.clip(np.searchsorted(z, x, side="right") - 1, 0, z.size - 2)
        out = cum[idx] + prim(np.clip(x, z[0], z[-1]), idx) - prim(z[idx], idx)
        out = np.where(x >= z[-1], cum[-1], out)
        if self.head_coef:
            out = np.where(x < z[0], self.head_coef * x ** (self.head_exp + 2) / (self.head_exp + 2), out)
        else:
            out = np.where(x < z[0], 0.0, out)
        return out


Density = PowerDensity | TabulatedDensity


@dataclass(frozen=True, eq=False)
class FragmentationKernel:
    """Fragment distribution k0: density part plus atoms.

    ``form`` is the closed-form name (``homogeneous``, ``power``,
    ``mitosis``) or ``atoms`` / ``tabulated`` / ``mixture``.
    """

    form: str
    density: Density | None = None
    atoms: tuple[tuple[float, float], ...] = ()
    params: dict = field(default_factory=dict)
    norm_tolerance: float | None = None

    def __post_init__(self):
        atoms = tuple((float(sg), float(wt)) for sg, wt in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if self.norm_tolerance is None:
            tol = 1e-6 if isinstance(self.density, TabulatedDensity) else 1e-10
            object.__setattr__(self, "norm_tolerance", tol)

    @property
    def p1(self) -> float:
        return self.density.p1 if self.density is not None else -math.inf

    @property
    def is_discrete(self) -> bool:
        return self.density is None

    def _check(self, s):
        if np.any(np.real(s) <= self.p1):
            raise DomainError(f"Re(s) must exceed p1 = {self.p1}")

    def mellin(self, s, order: int = 0):
        """k-th derivative of K at ``s`` (scalar or array, complex allowed)."""
        scalar = np.ndim(s) == 0
        s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
        self._check(s_arr)
        out = np.zeros_like(s_arr)
        if self.density is not None:
            out += self.density.mellin(s_arr, order)
        for sigma, weight in self.atoms:
            ls = math.log(sigma)
            out += weight * ls**order * np.exp((s_arr - 1) * ls)
        if not np.iscomplexobj(s) and np.isrealobj(np.asarray(s)):
            out = out.real
        return out[0] if scalar else out

    def K(self, s):
        return self.mellin(s, 0)

    def dK(self, s, order: int = 1):
        return self.mellin(s, order)

    def density_at(self, z):
        """Density part evaluated at z (atoms excluded)."""
        if self.density is None:
            return np.zeros_like(np.asarray(z, dtype=float))
        return self.density(z)

    def first_moment_cdf(self, x):
        """F_cum(x) = int_0^x y dk0(y), the distribution function of y k0(y)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if self.density is not None:
            out = out + self.density.first_moment_cdf(x)
        for sigma, weight in self.atoms:
            out = out + weight * sigma * (x >= sigma)
        return out

    def describe(self) -> dict:
        d = {"form": self.form, "params": dict(self.params)}
        if self.atoms:
            d["atoms"] = [list(a) for a in self.atoms]
        if isinstance(self.density, TabulatedDensity):
            d["grid"] = {"z": self.density.z.tolist(), "values": self.density.values.tolist()}
        return d


def homogeneous() -> FragmentationKernel:
    """k0 = 2 on (0, 1), K(s) = 2/s."""
    return FragmentationKernel("homogeneous", PowerDensity(0.0))


def power(a: float, weight: float = 1.0) -> FragmentationKernel:
    return FragmentationKernel("power", PowerDensity(float(a), weight), params={"a": a})


def mitosis() -> FragmentationKernel:
    """Equal binary splitting, k0 = 2 delta_{1/2}, K(s) = 2^(2-s)."""
    return FragmentationKernel("mitosis", atoms=((0.5, 2.0),))


def from_atoms(atoms: Sequence[tuple[float, float]]) -> FragmentationKernel:
    atoms = tuple(atoms)
    for sigma, weight in atoms:
        if not 0 < sigma < 1:
            raise DomainError(f"atom location {sigma} not in (0, 1)")
        if not weight > 0:
            raise DomainError(f"atom weight {weight} must be positive")
    return FragmentationKernel("atoms", atoms=atoms)


def tabulated(z, values, atoms: Sequence[tuple[float, float]] = ()) -> FragmentationKernel:
    for sigma, weight in atoms:
        if not 0 < sigma < 1 or not weight > 0:
            raise DomainError(f"invalid atom ({sigma}, {weight})")
    form = "mixture" if atoms else "tabulated"
    return FragmentationKernel(form, TabulatedDensity(np.asarray(z), np.asarray(values)), atoms=tuple(atoms))


def mellin_K(kernel: FragmentationKernel, s):
    """K(s) = int_0^1 z^(s-1) dk0(z); raises DomainError for Re(s) <= p1."""
    return kernel.mellin(s, 0)


def mellin_K_derivative(kernel: FragmentationKernel, s, order: int):
    """int_0^1 (log z)^order z^(s-1) dk0(z) for order 1, 2 or 3."""
    if order not in (1, 2, 3):
        raise DomainError(f"derivative order must be 1, 2 or 3, got {order}")
    return kernel.mellin(s, order)


def lower_abscissa(kernel: FragmentationKernel) -> float:
    return kernel.p1


# -- admissibility -----------------------------------------------------------


@dataclass
class CheckEntry:
    name: str
    value: float
    passed: bool
    detail: str = ""


@dataclass
class AdmissibilityReport:
    entries: list[CheckEntry]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {"name": e.name, "value": e.value, "passed": e.passed, "detail": e.detail} for e in self.entries
            ],
        }


def check_admissible(kernel: FragmentationKernel) -> AdmissibilityReport:
    """Run every kernel invariant and report measured values; never raises."""
    entries = []
    tol = kernel.norm_tolerance
    bad_atoms = [a for a in kernel.atoms if not (0 < a[0] < 1 and a[1] > 0)]
    entries.append(
        CheckEntry(
            "atoms_in_open_unit_interval",
            float(len(bad_atoms)),
            not bad_atoms,
            "offending atoms: " + repr(bad_atoms) if bad_atoms else "",
        )
    )
    p1 = kernel.p1
    entries.append(CheckEntry("p1_below_1", p1, p1 < 1))
    if bad_atoms or p1 >= 2:
        entries.append(CheckEntry("first_moment", math.nan, False, "K(2) undefined"))
        entries.append(CheckEntry("total_mass_exceeds_1", math.nan, False, "K(1) undefined"))
        return AdmissibilityReport(entries)
    k2 = float(kernel.K(2.0))
    entries.append(CheckEntry("first_moment", k2, abs(k2 - 1) <= tol, f"|K(2) - 1| <= {tol:g}"))
    if p1 < 1:
        k1 = float(kernel.K(1.0))
        entries.append(CheckEntry("total_mass_exceeds_1", k1, k1 > 1, "K(1) > 1"))
    else:
        entries.append(CheckEntry("total_mass_exceeds_1", math.inf, True, "int dk0 diverges"))
    return AdmissibilityReport(entries)


# -- Condition H --------------------------------------------------------------


@dataclass
class ConditionHResult:
    satisfied: bool
    theta: float | None = None
    exponents: tuple[int, ...] = ()
    v_star: float | None = None
    certificate: str = ""

    def to_dict(self) -> dict:
        return {
            "satisfied": self.satisfied,
            "theta": self.theta,
            "exponents": list(self.exponents),
            "v_star": self.v_star,
            "certificate": self.certificate,
        }


def _farey_neighbours(frac: Fraction, max_den: int) -> list[Fraction]:
    """Left and right neighbours of ``frac`` in the Farey sequence of order max_den."""
    p, q = frac.numerator, frac.denominator
    if q == 1:
        return [Fraction(p * max_den - 1, max_den), Fraction(p * max_den + 1, max_den)]
    # right neighbour r/d satisfies r*q - p*d = 1
    d_right = pow(-p, -1, q)  # p * d = -1 mod q
    d_right += ((max_den - d_right) // q) * q
    r_right = (1 + p * d_right) // q
    d_left = pow(p, -1, q)
    d_left += ((max_den - d_left) // q) * q
    r_left = (p * d_left - 1) // q
    return [Fraction(r_left, d_left), Fraction(r_right, d_right)]


def _rational(x: float, tol: float, max_den: int) -> Fraction | None:
    best = Fraction(x).limit_denominator(max_den)
    if abs(float(best) - x) > tol:
        return None
    rivals = [f for f in _farey_neighbours(best, max_den) if abs(float(f) - x) <= tol]
    if rivals:
        raise PrecisionError(f"ratio {x!r} is within {tol:g} of both {best} and {rivals[0]}")
    return best


def condition_h(
    atoms: Sequence[tuple[float, float]] | Sequence[float],
    tol: float = 1e-9,
    max_denominator: int = 10_000,
) -> ConditionHResult:
    """Decide whether all atom locations are integer powers of one base theta.

    The log-ratios ``log(sigma_l) / log(sigma_0)`` are tested for rationality
    with continued-fraction best approximations of bounded denominator.  The
    default bound keeps ``max_denominator**2 * tol`` well below one so that an
    irrational ratio is not accepted by accident.
    """
    sigmas = sorted({float(a[0]) if isinstance(a, (tuple, list)) else float(a) for a in atoms}, reverse=True)
    if not sigmas:
        raise DomainError("condition_h needs at least one atom")
    for sg in sigmas:
        if not 0 < sg < 1:
            raise DomainError(f"atom location {sg} not in (0, 1)")
    logs = [math.log(sg) for sg in sigmas]
    ratios = []
    for sg, lg in zip(sigmas, logs):
        frac = _rational(lg / logs[0], tol, max_denominator)
        if frac is None:
            return ConditionHResult(
                False,
                certificate=(
                    f"log({sg:.12g})/log({sigmas[0]:.12g}) = {lg / logs[0]:.15g} has no rational "
                    f"approximation with denominator <= {max_denominator} within {tol:g} "
                    "(bounded-denominator continued-fraction test)"
                ),
            )
        ratios.append(frac)
    lcm = reduce(lambda a, b: a * b // math.gcd(a, b), (f.denominator for f in ratios), 1)
    ints = [int(f * lcm) for f in ratios]
    g = reduce(math.gcd, ints)
    exps = tuple(i // g for i in ints)
    theta = math.exp(sum(lg / e for lg, e in zip(logs, exps)) / len(exps))
    return ConditionHResult(
        True,
        theta=theta,
        exponents=exps,
        v_star=2 * math.pi / math.log(theta),
        certificate=(
            f"sigma_l = theta^p_l with theta = {theta:.15g}, exponents {list(exps)} "
            f"(bounded-denominator test, max denominator {max_denominator}, tol {tol:g})"
        ),
    )
