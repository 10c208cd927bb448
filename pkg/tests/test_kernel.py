import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from fragasym import kernel as km
from fragasym.errors import DomainError, EstimationError, PrecisionError

LOG2 = math.log(2)


def test_closed_form_values(hom, mito):
    assert hom.K(2.0) == pytest.approx(1.0, abs=1e-15)
    assert km.mellin_K(hom, 4.0) == pytest.approx(0.5, abs=1e-15)
    assert km.mellin_K(mito, 1.0) == pytest.approx(2.0, abs=1e-15)
    assert km.mellin_K_derivative(hom, 2.0, 1) == pytest.approx(-0.5, abs=1e-15)
    assert km.mellin_K_derivative(mito, 2.0, 1) == pytest.approx(-0.693147180559945, abs=1e-12)


def test_lower_abscissa(hom, mito, pow1):
    assert km.lower_abscissa(hom) == 0
    assert km.lower_abscissa(mito) == -math.inf
    assert km.lower_abscissa(pow1) == -1


@pytest.mark.parametrize("s", [0.3 + 0.0j, 2.0 + 5.0j, 1.5 - 30.0j, 7.0 + 0.1j])
def test_complex_closed_forms(hom, mito, pow1, s):
    assert hom.K(s) == pytest.approx(2 / s, rel=1e-14)
    assert mito.K(s) == pytest.approx(2 ** (2 - s), rel=1e-13)
    assert pow1.K(s) == pytest.approx(3 / (s + 1), rel=1e-14)
    assert pow1.dK(s, 3) == pytest.approx(-18 / (s + 1) ** 4, rel=1e-13)
    assert mito.dK(s, 2) == pytest.approx(LOG2**2 * 2 ** (2 - s), rel=1e-13)


def test_domain_errors(hom):
    with pytest.raises(DomainError):
        hom.K(0.0)
    with pytest.raises(DomainError):
        hom.K(-0.5 + 3j)
    with pytest.raises(DomainError):
        km.mellin_K_derivative(hom, 2.0, 4)
    with pytest.raises(DomainError):
        km.from_atoms([(1.0, 1.0)])
    with pytest.raises(DomainError):
        km.power(-1.5)


def test_tabulated_linear_density_is_exact():
    # 3z is reproduced exactly by the linear reconstruction and the fitted head
    z = np.linspace(1e-3, 1, 400)
    tab = km.tabulated(z, 3 * z)
    ref = km.power(1.0)
    assert tab.p1 == pytest.approx(-0.9, abs=1e-9)
    for s in (2.0, 3 + 40j, 0.5 - 7j):
        assert tab.K(s) == pytest.approx(complex(ref.K(s)), rel=1e-11)
        assert tab.dK(s, 2) == pytest.approx(complex(ref.dK(s, 2)), rel=1e-10)
    assert tab.first_moment_cdf(np.array([5e-4, 0.3, 1.0])) == pytest.approx([1.25e-10, 0.027, 1.0], rel=1e-10)


def test_tabulated_smooth_density_converges():
    ref = km.power(2.0)
    errs = []
    for n in (100, 200, 400):
        z = np.geomspace(1e-3, 1, n)
        tab = km.tabulated(z, 4 * z**2)
        errs.append(abs(tab.K(2.5 + 3j) - ref.K(2.5 + 3j)))
    assert errs[0] / errs[1] > 3 and errs[1] / errs[2] > 3


def test_tabulated_unresolvable_head():
    z = np.linspace(0.01, 1, 100)
    v = np.full_like(z, 2.0)
    v[0] = 0.0
    with pytest.raises(EstimationError):
        km.tabulated(z, v)


def test_admissibility_examples(hom):
    assert km.check_admissible(hom).passed
    rep = km.check_admissible(km.FragmentationKernel("atoms", atoms=((1.0, 1.0),)))
    assert not rep.passed
    names = {e.name: e for e in rep.entries}
    assert not names["atoms_in_open_unit_interval"].passed
    flat = km.FragmentationKernel("uniform", km.PowerDensity(0.0, 0.5))
    rep = km.check_admissible(flat)
    assert not rep.passed
    moment = {e.name: e for e in rep.entries}["first_moment"]
    assert moment.value == pytest.approx(0.5)
    assert not moment.passed


def test_first_moment_cdf(hom, mito):
    x = np.linspace(0, 1, 11)
    assert hom.first_moment_cdf(x) == pytest.approx(x**2)
    assert mito.first_moment_cdf(np.array([0.49, 0.5, 1.0])) == pytest.approx([0.0, 1.0, 1.0])


def test_finite_difference_order(hom, mito, pow1):
    for k in (hom, mito, pow1):
        s = 2.5
        exact = float(k.dK(s, 1))
        errs = [abs((k.K(s + h) - k.K(s - h)) / (2 * h) - exact) for h in (1e-3, 1e-4)]
        assert 60 < errs[0] / errs[1] < 160


# -- properties -----------------------------------------------------------------


@st.composite
def atomic_kernels(draw):
    n = draw(st.integers(1, 4))
    sig = draw(st.lists(st.floats(0.05, 0.95), min_size=n, max_size=n, unique=True))
    raw = draw(st.lists(st.floats(0.1, 5.0), min_size=n, max_size=n))
    norm = sum(r * s for r, s in zip(raw, sig))
    return km.from_atoms([(s, r / norm) for s, r in zip(sig, raw)])


kernels = st.one_of(
    st.floats(-0.9, 6.0).map(km.power),
    atomic_kernels(),
    st.just(km.homogeneous()),
    st.just(km.mitosis()),
)


@given(kernels, st.floats(0.0, 1.0), st.floats(0.01, 3.0))
def test_K_positive_decreasing_convex(k, frac, gap):
    lo = k.p1 if math.isfinite(k.p1) else -3.0
    s1 = lo + 0.05 + 4 * frac
    s2 = s1 + gap
    K1, K2 = float(k.K(s1)), float(k.K(s2))
    assert K1 > 0 and K2 > 0
    assert K1 > K2
    assert float(k.dK(s1, 2)) > 0
    assert isinstance(K1, float)


@given(kernels)
def test_normalisation(k):
    assert abs(float(k.K(2.0)) - 1) <= 1e-10
    assert float(k.K(1.0)) > 1
    assert km.check_admissible(k).passed


# -- Condition H ------------------------------------------------------------------


def test_condition_h_examples():
    r = km.condition_h([(0.5, 2.0)])
    assert r.satisfied and r.theta == pytest.approx(0.5) and r.exponents == (1,)
    assert r.v_star == pytest.approx(-9.0647202836543879, rel=1e-12)
    r = km.condition_h([(0.5, 1.0), (0.25, 1.0)])
    assert r.satisfied and r.theta == pytest.approx(0.5) and r.exponents == (1, 2)
    r = km.condition_h([(0.5, 1.0), (1 / 3, 1.0)])
    assert not r.satisfied
    assert "0.5" in r.certificate and "0.333" in r.certificate
    r = km.condition_h([0.49, 0.343])
    assert r.satisfied and r.theta == pytest.approx(0.7, abs=1e-12) and r.exponents == (2, 3)


def test_condition_h_ambiguity():
    with pytest.raises(PrecisionError):
        km.condition_h([0.5, 0.5**0.54], tol=0.05, max_denominator=10)


def test_condition_h_rejects_bad_atoms():
    with pytest.raises(DomainError):
        km.condition_h([])
    with pytest.raises(DomainError):
        km.condition_h([1.0])


@st.composite
def commensurable(draw):
    theta = draw(st.floats(0.05, 0.95))
    exps = draw(st.lists(st.integers(1, 12), min_size=1, max_size=5, unique=True))
    g = 0
    for e in exps:
        g = math.gcd(g, e)
    exps = sorted(e // g for e in exps)
    assume(theta ** exps[-1] > 1e-6)
    return theta, exps


@given(commensurable())
def test_condition_h_recovers_base(case):
    theta, exps = case
    r = km.condition_h([theta**e for e in exps])
    assert r.satisfied
    assert list(r.exponents) == exps
    assert abs(r.theta - theta) <= 1e-9


@given(commensurable(), st.randoms(use_true_random=False))
def test_condition_h_permutation_and_duplicates(case, rnd):
    theta, exps = case
    atoms = [(theta**e, 1.0) for e in exps]
    base = km.condition_h(atoms)
    shuffled = atoms + atoms[:1]
    rnd.shuffle(shuffled)
    other = km.condition_h(shuffled)
    assert other.satisfied == base.satisfied
    assert other.exponents == base.exponents
    assert other.theta == pytest.approx(base.theta, abs=1e-12)


def test_log_ratio_2_3_rejected_with_margin():
    x = math.log(3) / math.log(2)
    best = Fraction(x).limit_denominator(10_000)
    assert abs(float(best) - x) > 1e-9
