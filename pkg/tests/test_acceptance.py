"""End-to-end acceptance checks.

Each test prints one line, ``[A<n>] PASS|FAIL <name>: <measured values>``,
and then asserts the same condition at the pinned tolerance.
"""
import math
import time
import warnings

import numpy as np
import pytest

from fragasym import asymptotics as am
from fragasym import kernel as km
from fragasym import mellin as mm
from fragasym import regions as rg
from fragasym import simulator as sm

LOG2 = math.log(2)


@pytest.fixture
def emit(capsys):
    def _emit(n, name, ok, detail, elapsed, limit):
        ok = bool(ok) and elapsed < limit
        with capsys.disabled():
            print(f"\n[A{n:02d}] {'PASS' if ok else 'FAIL'} {name}: {detail}; {elapsed:.2f}s (limit {limit:g}s)")
        return ok

    return _emit


def test_kernel_identities(emit):
    t0 = time.perf_counter()
    worst, shape_ok, k1 = 0.0, True, []
    for k in (km.homogeneous(), km.mitosis(), km.power(1.0)):
        worst = max(worst, abs(float(k.K(2.0)) - 1))
        k1.append(float(k.K(1.0)))
        lo = k.p1 + 0.05 if math.isfinite(k.p1) else -3.0
        s = np.linspace(lo, 8.0, 50)
        K = np.array([float(k.K(v)) for v in s])
        K2 = np.array([float(k.dK(v, 2)) for v in s])
        shape_ok &= bool(np.all(np.diff(K) < 0) and np.all(K2 > 0))
    ok = worst <= 1e-12 and min(k1) > 1 and shape_ok
    assert emit(1, "kernel identities", ok, f"max|K(2)-1|={worst:.1e}, min K(1)={min(k1):.4g}, "
                f"decreasing+convex={shape_ok}", time.perf_counter() - t0, 1)


def test_region_zeros(emit):
    t0 = time.perf_counter()
    h = rg.region_report(km.homogeneous())
    m = rg.region_report(km.mitosis())
    e1, e2 = abs(h.p_bar - (2 - math.sqrt(2))), abs(h.q_bar - (2 + math.sqrt(2)))
    ok = e1 <= 1e-10 and e2 <= 1e-10 and m.p_bar < 0 and m.q_bar > 3
    assert emit(2, "region zeros", ok, f"hom errors {e1:.1e}, {e2:.1e}; mitosis p_bar={m.p_bar:.6f}, "
                f"q_bar={m.q_bar:.6f}", time.perf_counter() - t0, 1)


def test_closed_form_saddle(emit):
    t0 = time.perf_counter()
    ts = np.geomspace(0.5, 50, 20)
    xs = np.geomspace(1e-6, 0.9, 20)
    hom, mito = km.homogeneous(), km.mitosis()
    e_h = e_m = 0.0
    for t in ts:
        for x in xs:
            lx = math.log(x)
            s = am.saddle_point(hom, t, x).s_plus
            e_h = max(e_h, abs(s - math.sqrt(2 * t / -lx)) / max(1.0, abs(s)))
            s = am.saddle_point(mito, t, x).s_plus
            e_m = max(e_m, abs(s - (2 - math.log2(-lx / (t * LOG2)))) / max(1.0, abs(s)))
    ok = e_h <= 1e-10 and e_m <= 1e-10
    assert emit(3, "closed-form saddle", ok, f"max rel error hom {e_h:.1e}, mitosis {e_m:.1e}",
                time.perf_counter() - t0, 1)


def test_self_similar_order(emit):
    t0 = time.perf_counter()
    res_h = [sm.self_similar_residual(km.homogeneous(), 2.0, dy, dy / 4, -5, 25, (-3, 3))
             for dy in 0.1 / 2.0 ** np.arange(4)]
    res_m = [sm.self_similar_residual(km.mitosis(), 2.5, dy, dy / 4, -5, 25, (-3, 3))
             for dy in LOG2 / 2.0 ** np.arange(1, 5)]
    o_h = np.log2(np.array(res_h[:-1]) / np.array(res_h[1:]))
    o_m = np.log2(np.array(res_m[:-1]) / np.array(res_m[1:]))
    ok = np.all(o_h >= 3.5) and np.all(o_m >= 3.5)
    assert emit(4, "self-similar residual order", ok, f"hom orders {np.round(o_h, 2).tolist()}, "
                f"mitosis orders {np.round(o_m, 2).tolist()}", time.perf_counter() - t0, 60)


def test_mass_conservation(emit):
    t0 = time.perf_counter()
    dy = LOG2 / 16
    sol = sm.simulate_log_grid(km.mitosis(), mm.log_gaussian(-5), -60, 5, dy, dy / 4, 20.0)
    drift = float(sol.relative_mass_drift().max())
    upto = sol.times <= (sol.overflow_time if sol.overflow_time is not None else math.inf)
    leak = float(np.max(sol.leak[upto]) / sol.mass[0])
    ok = drift <= 1e-4 and leak < 1e-6
    assert emit(5, "mass conservation", ok, f"max drift {drift:.1e}, leak {leak:.1e}, "
                f"overflow_time={sol.overflow_time}", time.perf_counter() - t0, 60)


def test_three_way_agreement(emit):
    t0 = time.perf_counter()
    hom, lg = km.homogeneous(), mm.log_gaussian(-5)
    dy = LOG2 / 32
    y = -15 + dy * np.arange(int(round(20 / dy)) + 1)
    x = np.exp(y)
    idx = np.arange(0, y.size, 8)
    worst = {}
    for t in (0.5, 1.0):
        sol = sm.simulate_log_grid(hom, lg, y[0], y[-1], dy, dy / 4, t, n_snapshots=2)
        ug = sol.values[-1][idx]
        up = sm.picard_solve(hom, lg, t, x)[idx]
        um = np.array([mm.inverse_mellin_u(lg, hom, t, float(v)) for v in x[idx]])
        big = um > 1e-8 * um.max()
        for name, a, b in (("grid-picard", ug, up), ("grid-mellin", ug, um), ("picard-mellin", up, um)):
            worst[name] = max(worst.get(name, 0.0), float(np.max(np.abs(a[big] - b[big]) / b[big])))
    ok = max(worst.values()) <= 1e-3
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    assert emit(6, "three-way solver agreement", ok, detail, time.perf_counter() - t0, 300)


def test_bulk_convergence_trend(emit):
    t0 = time.perf_counter()
    hom, lg = km.homogeneous(), mm.log_gaussian(-5)
    errs = []
    for t in (25.0, 50.0, 100.0):
        x = math.exp(-0.5 * t)
        errs.append(abs(mm.inverse_mellin_u(lg, hom, t, x) / am.leading_term(lg, hom, t, x).value - 1))
    ok = errs[0] > errs[1] > errs[2] and errs[2] < 0.10
    assert emit(7, "bulk asymptotic trend", ok, "errors " + ", ".join(f"{e:.4f}" for e in errs),
                time.perf_counter() - t0, 300)


def test_large_x_exponential_error(emit):
    t0 = time.perf_counter()
    hom, d = km.homogeneous(), mm.two_sided_power(0.0, 3.0)
    ts = np.array([5.0, 10.0, 15.0])
    rel = np.array([abs(mm.inverse_mellin_u(d, hom, t, 2.0) / am.leading_term(d, hom, t, 2.0).value - 1)
                    for t in ts])
    with np.errstate(divide="ignore"):
        logs = np.log(rel)
    ok = bool(np.all(np.isfinite(logs)))
    slope = r2 = math.nan
    if ok:
        fit = np.polyfit(ts, logs, 1)
        slope = float(fit[0])
        resid = logs - np.polyval(fit, ts)
        r2 = 1 - float(np.sum(resid**2) / np.sum((logs - logs.mean()) ** 2))
        ok = slope < 0 and bool(np.all(np.diff(logs) < 0)) and r2 >= 0.99
    assert emit(8, "large-x exponential error", ok, f"|u/T1-1| = {', '.join(f'{v:.2e}' for v in rel)}; "
                f"slope {slope:.3g}, R^2 {r2:.3g}", time.perf_counter() - t0, 120)


def test_condition_h_detection(emit):
    t0 = time.perf_counter()
    a = km.condition_h([0.5])
    b = km.condition_h([0.5, 0.25])
    c = km.condition_h([0.5, 1 / 3])
    d = km.condition_h([0.49, 0.343])
    ok = (a.satisfied and abs(a.theta - 0.5) < 1e-12 and b.satisfied and abs(b.theta - 0.5) < 1e-12
          and b.exponents == (1, 2) and not c.satisfied and d.satisfied and abs(d.theta - 0.7) < 1e-9
          and d.exponents == (2, 3) and math.gcd(*d.exponents) == 1)
    assert emit(9, "condition H detection", ok, f"{{1/2}}: {a.theta:.6g} {a.exponents}; {{1/2,1/4}}: "
                f"{b.theta:.6g} {b.exponents}; {{1/2,1/3}}: {c.satisfied}; {{0.49,0.343}}: {d.theta:.6g} "
                f"{d.exponents}", time.perf_counter() - t0, 1)


def test_poisson_fourier_duality(emit):
    t0 = time.perf_counter()
    mito, lg, t = km.mitosis(), mm.log_gaussian(-5), 30.0
    worst = 0.0
    for s in np.linspace(1.1, 2.9, 10):
        x = math.exp(t * float(mito.dK(s)))
        a = am.theorem3b_series(lg, mito, t, x).value
        b = am.poisson_approx(lg, 0.5, mito, t, x)
        worst = max(worst, abs(a - b) / abs(b))
    assert emit(10, "Poisson/Fourier duality", worst <= 1e-6, f"max rel difference {worst:.1e}",
                time.perf_counter() - t0, 60)


def test_rescaled_profiles(emit):
    t0 = time.perf_counter()
    mito, lg, t = km.mitosis(), mm.log_gaussian(-5), 20.0
    dy = LOG2 / 16
    sol = sm.simulate_log_grid(mito, lg, -60, 5, dy, dy / 4, t, n_snapshots=2)
    rep = sm.rescaled_profiles(lg, mito, sm.grid_evaluator(sol), t, log_x_bounds=(sol.y[0], sol.y[-1]))
    m_err = abs(rep.mean_r - float(mito.dK(2.0)))
    v_err = abs(rep.var_rt - 1)
    ok = m_err <= 0.05 and v_err <= 0.10
    assert emit(11, "rescaled profiles", ok, f"|mean(r)/M - K'(2)| = {m_err:.4f}, |var(r~)/M - 1| = "
                f"{v_err:.4f}", time.perf_counter() - t0, 120)


def test_mitosis_support_boundaries(emit):
    t0 = time.perf_counter()
    mito = km.mitosis()
    dy = LOG2 / 16
    sol = sm.simulate_log_grid(mito, mm.log_gaussian(-5), -60, 5, dy, dy / 4, 20.0)
    b = sm.support_boundaries(sol)
    rep = rg.region_report(mito)
    lo, hi = sorted(rep.boundary_slopes)
    r2_ok = b["lower_r2"] >= 0.99 and b["upper_r2"] >= 0.99
    slopes_ok = all(lo <= b[k] <= hi for k in ("lower_slope", "upper_slope"))
    assert emit(12, "mitosis support boundaries", r2_ok and slopes_ok,
                f"R^2 {b['lower_r2']:.4f}, {b['upper_r2']:.4f}; slopes {b['lower_slope']:.3f}, "
                f"{b['upper_slope']:.3f} vs [{lo:.3f}, {hi:.3f}]", time.perf_counter() - t0, 120)


def test_critical_curve(emit):
    t0 = time.perf_counter()
    mito = km.mitosis()
    cc = rg.critical_curve_slope(mito)
    c_err = abs(cc.c - 4 * math.e * LOG2)
    phis = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for t in (1.0, 2.0, 5.0, 10.0, 20.0):
            x = math.exp(-cc.c * t)
            s = am.saddle_point(mito, t, x).s_plus
            phis.append(abs(float(np.real(am.phi_eval(mito, s, t, x)))))
    ok = c_err <= 1e-8 and max(phis) <= 1e-8
    assert emit(13, "critical curve", ok, f"c = {cc.c:.15g}, |c - 4e log2| = {c_err:.1e}, "
                f"max|phi| = {max(phis):.1e}", time.perf_counter() - t0, 1)
