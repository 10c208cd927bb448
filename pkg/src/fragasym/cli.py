"""Command-line front end.

Every command validates its whole configuration (kernel, datum, numeric
flags, input files) before computing anything, then writes its tables to
``--out`` (a directory) or to stdout.  Exit status: 0 success, 1 invalid
input or usage, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import asymptotics as asy
from . import io as fio
from . import regions as reg
from . import simulator as sim
from .errors import FragasymError, MissingTailError, NumericalError, ValidationError, DomainError
from .kernel import check_admissible, condition_h
from .mellin import inverse_mellin_detail

__all__ = ["main", "build_parser", "run_command"]

DEFAULT_GRID = {"y_min": -60.0, "y_max": 5.0, "dy": math.log(2) / 16, "t_end": 20.0}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _floats(text: str) -> list[float]:
    """Comma list, or geom:a:b:n / lin:a:b:n."""
    try:
        if text.startswith(("geom:", "lin:")):
            kind, a, b, n = text.split(":")
            fn = np.geomspace if kind == "geom" else np.linspace
            return [float(v) for v in fn(float(a), float(b), int(n))]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"cannot parse number list {text!r}") from exc


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", nargs="?", help="experiment config (JSON)")
    p.add_argument("--kernel", help="kernel spec file (JSON)")
    p.add_argument("--datum", help="datum spec file (JSON)")
    p.add_argument("--t", type=_floats, help="times, e.g. 1,2 or lin:1:10:10")
    p.add_argument("--x", type=_floats, help="sizes, e.g. 0.1,0.5 or geom:1e-6:1:64")
    p.add_argument("--c", type=float, help="growth rate for growth-fragmentation")
    p.add_argument("--kmax", type=int, help="oscillatory series truncation")
    p.add_argument("--nx", type=int, help="number of x points (compare)")
    p.add_argument("--evaluator", choices=("mellin", "grid"), help="u evaluator for profiles")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), help="table format")
    p.add_argument("--ymin", type=float)
    p.add_argument("--ymax", type=float)
    p.add_argument("--dy", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--tend", type=float)
    p.add_argument("--plot", action="store_true", help="also write PNG figures to --out")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fragasym", description="Fragmentation equation: Mellin solution, asymptotics, solvers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    kp = sub.add_parser("kernel", help="kernel utilities")
    ksub = kp.add_subparsers(dest="kernel_command", required=True, parser_class=_Parser)
    for name in ("check", "condition-h"):
        q = ksub.add_parser(name)
        q.add_argument("spec", help="kernel spec file (JSON)")
        q.add_argument("--out", help="output directory")
    for name in ("simulate", "solve-mellin", "asymptote", "regions", "compare", "profiles", "growth-frag"):
        _common(sub.add_parser(name))
    return parser


# -- configuration ------------------------------------------------------------------


def _config(args) -> fio.ExperimentConfig:
    base = fio.load_json(args.config) if args.config else {}
    if args.kernel:
        base["kernel"] = fio.load_json(args.kernel)
    if args.datum:
        base["datum"] = fio.load_json(args.datum)
    for flag in ("t", "x", "c", "kmax", "nx", "evaluator", "out", "format"):
        val = getattr(args, flag)
        if val is not None:
            base[flag] = val
    grid = dict(base.get("grid", {}))
    for flag, key in (("ymin", "y_min"), ("ymax", "y_max"), ("dy", "dy"), ("dt", "dt"), ("tend", "t_end")):
        val = getattr(args, flag)
        if val is not None:
            grid[key] = val
    if grid:
        base["grid"] = grid
    return fio.ExperimentConfig.from_dict(base)


class _Out:
    """Collects artifacts; nothing touches disk until ``flush``."""

    def __init__(self, cfg_out, fmt):
        self.dir = Path(cfg_out) if cfg_out else None
        self.fmt = fmt
        self.items: list[tuple[str, str]] = []
        self.figures = []

    def table(self, name, header, rows):
        rows = [list(r) for r in rows]
        if self.fmt == "json":
            recs = [dict(zip(header, r)) for r in rows]
            self.items.append((name + ".json", fio.json_text(recs)))
        else:
            self.items.append((name + ".csv", fio.csv_text(header, rows)))

    def json(self, name, obj):
        self.items.append((name + ".json", fio.json_text(obj)))

    def figure(self, fn, name, *a):
        self.figures.append((fn, name, a))

    def flush(self):
        if self.dir is None:
            for i, (name, text) in enumerate(self.items):
                if len(self.items) > 1:
                    print(f"# === {name} ===")
                sys.stdout.write(text)
            return
        self.dir.mkdir(parents=True, exist_ok=True)
        for name, text in self.items:
            fio.write_text(self.dir / name, text)
        if self.figures:
            from . import plotting

            for fn, name, a in self.figures:
                getattr(plotting, fn)(*a, self.dir / name)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("FRAGASYM_THREADS", "1")))
    except ValueError:
        raise DomainError("FRAGASYM_THREADS must be an integer") from None


def _pmap(fn, items):
    items = list(items)
    n = _workers()
    if n == 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _grid(cfg, kernel):
    g = {**DEFAULT_GRID, **cfg.grid}
    if "dt" not in g:
        g["dt"] = g["dy"] / 4
    if not g["y_max"] > g["y_min"]:
        raise DomainError("grid needs y_max > y_min")
    if g["dt"] * (float(kernel.K(1.0)) + 1) > 0.5:
        from .errors import StabilityError

        raise StabilityError(f"dt={g['dt']:g} violates dt (K(1) + 1) <= 0.5")
    return g


def _xs(cfg, lo=-15.0, hi=5.0):
    if cfg.x:
        return list(cfg.x)
    return [float(v) for v in np.exp(np.linspace(lo, hi, cfg.nx))]


# -- commands -----------------------------------------------------------------------


def _cmd_kernel(args) -> int:
    kernel = fio.kernel_from_spec(args.spec)
    out = _Out(args.out, "json")
    if args.kernel_command == "check":
        rep = check_admissible(kernel)
        d = rep.to_dict()
        d["p1"] = kernel.p1
        d["K(2)"] = float(kernel.K(2.0)) if kernel.p1 < 2 else None
        d["K(1)"] = float(kernel.K(1.0)) if kernel.p1 < 1 else None
        out.json("kernel_check", d)
        out.flush()
        return 0 if rep.passed else 1
    if not kernel.is_discrete:
        raise DomainError("condition-h applies to purely atomic kernels")
    out.json("condition_h", condition_h(kernel.atoms).to_dict())
    out.flush()
    return 0


def _cmd_simulate(cfg, kernel, datum, plot):
    g = _grid(cfg, kernel)
    out = _Out(cfg.out, cfg.format)
    sol = sim.simulate_log_grid(kernel, datum, g["y_min"], g["y_max"], g["dy"], g["dt"], g["t_end"])
    out.table("snapshots", ["t", "y", "n"],
              ((t, y, v) for t, row in zip(sol.times, sol.values) for y, v in zip(sol.y, row)))
    out.table("mass", ["t", "mass", "leak"], zip(sol.mass_times, sol.mass, sol.leak))
    z = np.concatenate([[0.0], np.exp(np.linspace(g["y_min"] + 5, g["y_max"], 14))])
    diag = sim.dirac_diagnostics(sol, kernel, z)
    bnd = sim.support_boundaries(sol)
    rep = reg.region_report(kernel, datum)
    out.json("diagnostics", {
        "grid": g,
        "max_relative_mass_drift": float(sol.relative_mass_drift().max()),
        "leaked_fraction": float(sol.leak[-1] / sol.mass[0]),
        "overflow_time": sol.overflow_time,
        "boundaries": {k: v for k, v in bnd.items() if not isinstance(v, np.ndarray)},
        "predicted_slope_interval": [rep.boundary_slopes[0], rep.boundary_slopes[1]],
        "dirac": diag.to_dict(),
    })
    if plot:
        out.figure("plot_simulation", "simulate.png", sol, bnd)
    return out


def _cmd_solve_mellin(cfg, kernel, datum, plot):
    pairs = [(t, x) for t in cfg.t for x in _xs(cfg)]
    res = _pmap(lambda p: inverse_mellin_detail(datum, kernel, p[0], p[1]), pairs)
    out = _Out(cfg.out, cfg.format)
    out.table("mellin", ["t", "x", "u", "imag_residue", "nu"],
              ((t, x, r.value, r.imag_residue, r.nu) for (t, x), r in zip(pairs, res)))
    return out


def _asym_row(datum, kernel, t, x, kmax):
    try:
        a = asy.leading_term(datum, kernel, t, x)
    except MissingTailError:
        return [t, x, "none", math.nan, math.nan, math.nan, math.nan, math.nan]
    s = a.saddle.s_plus if a.saddle else math.nan
    series = pois = tail = math.nan
    if a.regime == asy.T3A and asy._is_condition_h(kernel):
        b = asy.theorem3b_series(datum, kernel, t, x, k_max=kmax)
        series, tail = b.value, b.detail["tail_bound"]
        pois = asy.poisson_approx(datum, b.detail["theta"], kernel, t, x)
    return [t, x, a.regime, a.value, s, series, pois, tail]


def _cmd_asymptote(cfg, kernel, datum, plot):
    pairs = [(t, x) for t in cfg.t for x in _xs(cfg)]
    if any(t <= 0 for t, _ in pairs):
        raise DomainError("asymptote needs t > 0")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        rows = [_asym_row(datum, kernel, t, x, cfg.kmax) for t, x in pairs]
    out = _Out(cfg.out, cfg.format)
    out.table("asymptote", ["t", "x", "regime", "value", "s_plus", "series_value", "poisson_value", "tail_bound"],
              rows)
    return out


def _cmd_regions(cfg, kernel, datum, plot):
    rep = reg.region_report(kernel, datum)
    crit = reg.critical_curve_slope(kernel)
    d = {"region": rep.to_dict(), "critical_curve": crit.to_dict() if crit else None}
    if cfg.c is not None:
        d["growth_fragmentation"] = reg.classify_growth_frag(kernel, datum, cfg.c).to_dict()
    lo = rep.p_bar - 1.0
    if math.isfinite(kernel.p1):
        lo = max(lo, kernel.p1 + 0.02 * (rep.p_bar - kernel.p1))
    s = np.linspace(lo, rep.q_bar + 1.0, 401)
    ps = [p for p in (datum.p0, datum.q0) if math.isfinite(p) and p > kernel.p1]
    curves = reg.exponent_curves(kernel, s, ps)
    out = _Out(cfg.out, cfg.format)
    out.json("regions", d)
    names = list(curves)
    out.table("exponent_curves", names, zip(*[curves[k] for k in names]))
    if plot:
        out.figure("plot_exponents", "regions.png", curves, rep.to_dict())
    return out


def _cmd_compare(cfg, kernel, datum, plot):
    g = {"y_min": -15.0, "y_max": 5.0, **cfg.grid}
    refine = 8
    nx = cfg.nx
    y_out = np.linspace(g["y_min"], g["y_max"], nx)
    dy = (g["y_max"] - g["y_min"]) / ((nx - 1) * refine)
    dt = g.get("dt", dy / 4)
    if dt * (float(kernel.K(1.0)) + 1) > 0.5:
        raise DomainError("dt too large for the stability bound")
    x_fine = np.exp(g["y_min"] + dy * np.arange((nx - 1) * refine + 1))
    x_out = np.exp(y_out)
    rows, summary = [], {}
    for t in cfg.t:
        sol = sim.simulate_log_grid(kernel, datum, g["y_min"], g["y_max"], dy, dt, t, n_snapshots=2)
        ug = sol.values[-1][::refine]
        up = sim.picard_solve(kernel, datum, t, x_fine)[::refine] if t > 0 else datum(x_out)
        um = np.array(_pmap(lambda x: inverse_mellin_detail(datum, kernel, t, x).value, x_out))
        ua, regimes = [], []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            for x in x_out:
                try:
                    a = asy.leading_term(datum, kernel, t, x) if t > 0 else None
                    ua.append(a.value if a else math.nan)
                    regimes.append(a.regime if a else "none")
                except MissingTailError:
                    ua.append(math.nan)
                    regimes.append("none")
        ua = np.array(ua)
        reliable = um > 1e-8 * np.max(um)

        def dev(a, b):
            return np.abs(a - b) / np.maximum(np.abs(b), 1e-300)

        d_gp, d_gm, d_pm, d_am = dev(ug, up), dev(ug, um), dev(up, um), dev(ua, um)
        for i in range(nx):
            rows.append([t, x_out[i], ug[i], up[i], um[i], ua[i], regimes[i], d_gp[i], d_gm[i], d_pm[i], d_am[i],
                         bool(reliable[i])])
        summary[repr(float(t))] = {
            "max_dev_grid_picard": float(np.max(d_gp[reliable])),
            "max_dev_grid_mellin": float(np.max(d_gm[reliable])),
            "max_dev_picard_mellin": float(np.max(d_pm[reliable])),
            "reliable_points": int(np.count_nonzero(reliable)),
        }
        if plot:
            cfg_plot = {"grid": ug, "picard": up, "mellin": um, "asymptotic": ua}
    out = _Out(cfg.out, cfg.format)
    out.table("compare", ["t", "x", "u_grid", "u_picard", "u_mellin", "u_asymptotic", "regime",
                          "dev_grid_picard", "dev_grid_mellin", "dev_picard_mellin", "dev_asymptotic_mellin",
                          "reliable"], rows)
    out.json("compare_summary", summary)
    if plot:
        out.figure("plot_compare", "compare.png", x_out, cfg_plot)
    return out


def _cmd_profiles(cfg, kernel, datum, plot):
    if any(t <= 0 for t in cfg.t):
        raise DomainError("profiles need t > 0")
    reps, exact = [], {}
    for t in cfg.t:
        if cfg.evaluator == "grid":
            g = _grid(cfg, kernel)
            sol = sim.simulate_log_grid(kernel, datum, g["y_min"], g["y_max"], g["dy"], g["dt"], t, n_snapshots=2)
            ev = sim.grid_evaluator(sol)
            bounds = (float(sol.y[0]), float(sol.y[-1]))
        else:
            ev = sim.mellin_evaluator(datum, kernel)
            bounds = None
        reps.append(sim.rescaled_profiles(datum, kernel, ev, t, log_x_bounds=bounds))
        exact[repr(float(t))] = sim.exact_profile_moments(datum, kernel, t)
    out = _Out(cfg.out, cfg.format)
    out.table("profile_r", ["t", "y", "r"], ((r.t, y, v) for r in reps for y, v in zip(r.y, r.r)))
    out.table("profile_r_tilde", ["t", "z", "r_tilde"], ((r.t, z, v) for r in reps for z, v in zip(r.z, r.r_tilde)))
    out.json("profile_moments", {"mass": datum.mass, "computed": [r.moments() for r in reps], "exact": exact})
    if plot:
        out.figure("plot_profiles", "profiles.png", reps)
    return out


def _cmd_growth_frag(cfg, kernel, datum, plot):
    if cfg.c is None:
        raise DomainError("growth-frag needs --c")
    cls = reg.classify_growth_frag(kernel, datum, cfg.c)
    ev = sim.mellin_evaluator(datum, kernel)
    pairs = [(t, x) for t in cfg.t for x in _xs(cfg)]
    vals = _pmap(lambda p: float(sim.growth_frag_transform(ev, cfg.c, p[0], np.array([p[1]]))[0]), pairs)
    out = _Out(cfg.out, cfg.format)
    out.table("growth_frag", ["t", "x", "v"], ((t, x, v) for (t, x), v in zip(pairs, vals)))
    out.json("classification", cls.to_dict())
    return out


_COMMANDS = {
    "simulate": _cmd_simulate,
    "solve-mellin": _cmd_solve_mellin,
    "asymptote": _cmd_asymptote,
    "regions": _cmd_regions,
    "compare": _cmd_compare,
    "profiles": _cmd_profiles,
    "growth-frag": _cmd_growth_frag,
}


def run_command(argv) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "kernel":
        return _cmd_kernel(args)
    cfg = _config(args)
    kernel = fio.kernel_from_spec(cfg.kernel)
    datum = fio.datum_from_spec(cfg.datum)
    if args.plot and not cfg.out:
        raise DomainError("--plot needs --out")
    rep = check_admissible(kernel)
    if not rep.passed:
        bad = [e.name for e in rep.entries if not e.passed]
        raise DomainError(f"kernel is not admissible: {bad}")
    out = _COMMANDS[args.command](cfg, kernel, datum, args.plot)
    out.flush()
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        return run_command(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ValidationError as exc:
        print(f"fragasym: invalid input: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"fragasym: numerical failure: {exc}", file=sys.stderr)
        return 2
    except FragasymError as exc:
        print(f"fragasym: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
