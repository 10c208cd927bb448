"""Static figures written next to the CLI's tabular output (Agg backend, no display)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_simulation", "plot_exponents", "plot_profiles", "plot_compare"]


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_simulation(solution, boundaries: dict | None, path) -> Path:
    """log10 n(t, y) as an image with the 10%-of-max boundaries on top."""
    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(11, 4.2))
    vals = np.where(solution.values > 0, solution.values, np.nan)
    norm = vals / np.nanmax(vals, axis=1, keepdims=True)
    img = ax.pcolormesh(solution.y, solution.times, np.log10(norm), shading="auto", vmin=-8, vmax=0,
                        cmap="viridis")
    fig.colorbar(img, ax=ax, label="log10 n / max n")
    if boundaries is not None and boundaries["t"].size:
        for key, color in (("lower", "tab:blue"), ("upper", "tab:green")):
            ax.plot(boundaries[key], boundaries["t"], color=color, lw=1.5, label=f"{key} 10% edge")
            slope = boundaries.get(key + "_slope")
            if slope is not None and np.isfinite(slope):
                tt = boundaries["t"]
                ax.plot(slope * tt + boundaries[key + "_intercept"], tt, "k--", lw=0.8)
        ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("y = log x")
    ax.set_ylabel("t")
    drift = np.abs(solution.mass - solution.mass[0]) / solution.mass[0]
    ax2.semilogy(solution.mass_times, np.maximum(drift, 1e-18), label="|M(t) - M(0)| / M(0)")
    ax2.semilogy(solution.mass_times, np.maximum(solution.leak / solution.mass[0], 1e-18), label="leaked / M(0)")
    ax2.set_xlabel("t")
    ax2.legend(fontsize=8)
    return _save(fig, path)


def plot_exponents(curves: dict, report: dict | None, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    s = curves["s"]
    for key, vals in curves.items():
        if key == "s":
            continue
        ax.plot(s, vals, label=key)
    ax.axhline(0.0, color="k", lw=0.6)
    if report:
        for key in ("p_bar", "q_bar"):
            ax.axvline(report[key], color="grey", ls=":", lw=0.8)
    finite = np.concatenate([v[np.isfinite(v)] for k, v in curves.items() if k != "s"])
    if finite.size:
        lo, hi = np.percentile(finite, [5, 95])
        pad = 0.2 * (hi - lo + 1e-12)
        ax.set_ylim(lo - pad, hi + pad)
    ax.set_xlabel("s")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_profiles(reports, path) -> Path:
    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for rep in reports:
        ax.plot(rep.y, rep.r / rep.integral_r, label=f"t={rep.t:g}")
        ax2.plot(rep.z, rep.r_tilde / rep.integral_rt, label=f"t={rep.t:g}")
    z = np.linspace(-5, 5, 400)
    ax2.plot(z, np.exp(-z * z / 2) / np.sqrt(2 * np.pi), "k--", lw=0.8, label="N(0, 1)")
    if reports:
        ax.axvline(reports[0].center, color="k", ls=":", lw=0.8)
    ax.set_xlabel("y")
    ax.set_ylabel("r / M")
    ax2.set_xlabel("z")
    ax2.set_ylabel("r~ / M")
    ax.legend(fontsize=8)
    ax2.legend(fontsize=8)
    return _save(fig, path)


def plot_compare(x, columns: dict, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, vals in columns.items():
        vals = np.asarray(vals, dtype=float)
        ax.loglog(x, np.where(vals > 0, vals, np.nan), label=name, lw=1.0)
    ax.set_xlabel("x")
    ax.set_ylabel("u(t, x)")
    ax.legend(fontsize=8)
    return _save(fig, path)
