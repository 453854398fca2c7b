"""Figures rendered from the CSV tables; the CSV header selects the plot."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .output import read_csv  # noqa: E402

CONVERGENCE_HEADER = ["scheme", "epsilon", "dt", "error", "flag"]
STABILITY_HEADER = ["scheme", "xi", "z", "a_boundary"]
DIAGNOSTICS_HEADER = ["step", "time", "mass", "momentum", "energy", "entropy", "min_f"]


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def _floats(col):
    return np.array([float(c) for c in col])


def plot_convergence(header, rows, path) -> Path:
    i = {h: k for k, h in enumerate(header)}
    groups = defaultdict(list)
    for r in rows:
        groups[r[i["epsilon"]]].append(r)
    eps = sorted(groups, key=float, reverse=True)
    fig, axes = plt.subplots(1, len(eps), figsize=(4.5 * len(eps), 4), squeeze=False)
    for ax, e in zip(axes[0], eps):
        by_scheme = defaultdict(list)
        for r in groups[e]:
            by_scheme[r[i["scheme"]]].append((float(r[i["dt"]]), float(r[i["error"]])))
        for s, pts in by_scheme.items():
            pts = sorted(p for p in pts if np.isfinite(p[1]) and p[1] > 0)
            if pts:
                d, err = zip(*pts)
                ax.loglog(d, err, "o-", label=s, ms=4)
        ax.set_title(f"eps = {float(e):g}")
        ax.set_xlabel("dt")
        ax.grid(True, which="both", alpha=0.3)
    axes[0, 0].set_ylabel("L1 error")
    axes[0, -1].legend(fontsize=7)
    return _save(fig, path)


def plot_stability(header, rows, path) -> Path:
    i = {h: k for k, h in enumerate(header)}
    curves = defaultdict(lambda: defaultdict(list))
    for r in rows:
        curves[r[i["scheme"]]][float(r[i["xi"]])].append((float(r[i["z"]]), float(r[i["a_boundary"]])))
    names = list(curves)
    ncol = min(4, len(names))
    nrow = -(-len(names) // ncol)
    fig, axes = plt.subplots(nrow, ncol, figsize=(3.6 * ncol, 3 * nrow), squeeze=False)
    for ax, s in zip(axes.flat, names):
        for xi in sorted(curves[s]):
            z, a = zip(*sorted(curves[s][xi]))
            ax.plot(z, a, lw=2.2 if xi == 0 else 1.0, color="k" if xi == 0 else None, label=f"{xi:g}")
        ax.set_xscale("log")
        ax.set_title(s, fontsize=9)
        ax.set_xlabel("z = mu dt / eps")
        ax.set_ylabel("a* = v dt / dx")
    for ax in list(axes.flat)[len(names):]:
        ax.axis("off")
    list(axes.flat)[0].legend(title="xi", fontsize=6)
    return _save(fig, path)


def plot_diagnostics(header, rows, path) -> Path:
    i = {h: k for k, h in enumerate(header)}
    cols = list(zip(*rows))
    t = _floats(cols[i["time"]])
    fig, axes = plt.subplots(1, 3, figsize=(13, 3.5))
    for name in ("mass", "momentum", "energy"):
        v = _floats(cols[i[name]])
        scale = abs(v[0]) if v[0] != 0 else max(np.max(np.abs(v)), 1e-300)
        axes[0].semilogy(t, np.abs(v - v[0]) / scale + 1e-17, label=name)
    axes[0].set_title("relative drift")
    axes[0].legend()
    axes[1].plot(t, _floats(cols[i["entropy"]]))
    axes[1].set_title("entropy")
    axes[2].plot(t, _floats(cols[i["min_f"]]))
    axes[2].set_title("min f")
    for ax in axes:
        ax.set_xlabel("t")
    return _save(fig, path)


def plot_moments(header, rows, path) -> Path:
    i = {h: k for k, h in enumerate(header)}
    cols = list(zip(*rows))
    x = _floats(cols[i["x"]])
    fig, axes = plt.subplots(1, 3, figsize=(13, 3.5))
    for ax, name in zip(axes, ("rho", "u0", "T")):
        ax.plot(x, _floats(cols[i[name]]), ".-", ms=3)
        ax.set_title(name)
        ax.set_xlabel("x")
    return _save(fig, path)


def render_csv(csv_path, png_path=None) -> Path:
    """Render the figure matching a CSV written by this package (PNG next to it by default)."""
    header, rows = read_csv(csv_path)
    png_path = Path(png_path) if png_path else Path(csv_path).with_suffix(".png")
    if not rows:
        raise ValueError(f"{csv_path}: no data rows to plot")
    if header[:4] == CONVERGENCE_HEADER[:4]:
        return plot_convergence(header, rows, png_path)
    if header == STABILITY_HEADER:
        return plot_stability(header, rows, png_path)
    if header == DIAGNOSTICS_HEADER:
        return plot_diagnostics(header, rows, png_path)
    if header[:2] == ["x", "rho"]:
        return plot_moments(header, rows, png_path)
    raise ValueError(f"{csv_path}: no figure for columns {header}")
