"""Figures for CLI runs.  matplotlib is an optional extra, imported on first use."""

from __future__ import annotations

import os

import numpy as np

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (5.0, 3.2),
    "savefig.dpi": 150,
    "lines.linewidth": 1.2,
}


def _plt():
    try:
        import matplotlib
    except ImportError as exc:
        raise RuntimeError("figures need matplotlib (pip install 'artifact[plot]')") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams.update(STYLE)
    return plt


def new(nrows=1, ncols=1, **kw):
    plt = _plt()
    return plt.subplots(nrows=nrows, ncols=ncols, **kw)


def save(fig, path):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    _plt().close(fig)
    return path


def conjugate_figure(L, path):
    lo, hi = L.domain
    pad = 0.1 * (hi - lo)
    p = np.linspace(lo - pad, hi + pad, 801)
    vals = L(p)
    fig, ax = new()
    ax.plot(p, np.where(np.isfinite(vals), vals, np.nan), color="k")
    ax.plot(L.break_points, L.values_at_breaks, "o", ms=3, color="C3")
    for edge in (lo, hi):
        ax.axvline(edge, ls=":", color="0.5")
    ax.set_xlabel("p")
    ax.set_ylabel("L(p)")
    return save(fig, path)


def field_figure(fields, path):
    fig, (a1, a2) = new(2, 1, sharex=True, figsize=(5.0, 4.6))
    for fld in fields:
        a1.plot(fld.x_grid, fld.w_values, label=f"t={fld.t:g}")
        a2.plot(fld.x_grid, fld.y_star_values)
    a1.set_ylabel("w")
    a2.set_ylabel("y*")
    a2.set_xlabel("x")
    a1.legend(frameon=False)
    return save(fig, path)


def convergence_figure(report, path):
    eps = np.asarray(report.epsilons)
    fig, ax = new()
    ax.loglog(eps, report.conjugate_gaps, "o-", label="conjugate gap")
    ax.loglog(eps, np.maximum(report.w_errors, 1e-16), "s-", label="sup |w_eps - w|")
    ax.loglog(eps, eps, ":", color="0.5", label="slope 1")
    ax.set_xlabel("epsilon")
    ax.legend(frameon=False)
    return save(fig, path)


def ensemble_figure(stats, path):
    fig, (a1, a2) = new(2, 1, sharex=True, figsize=(5.0, 4.6))
    a1.errorbar(stats.x_grid, stats.mean_w, yerr=stats.ci_half, fmt="o-", capsize=2)
    a1.axhline(0.0, ls=":", color="0.5")
    a1.set_ylabel("mean w")
    a2.errorbar(stats.x_grid, stats.var_w, yerr=stats.var_ci_half, fmt="o-", capsize=2, label="var w")
    a2.plot(stats.x_grid, stats.mean_y_star, "s--", label="mean y*")
    a2.set_xlabel("x")
    a2.legend(frameon=False)
    return save(fig, path)
