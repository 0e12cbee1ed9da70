"""Monte Carlo ensembles of solutions driven by Brownian initial data.

Every path is a two-sided Brownian motion ``g'`` pinned at ``g'(0) = 0``,
linearly interpolated between samples, so the Hopf-Lax problem of each path
is solved by the exact cellwise search.  Paths draw from generator streams
spawned deterministically from one master seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import isotonic_regression

from .data import sample_brownian
from .pwl import PwlConvex
from .variational import DEFAULT_SEARCH, SearchConfig, SharpKernel, min_x_derivative, solve_field
from .verify import VerifyReport, monotonicity_check


class EnsembleConfigError(ValueError):
    """The sampling window does not cover every feasible interval."""


@dataclass(frozen=True)
class PathConfig:
    step: float = 0.01
    scale: float = 1.0          # 0 gives the zero-noise generator
    margin: float = 0.1         # fraction of the feasible hull added on each side
    window: Optional[tuple[float, float]] = None   # explicit override

    def to_json(self) -> dict:
        return {"step": self.step, "scale": self.scale, "margin": self.margin,
                "window": list(self.window) if self.window is not None else None}


def feasible_hull(H: PwlConvex, x_grid, t: float) -> tuple[float, float]:
    x = np.asarray(x_grid, dtype=float)
    return float(x.min() - H.slopes[-1] * t), float(x.max() - H.slopes[0] * t)


def path_window(H: PwlConvex, path_cfg: PathConfig, x_grid, t: float) -> tuple[float, float]:
    lo, hi = feasible_hull(H, x_grid, t)
    if path_cfg.window is not None:
        a, b = path_cfg.window
        if not (a <= lo and hi <= b):
            raise EnsembleConfigError(
                f"path window [{a}, {b}] does not cover the feasible interval; "
                f"required window is at least [{lo}, {hi}]")
        return float(a), float(b)
    pad = path_cfg.margin * (hi - lo)
    # the sampler pins B(0) = 0, so the grid must reach the origin
    return min(lo - pad, 0.0), max(hi + pad, 0.0)


@dataclass
class EnsembleStats:
    x_grid: np.ndarray
    t: float
    n_paths: int
    mean_w: np.ndarray
    var_w: np.ndarray
    mean_y_star: np.ndarray
    ci_half: np.ndarray          # 3 standard errors of mean_w
    var_ci_half: np.ndarray      # 3 standard errors of var_w
    seed: Optional[int]
    config: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    def rows(self):
        return [(float(x), float(m), float(v), float(y), float(c)) for x, m, v, y, c in
                zip(self.x_grid, self.mean_w, self.var_w, self.mean_y_star, self.ci_half)]

    def to_json(self) -> dict:
        return {"x": self.x_grid.tolist(), "t": self.t, "n_paths": self.n_paths,
                "mean_w": self.mean_w.tolist(), "var_w": self.var_w.tolist(),
                "mean_ystar": self.mean_y_star.tolist(), "ci_half": self.ci_half.tolist(),
                "var_ci_half": self.var_ci_half.tolist(), "seed": self.seed,
                "config": self.config, "checks": [c.to_json() for c in self.checks]}


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("POLYFLUX_THREADS", "1")))
    except ValueError:
        return 1


def ensemble_run(H: PwlConvex, path_cfg: PathConfig, x_grid, t: float, n_paths: int,
                 seed: Optional[int] = None, cfg: SearchConfig = DEFAULT_SEARCH,
                 n_crosscheck: int = 8) -> EnsembleStats:
    """Solve ``n_paths`` Brownian problems on ``x_grid`` at time ``t`` and aggregate."""
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    if t <= 0:
        raise ValueError("t must be positive")
    x_grid = np.asarray(x_grid, dtype=float)
    kernel = SharpKernel(H)
    lo, hi = path_window(H, path_cfg, x_grid, t)
    children = np.random.SeedSequence(seed).spawn(n_paths)

    def one(ss):
        path = sample_brownian(lo, hi, path_cfg.step, ss, scale=path_cfg.scale)
        if not path.covers(feasible_hull(H, x_grid, t)):
            raise EnsembleConfigError(
                f"sampled grid [{path.knots[0]}, {path.knots[-1]}] misses the feasible interval "
                f"{feasible_hull(H, x_grid, t)}")
        fld = solve_field(kernel, path, x_grid, t, cfg)
        return fld.w_values, fld.y_star_values, monotonicity_check(fld, cfg.eta).passed

    workers = _threads()
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as pool:
            out = list(pool.map(one, children))
    else:
        out = [one(ss) for ss in children]

    W = np.array([o[0] for o in out])
    Y = np.array([o[1] for o in out])
    mono_ok = [o[2] for o in out]
    n = n_paths
    mean_w = W.mean(axis=0)
    var_w = W.var(axis=0, ddof=1)
    m4 = np.mean((W - mean_w) ** 4, axis=0)
    var_se = np.sqrt(np.maximum(m4 - var_w ** 2, 0.0) / n)

    checks = [VerifyReport("per_path_monotone", all(mono_ok), float(n - sum(mono_ok)), 0.0,
                           {"paths": n})]
    checks.append(_crosscheck(kernel, H, path_cfg, (lo, hi), children, x_grid, t, W, cfg,
                              n_crosscheck, seed))
    config = {"flux": H.to_json(), "path": path_cfg.to_json(), "window": [lo, hi],
              "t": float(t), "n_paths": n, "search": {"M": cfg.M, "eta": cfg.eta}}
    return EnsembleStats(x_grid, float(t), n, mean_w, var_w, Y.mean(axis=0),
                         3.0 * np.sqrt(var_w / n), 3.0 * var_se, seed, config, checks)


def _crosscheck(kernel, H, path_cfg, window, children, x_grid, t, W, cfg, k, seed):
    # w = g'(y*) against a finite-difference derivative of u at random (x, path) pairs
    if k <= 0:
        return VerifyReport("w_vs_du_dx", None, float("nan"), 10.0 * path_cfg.step, {"pairs": 0})
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0].generate_state(1)[0])
    worst = 0.0
    for _ in range(k):
        i = int(rng.integers(len(children)))
        j = int(rng.integers(x_grid.size))
        path = sample_brownian(window[0], window[1], path_cfg.step, children[i], scale=path_cfg.scale)
        d = min_x_derivative(kernel, path, float(x_grid[j]), t, cfg=cfg)
        worst = max(worst, abs(d.value - W[i, j]))
    tol = 10.0 * path_cfg.step
    return VerifyReport("w_vs_du_dx", bool(worst <= tol), worst, tol, {"pairs": k})


def variance_profile(stats: EnsembleStats) -> dict:
    """Trend of ``var_w`` in ``|x|`` (asserted within bands) next to ``E[y*]`` (reported)."""
    ax = np.abs(stats.x_grid)
    order = np.argsort(ax, kind="stable")
    band = np.maximum(stats.var_ci_half, 1e-12)
    fit = np.empty_like(stats.var_w)
    if stats.var_w.size:
        # weights 1/band^2 so tight estimates dominate the monotone fit
        fit[order] = isotonic_regression(stats.var_w[order], weights=1.0 / band[order] ** 2).x
    resid = np.abs(stats.var_w - fit)
    trend_ok = bool(np.all(resid <= band))

    sym = []
    xs = stats.x_grid
    for a in range(xs.size):
        for b in range(a + 1, xs.size):
            if xs[a] != 0.0 and np.isclose(xs[a], -xs[b], atol=1e-12):
                gap = abs(stats.var_w[a] - stats.var_w[b])
                sym.append((float(xs[a]), float(xs[b]), gap,
                            bool(gap <= np.hypot(band[a], band[b]))))
    identity_gap = stats.var_w - stats.mean_y_star
    report = VerifyReport("variance_trend", trend_ok, float(np.max(resid - band, initial=-np.inf)), 0.0,
                          {"t": stats.t, "n_paths": stats.n_paths})
    return {"trend": report, "isotonic_fit": fit, "residual": resid, "band": band,
            "symmetry": sym, "symmetry_passed": all(s[3] for s in sym),
            "var_w": stats.var_w, "mean_y_star": stats.mean_y_star,
            "var_minus_ystar": identity_gap}
