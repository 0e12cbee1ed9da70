"""Checks that a computed field is a weak/entropy solution with the expected structure."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .data import PiecewiseConstantDerivative, PiecewiseLinearDerivative
from .variational import (DEFAULT_SEARCH, SearchConfig, SharpKernel, SolutionField, eval_u,
                          greatest_minimizer)


@dataclass
class VerifyReport:
    check: str
    passed: Optional[bool]
    value: float
    tolerance: float = math.nan
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = asdict(self)
        for key in ("value", "tolerance"):
            if isinstance(out[key], float) and not math.isfinite(out[key]):
                out[key] = None
        return out


# ------------------------------------------------------------------ test bump

def _psi(s):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    out = np.zeros_like(s)
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si * si))
    return out


def _dpsi(s):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    out = np.zeros_like(s)
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si * si)) * (-2.0 * si / (1.0 - si * si)**2)
    return out


# integral of exp(-1/(1-s^2)) over (-1, 1)
_PSI_MASS = 0.44399381616807943


@dataclass(frozen=True)
class TestBump:
    """Product bump ``psi((x-x0)/rx) psi((t-t0)/rt)`` with unit mass."""

    __test__ = False

    x0: float
    t0: float
    rx: float
    rt: float
    amplitude: float = 1.0

    @property
    def norm(self) -> float:
        return self.amplitude / (_PSI_MASS**2 * self.rx * self.rt)

    def phi(self, x, t):
        return self.norm * _psi((x - self.x0) / self.rx) * _psi((t - self.t0) / self.rt)

    def phi_x(self, x, t):
        return self.norm * _dpsi((x - self.x0) / self.rx) / self.rx * _psi((t - self.t0) / self.rt)

    def phi_t(self, x, t):
        return self.norm * _psi((x - self.x0) / self.rx) * _dpsi((t - self.t0) / self.rt) / self.rt


def _simpson_weights(n_cells: int, sub: int, h: float) -> np.ndarray:
    # composite Simpson with `sub` (even) panels inside every solution cell
    n = n_cells * sub
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / sub) / 3.0


def weak_residual(w_fn: Callable, flux: Callable, gprime: Optional[Callable], bump: TestBump,
                  h: float, quad_n: int = 1024,
                  domain: Optional[tuple[float, float, float, float]] = None) -> float:
    """Weak-form residual of ``w_t + H(w)_x = 0`` against one test bump.

    ``w`` is sampled on a space-time grid of step ``h`` (aligned to multiples
    of ``h``), interpolated bilinearly, and the integrals

        int int (w phi_t + H(w) phi_x) dx dt + int g'(x) phi(x, 0) dx

    are evaluated by composite Simpson rules nested in the grid cells.  The
    trace term only contributes when the bump reaches ``t = 0``.
    ``w_fn(x_array, t)`` returns ``w`` on an array of ``x`` at one time.
    """
    if quad_n < 16:
        raise ValueError("quad_n must be at least 16")
    if bump.amplitude == 0.0:
        return 0.0
    xa, xb = bump.x0 - bump.rx, bump.x0 + bump.rx
    ta, tb = max(bump.t0 - bump.rt, 0.0), bump.t0 + bump.rt
    if domain is not None and not (domain[0] <= xa and xb <= domain[1]
                                   and domain[2] <= ta and tb <= domain[3]):
        raise ValueError("bump support leaves the computed domain")
    i0, i1 = math.floor(xa / h), math.ceil(xb / h)
    j0, j1 = math.floor(ta / h), math.ceil(tb / h)
    j0 = max(j0, 0)
    xs = np.arange(i0, i1 + 1) * h
    ts = np.arange(j0, j1 + 1) * h
    n_x, n_t = xs.size - 1, ts.size - 1
    sub_x = max(2, 2 * math.ceil(quad_n / (2 * n_x)))
    sub_t = max(2, 2 * math.ceil(quad_n / (2 * n_t)))

    grid_w = np.array([np.asarray(w_fn(xs, float(t)), dtype=float) for t in ts])
    qx = np.linspace(xs[0], xs[-1], n_x * sub_x + 1)
    qt = np.linspace(ts[0], ts[-1], n_t * sub_t + 1)
    # bilinear interpolation: along x at every grid time, then along t
    along_x = np.array([np.interp(qx, xs, row) for row in grid_w])
    wq = np.array([np.interp(qt, ts, along_x[:, k]) for k in range(qx.size)]).T
    X, T = np.meshgrid(qx, qt)
    integrand = wq * bump.phi_t(X, T) + np.asarray(flux(wq)) * bump.phi_x(X, T)
    wx = _simpson_weights(n_x, sub_x, h)
    wt = _simpson_weights(n_t, sub_t, h)
    total = float(wt @ integrand @ wx)
    if bump.t0 - bump.rt < 0.0 and gprime is not None:
        trace = np.asarray(gprime(qx), dtype=float) * bump.phi(qx, 0.0)
        total += float(trace @ wx)
    return total


# ----------------------------------------------------------- structural checks

def entropy_constant(field_: SolutionField, z_set: Iterable[float]) -> float:
    """Smallest ``C`` with ``w(x+z) - w(x) <= C (1 + 1/t) z`` on the grid.

    Each ``z`` is rounded to a whole number of grid steps.
    """
    x, w, t = field_.x_grid, field_.w_values, field_.t
    h = (x[-1] - x[0]) / (x.size - 1)
    worst = 0.0
    for z in z_set:
        if z <= 0:
            raise ValueError("z must be positive")
        k = max(1, int(round(z / h)))
        if k >= x.size:
            continue
        diff = w[k:] - w[:-k]
        worst = max(worst, float(np.max(diff)) / ((1.0 + 1.0 / t) * k * h))
    return max(worst, 0.0)


def oleinik_constant(min_curvature: float, t: float) -> float:
    """Entropy constant implied by ``w_x <= 1 / (theta t)`` for ``H'' >= theta``."""
    return 1.0 / (min_curvature * (t + 1.0))


def entropy_check(field_: SolutionField, z_set, min_curvature: Optional[float] = None) -> VerifyReport:
    c = entropy_constant(field_, z_set)
    if min_curvature is None:
        # sharp flux: reported only
        return VerifyReport("entropy_constant", None, c, params={"t": field_.t})
    bound = oleinik_constant(min_curvature, field_.t)
    return VerifyReport("entropy_constant", bool(c <= bound * (1 + 1e-9)), c, bound,
                        {"t": field_.t, "min_curvature": min_curvature})


def total_variation(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.sum(np.abs(np.diff(values))))


def gprime_variation(g, window: tuple[float, float], n_dense: int = 2**14) -> float:
    """Total variation of ``g'`` on ``window`` (right limits at jumps)."""
    a, b = window
    if isinstance(g, PiecewiseConstantDerivative):
        d = np.asarray(g.jumps)
        v = np.asarray(g.values)
        k = np.flatnonzero((d > a) & (d <= b))
        return float(np.sum(np.abs(v[k + 1] - v[k])))
    if isinstance(g, PiecewiseLinearDerivative):
        return g.total_variation(window)
    return total_variation(g.gprime(np.linspace(a, b, n_dense)))


def tv_bound_check(field_: SolutionField, g, tol: float = 1e-9) -> VerifyReport:
    """``TV(w) <= TV(g' on [y*(x_min), y*(x_max)])``."""
    ys = field_.y_star_values
    window = (float(ys[0]), float(ys[-1]))
    tv_w = total_variation(field_.w_values)
    tv_g = gprime_variation(g, window)
    return VerifyReport("tv_bound", bool(tv_w <= tv_g + tol * (1.0 + tv_g)), tv_w, tv_g,
                        {"window": list(window), "t": field_.t})


def monotonicity_check(field_: SolutionField, eta: float = 1e-9) -> VerifyReport:
    ys = np.asarray(field_.y_star_values, dtype=float)
    drops = ys[:-1] - ys[1:]
    worst = float(np.max(drops)) if drops.size else 0.0
    tol = eta * (1.0 + float(np.max(np.abs(ys)))) if ys.size else eta
    return VerifyReport("monotone_y_star", bool(worst <= tol), max(worst, 0.0), tol,
                        {"t": field_.t, "points": int(ys.size)})


def time_lipschitz_constant(kernel: SharpKernel, lip_g: float) -> float:
    """``max{|L(0)|, max_z (|z| Lip(g) - L(z))}`` with ``z`` over ``[m_1, m_{N+1}]``."""
    L = kernel.conj
    zs = np.unique(np.concatenate((L.break_points, [0.0])))
    inner = np.abs(zs) * lip_g - L(zs)
    return float(max(abs(L(0.0)), float(np.max(inner))))


def lipschitz_bounds_check(kernel: SharpKernel, g, x_pairs: Sequence[tuple[float, float]],
                           t_pairs: Sequence[tuple[float, float]],
                           window: Optional[tuple[float, float]] = None,
                           cfg: SearchConfig = DEFAULT_SEARCH) -> list[VerifyReport]:
    """Lipschitz bounds of ``u`` in ``x`` and ``t`` and the initial-trace bound."""
    times = sorted({t for pair in t_pairs for t in pair})
    xs = sorted({x for pair in x_pairs for x in pair})
    if window is None:
        tmax = max(times)
        lo = min(kernel.window(x, tmax)[0] for x in xs)
        hi = max(kernel.window(x, tmax)[1] for x in xs)
        window = (min(lo, min(xs)), max(hi, max(xs)))
    lip = g.lipschitz(window)
    C = time_lipschitz_constant(kernel, lip)
    u = {(x, t): eval_u(kernel, g, x, t, cfg) for x in xs for t in times}
    slack = 1e-9

    a_worst = max(abs(u[(x2, t)] - u[(x1, t)]) - lip * abs(x2 - x1)
                  for x1, x2 in x_pairs for t in times)
    b_worst = max(abs(u[(x, t)] - float(g.g(x))) - C * t for x in xs for t in times)
    c_worst = max(abs(u[(x, t2)] - u[(x, t1)]) - C * abs(t2 - t1)
                  for x in xs for t1, t2 in t_pairs)
    params = {"lip_g": lip, "C": C, "window": list(window)}
    return [
        VerifyReport("lipschitz_x", bool(a_worst <= slack), a_worst, slack, params),
        VerifyReport("initial_trace", bool(b_worst <= slack), b_worst, slack, params),
        VerifyReport("lipschitz_t", bool(c_worst <= slack), c_worst, slack, params),
    ]


def hj_residual(kernel, g, points: Sequence[tuple[float, float]], h: float,
                C_hj: float = 1.0, cfg: SearchConfig = DEFAULT_SEARCH) -> VerifyReport:
    """Central-difference residual ``|u_t + H(u_x)|`` at smooth points.

    Points whose ``y*`` jumps across ``x +/- h`` are skipped and listed.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    worst = 0.0
    skipped = []
    per_point = []
    for x, t in points:
        ya = greatest_minimizer(kernel, g, x - h, t, cfg).y_star
        yb = greatest_minimizer(kernel, g, x + h, t, cfg).y_star
        if abs(yb - ya) > 10.0 * h:
            skipped.append([x, t])
            continue
        u_x = (eval_u(kernel, g, x + h, t, cfg) - eval_u(kernel, g, x - h, t, cfg)) / (2 * h)
        u_t = (eval_u(kernel, g, x, t + h, cfg) - eval_u(kernel, g, x, t - h, cfg)) / (2 * h)
        r = abs(u_t + float(kernel.flux(u_x)))
        per_point.append(r)
        worst = max(worst, r)
    return VerifyReport("hj_residual", bool(worst <= C_hj * h), worst, C_hj * h,
                        {"h": h, "skipped": skipped, "residuals": per_point})


def field_consistency_check(field_: SolutionField, g, tol: float = 1e-9) -> VerifyReport:
    """``w == g'(y*)`` row by row (for fields loaded from disk)."""
    gp = np.asarray(g.gprime(field_.y_star_values), dtype=float)
    if isinstance(g, PiecewiseConstantDerivative):
        # at vertices of g the stored w is an L' value, which need not equal g'
        hits = np.asarray(g.at_jump(field_.y_star_values))
        gp = np.where(hits, field_.w_values, gp)
    worst = float(np.max(np.abs(gp - field_.w_values))) if gp.size else 0.0
    return VerifyReport("w_equals_gprime_of_ystar", bool(worst <= tol), worst, tol)
