"""Hopf-Lax minimization and the solution ``w(x, t) = g'(y*(x, t))``.

The functional is ``Q(y; x, t) = f(y; x, t) + g(y)`` where the kernel ``f`` is
``t L((x - y) / t)`` for a polygonal flux (:class:`SharpKernel`), the same with
a smooth numerical conjugate (:class:`SmoothKernel`), or the bare parabola
``(x - y)**2`` (:class:`TestQuadratic`).  ``y*`` is always the *greatest*
global minimizer.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .data import PiecewiseConstantDerivative, PiecewiseLinearDerivative
from .pwl import ConjugateFn, PwlConvex, conjugate, conjugate_eval, eval_pwl

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class DivergenceError(RuntimeError):
    """The functional is unbounded below on the search window."""


class Kind(str, enum.Enum):
    VERTEX_OF_L = "VertexOfL"
    FLAT_SEGMENT = "FlatSegment"
    VERTEX_OF_G = "VertexOfG"
    COINCIDENT = "Coincident"


@dataclass(frozen=True)
class SearchConfig:
    M: int = 1024
    eta: float = 1e-9
    golden_tol: float = 1e-12
    window: Optional[tuple[float, float]] = None
    degenerate_width: float = 1e-6
    dense_points: int = 2**14
    max_refine: int = 64

    def tie_tol(self, q_min: float) -> float:
        return self.eta * (1.0 + abs(q_min))


DEFAULT_SEARCH = SearchConfig()


@dataclass(frozen=True)
class MinimizerResult:
    y_star: float
    q_min: float
    kind: Kind
    multiple: bool
    candidates: tuple[tuple[float, float], ...] = ()


# --------------------------------------------------------------------- kernels

class SharpKernel:
    """``t L((x - y) / t)`` with ``L`` the exact conjugate of a polygonal flux."""

    def __init__(self, flux: PwlConvex, conj: Optional[ConjugateFn] = None):
        flux.check_flux()
        self.flux_fn = flux
        self.conj = conj if conj is not None else conjugate(flux)
        self._m = np.asarray(self.conj.break_points)
        self._ml = list(self.conj.break_points)
        self._cl = list(self.conj.segment_slopes)
        self._ll = list(self.conj.values_at_breaks)

    def flux(self, q):
        return eval_pwl(self.flux_fn, q)

    def value_scalar(self, x: float, y: float, t: float) -> float:
        m = self._ml
        p = (x - y) / t
        slack = 1e-12 * (1.0 + abs(p))
        if p < m[0]:
            if p < m[0] - slack:
                return math.inf
            p = m[0]
        elif p > m[-1]:
            if p > m[-1] + slack:
                return math.inf
            p = m[-1]
        if not self._cl:
            return t * self._ll[0]
        j = min(max(bisect.bisect_right(m, p) - 1, 0), len(self._cl) - 1)
        return t * (self._ll[j] + self._cl[j] * (p - m[j]))

    def value(self, x, y, t):
        p = (x - np.asarray(y, dtype=float)) / t
        lo, hi = self._m[0], self._m[-1]
        # absorb rounding at the feasible endpoints y = x - m t
        slack = 1e-12 * (1.0 + np.abs(p))
        p = np.where((p < lo) & (p >= lo - slack), lo, p)
        p = np.where((p > hi) & (p <= hi + slack), hi, p)
        return t * conjugate_eval(self.conj, p)

    def window(self, x, t):
        return x - self._m[-1] * t, x - self._m[0] * t

    def dy(self, x: float, y: float, t: float) -> float:
        """``d/dy`` of the kernel (a one-sided slope at vertices)."""
        p = min(max((x - y) / t, self._ml[0]), self._ml[-1])
        return -float(self.conj.derivative(p))

    def vertices(self, x, t):
        return x - self._m * t


class SmoothKernel:
    """``t Lhat((x - y) / t)`` for a finite smooth conjugate ``Lhat``.

    ``window_fn(x, t)`` must return a ``y`` interval that contains every
    minimizer.
    """

    def __init__(self, conj_fn: Callable, window_fn: Callable, flux_fn: Optional[Callable] = None,
                 conj_deriv: Optional[Callable] = None):
        self.conj_fn = conj_fn
        self.window_fn = window_fn
        self.flux_fn = flux_fn
        self.conj_deriv = conj_deriv

    def flux(self, q):
        if self.flux_fn is None:
            raise NotImplementedError("this kernel carries no flux")
        return self.flux_fn(q)

    def value(self, x, y, t):
        return t * self.conj_fn((x - np.asarray(y, dtype=float)) / t)

    def dy(self, x: float, y: float, t: float) -> Optional[float]:
        if self.conj_deriv is None:
            return None
        return -float(self.conj_deriv((x - y) / t))

    def window(self, x, t):
        return self.window_fn(x, t)

    def vertices(self, x, t):
        return np.empty(0)


class TestQuadratic:
    """The parabola ``f(y; x) = (x - y)**2``; ``t`` is ignored."""

    __test__ = False  # not a pytest class

    def value(self, x, y, t):
        return (x - np.asarray(y, dtype=float))**2

    def window(self, x, t):
        return None

    def vertices(self, x, t):
        return np.empty(0)

    def dy(self, x, y, t):
        return -2.0 * (x - y)

    def flux(self, q):
        # conjugate of p**2 is q**2 / 4
        return 0.25 * np.asarray(q, dtype=float)**2


# ----------------------------------------------------------------- functional

def functional_Q(kernel, g, x: float, t: float, y):
    if t <= 0:
        raise ValueError("t must be positive")
    return kernel.value(x, y, t) + g.g(y)


def golden_section(f, a: float, b: float, tol: float = 1e-12, max_iter: int = 200):
    """Minimise a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _bisect_edge(pred, inside: float, outside: float, tol: float) -> float:
    """Last point from ``inside`` towards ``outside`` where ``pred`` holds."""
    while abs(outside - inside) > tol:
        mid = 0.5 * (inside + outside)
        if pred(mid):
            inside = mid
        else:
            outside = mid
    return inside


def greatest_minimizer(kernel, g, x: float, t: float,
                       cfg: SearchConfig = DEFAULT_SEARCH) -> MinimizerResult:
    """Global minimum of ``Q`` and its greatest minimizer ``y*``."""
    if t <= 0:
        raise ValueError("t must be positive")
    if isinstance(kernel, SharpKernel):
        if isinstance(g, PiecewiseConstantDerivative):
            return discrete_exact_minimizer(kernel.conj, g, x, t)
        if isinstance(g, PiecewiseLinearDerivative):
            return _exact_piecewise_quadratic(kernel, g, x, t, cfg)
    return _grid_search(kernel, g, x, t, cfg)


def _grid_search(kernel, g, x, t, cfg: SearchConfig) -> MinimizerResult:
    win = kernel.window(x, t)
    if win is None:
        win = cfg.window
    if win is None:
        raise ValueError("this kernel has no finite domain; set SearchConfig.window")
    lo, hi = float(win[0]), float(win[1])
    verts = np.asarray(kernel.vertices(x, t), dtype=float)
    verts = verts[(verts >= lo) & (verts <= hi)]

    def Q(y):
        return kernel.value(x, y, t) + g.g(y)

    scalar_kernel = getattr(kernel, "value_scalar", None)

    def Qs(y):
        if scalar_kernel is not None:
            return scalar_kernel(x, y, t) + float(g.g(y))
        return float(Q(y))

    degenerate = hi - lo <= cfg.degenerate_width
    if degenerate:
        ys = np.linspace(lo, hi, cfg.dense_points)
    else:
        edges = np.unique(np.concatenate(([lo, hi], verts)))
        ys = np.unique(np.concatenate([np.linspace(a, b, cfg.M) for a, b in zip(edges[:-1], edges[1:])]))
    qs = np.asarray(Q(ys), dtype=float)
    if np.any(np.isnan(qs)) or np.any(qs == -np.inf):
        raise DivergenceError(f"Q is not bounded below near x={x}, t={t}")

    cand_y = [lo, hi, *verts.tolist()]
    cand_q = [Qs(lo), Qs(hi), *[Qs(v) for v in verts]]

    if not degenerate:
        n = qs.size
        left = np.concatenate(([np.inf], qs[:-1]))
        right = np.concatenate((qs[1:], [np.inf]))
        is_min = (qs <= left) & (qs <= right) & np.isfinite(qs)
        # refine every run of grid minima; two grid points straddling a
        # smooth minimum can tie exactly, which is not a flat stretch
        runs = sorted(_runs(is_min), key=lambda r: np.min(qs[r[0]:r[1]]))
        for start, stop in runs[:cfg.max_refine]:
            a, b = ys[max(start - 1, 0)], ys[min(stop, n - 1)]
            yr = _root_refine(kernel, g, x, t, a, b)
            if yr is None:
                yr, qr = golden_section(Qs, a, b, cfg.golden_tol)
            else:
                qr = Qs(yr)
            cand_y.append(yr)
            cand_q.append(qr)

    if degenerate:
        cand_y.extend(ys.tolist())
        cand_q.extend(qs.tolist())
    cy = np.asarray(cand_y)
    cq = np.asarray(cand_q)
    q_min = float(min(np.min(cq), np.min(qs)))
    if not np.isfinite(q_min):
        raise DivergenceError(f"no finite value of Q near x={x}, t={t}")
    tol = cfg.tie_tol(q_min)
    level = q_min + tol

    multiple = False
    tied_grid = qs <= level
    if np.count_nonzero(tied_grid) >= 2:
        runs = _runs(tied_grid)
        for start, stop in runs:
            if stop - start < 2:
                continue
            # a run of tied grid points is a flat stretch of minimizers
            multiple = True
            cy = np.append(cy, ys[start:stop])
            cq = np.append(cq, qs[start:stop])
            if stop < ys.size:
                edge = _bisect_edge(lambda y: Qs(y) <= level, ys[stop - 1], ys[stop], cfg.golden_tol)
                cy = np.append(cy, edge)
                cq = np.append(cq, Qs(edge))

    tied = cq <= level
    ty, tq = cy[tied], cq[tied]
    y_star = float(np.max(ty))
    step = (hi - lo) / max(ys.size - 1, 1)
    if np.max(ty) - np.min(ty) > max(2.0 * step, 1e-6):
        multiple = True

    kind = Kind.FLAT_SEGMENT
    all_v = np.concatenate((verts, [lo, hi])) if isinstance(kernel, SharpKernel) else verts
    # curvature breaks of g (edges of a stiff wall, say) end flat stretches too
    g_breaks = np.asarray(getattr(g, "breaks", ()), dtype=float)
    g_breaks = g_breaks[(g_breaks >= lo) & (g_breaks <= hi)]
    snap_to = np.concatenate((all_v, g_breaks))
    vtol = 1e-8 * (1.0 + abs(x) + abs(hi - lo))
    if snap_to.size and np.min(np.abs(snap_to - y_star)) <= vtol:
        # refined points a hair off the vertex tie with it; report the vertex
        k = int(np.argmin(np.abs(snap_to - y_star)))
        vertex = float(snap_to[k])
        if k < all_v.size:
            kind = Kind.VERTEX_OF_L
        ty = np.where(np.abs(ty - vertex) <= vtol, vertex, ty)
        y_star = vertex
    order = np.argsort(ty)
    cands = _dedupe(ty[order], tq[order], cfg.golden_tol * 10)
    return MinimizerResult(y_star, q_min, kind, multiple, cands)


def _root_refine(kernel, g, x, t, a, b):
    # Q' = f_y + g' changes sign from - to + across a bracketed minimum; its
    # root is found to float precision, where golden section on Q stalls near
    # sqrt(machine eps)
    dy = getattr(kernel, "dy", None)
    if dy is None:
        return None

    def dQ(y):
        d = dy(x, y, t)
        return None if d is None else d + float(g.gprime(y))

    da, db = dQ(a), dQ(b)
    if da is None or db is None or not (da < 0.0 < db):
        return None
    return float(brentq(dQ, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def _runs(mask: np.ndarray):
    """``(start, stop)`` index pairs of consecutive True entries."""
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    diff = np.diff(padded)
    return list(zip(np.flatnonzero(diff == 1), np.flatnonzero(diff == -1)))


def _dedupe(ys, qs, tol):
    out = []
    for y, q in zip(ys, qs):
        if out and abs(y - out[-1][0]) <= tol:
            continue
        out.append((float(y), float(q)))
    return tuple(out)


def _exact_piecewise_quadratic(kernel: SharpKernel, g: PiecewiseLinearDerivative, x, t,
                               cfg: SearchConfig) -> MinimizerResult:
    # Q is quadratic between consecutive knots of g' and vertices of L:
    # candidates are the cell ends plus the interior roots of g'(y) = c_j.
    lo, hi = kernel.window(x, t)
    verts = kernel.vertices(x, t)
    inner = g.knots[(g.knots > lo) & (g.knots < hi)]
    ys = np.unique(np.concatenate(([lo, hi], verts, inner)))
    ys = ys[(ys >= lo) & (ys <= hi)]
    qs = kernel.value(x, ys, t) + g.g(ys)
    a, b = ys[:-1], ys[1:]
    mid = 0.5 * (a + b)
    cj = kernel.conj.derivative((x - mid) / t)
    ga, gb = g.gprime(a) - cj, g.gprime(b) - cj
    cross = (ga < 0) & (gb > 0)
    ys_in = a[cross] - ga[cross] * (b[cross] - a[cross]) / (gb[cross] - ga[cross])
    ys_in = np.clip(ys_in, a[cross], b[cross])
    cy = np.concatenate((ys, ys_in))
    cq = np.concatenate((qs, kernel.value(x, ys_in, t) + g.g(ys_in)))
    q_min = float(np.min(cq))
    level = q_min + cfg.tie_tol(q_min)
    tied = cq <= level
    y_star = float(np.max(cy[tied]))
    on_vertex = np.min(np.abs(np.append(verts, [lo, hi]) - y_star)) <= 1e-12 * (1.0 + abs(x) + t)
    kind = Kind.VERTEX_OF_L if on_vertex else Kind.FLAT_SEGMENT
    ty, tq = cy[tied], cq[tied]
    order = np.argsort(ty)
    cands = _dedupe(ty[order], tq[order], 1e-12)
    return MinimizerResult(y_star, q_min, kind, len(cands) > 1, cands)


# --------------------------------------------------------- discrete (exact) solver

@dataclass(frozen=True)
class _ExactProblem:
    m: tuple[Fraction, ...]
    c: tuple[Fraction, ...]
    lm: tuple[Fraction, ...]
    d: tuple[Fraction, ...]
    v: tuple[Fraction, ...]
    gd: tuple[Fraction, ...]

    def L(self, p: Fraction) -> Fraction:
        j = _segment(self.m, p)
        return self.lm[j] + self.c[j] * (p - self.m[j])

    def g(self, y: Fraction) -> Fraction:
        if not self.d:
            return self.v[0] * y
        k = _count_le(self.d, y)
        knot = max(k - 1, 0)
        return self.gd[knot] + self.v[k] * (y - self.d[knot])


def _count_le(seq, value) -> int:
    n = 0
    for s in seq:
        if s <= value:
            n += 1
        else:
            break
    return n


def _segment(m, p) -> int:
    # index j with m_j <= p <= m_{j+1}; the last segment is closed on the right
    j = _count_le(m, p) - 1
    return min(max(j, 0), len(m) - 2)


@lru_cache(maxsize=128)
def _exact_problem(L: ConjugateFn, gpc: PiecewiseConstantDerivative) -> _ExactProblem:
    F = Fraction
    m = tuple(F(v) for v in L.break_points)
    c = tuple(F(v) for v in L.segment_slopes)
    if not c:
        raise ValueError("the discrete solver needs a flux with at least one break point")
    # rebuild L(m_j) exactly from the flux values rather than trusting rounded floats
    hc0 = F(L.break_points[0]) * F(L.segment_slopes[0]) - F(L.values_at_breaks[0])
    hc = [hc0]
    for k in range(1, len(c)):
        hc.append(hc[-1] + m[k] * (c[k] - c[k - 1]))
    lm = [m[j] * c[j] - hc[j] for j in range(len(c))] + [m[-1] * c[-1] - hc[-1]]
    d = tuple(F(v) for v in gpc.jumps)
    v = tuple(F(val) for val in gpc.values)
    gd = tuple(_exact_integral(d, v, y) for y in d)
    return _ExactProblem(m, c, tuple(lm), d, v, gd)


def _exact_integral(d, v, y) -> Fraction:
    lo, hi, sign = (Fraction(0), y, 1) if y >= 0 else (y, Fraction(0), -1)
    total = Fraction(0)
    for k, val in enumerate(v):
        a = lo if k == 0 else max(d[k - 1], lo)
        b = hi if k == len(d) else min(d[k], hi)
        if b > a:
            total += val * (b - a)
    return sign * total


def discrete_exact_minimizer(L: ConjugateFn, gpc: PiecewiseConstantDerivative,
                             x: float, t: float) -> MinimizerResult:
    """Exact minimization of the piecewise-linear ``Q`` by enumeration.

    All arithmetic is done in rationals built from the float inputs, so ties
    are decided by exact equality.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    P = _exact_problem(L, gpc)
    xf, tf = Fraction(x), Fraction(t)
    lo, hi = xf - P.m[-1] * tf, xf - P.m[0] * tf
    verts = [xf - mj * tf for mj in P.m]
    pts = sorted(set(verts) | {dk for dk in P.d if lo < dk < hi})
    vals = [tf * P.L((xf - y) / tf) + P.g(y) for y in pts]
    q_min = min(vals)
    ties = [y for y, q in zip(pts, vals) if q == q_min]
    y_star = ties[-1]
    at_l = y_star in verts
    at_g = y_star in P.d
    if at_l and at_g:
        kind = Kind.COINCIDENT
    elif at_g:
        kind = Kind.VERTEX_OF_G
    else:
        kind = Kind.VERTEX_OF_L
    cands = tuple((float(y), float(q_min)) for y in ties)
    return MinimizerResult(float(y_star), float(q_min), kind, len(ties) > 1, cands)


def discrete_w(L: ConjugateFn, gpc: PiecewiseConstantDerivative, x: float, t: float) -> float:
    """``w`` for step data: ``g'(y*)`` at a vertex of ``L``, ``L'`` at a jump of ``g'``.

    At a coincident vertex the smaller of the two right-hand branch slopes is
    returned, which is the right derivative of ``u`` in ``x``.
    """
    res = discrete_exact_minimizer(L, gpc, x, t)
    return _discrete_w_from(L, gpc, x, t, res)


def _discrete_w_from(L, gpc, x, t, res: MinimizerResult) -> float:
    P = _exact_problem(L, gpc)
    y = Fraction(res.y_star)
    p = (Fraction(x) - y) / Fraction(t)
    g_right = P.v[_count_le(P.d, y)]
    # right slope of L at p: segment to the right of p when p is a vertex
    j = min(_count_le(P.m, p) - 1, len(P.c) - 1)
    l_right = P.c[max(j, 0)]
    if res.kind == Kind.VERTEX_OF_L:
        return float(g_right)
    if res.kind == Kind.VERTEX_OF_G:
        return float(l_right)
    return float(min(g_right, l_right))


# ------------------------------------------------------------------ solution

def eval_u(kernel, g, x: float, t: float, cfg: SearchConfig = DEFAULT_SEARCH) -> float:
    if t == 0:
        return float(g.g(x))
    return greatest_minimizer(kernel, g, x, t, cfg).q_min


def eval_w(kernel, g, x: float, t: float, cfg: SearchConfig = DEFAULT_SEARCH) -> float:
    if t <= 0:
        raise ValueError("t must be positive")
    res = greatest_minimizer(kernel, g, x, t, cfg)
    return w_from_result(kernel, g, x, t, res)


def w_from_result(kernel, g, x, t, res: MinimizerResult) -> float:
    if isinstance(kernel, SharpKernel) and isinstance(g, PiecewiseConstantDerivative):
        return _discrete_w_from(kernel.conj, g, x, t, res)
    return float(g.gprime(res.y_star))


@dataclass(frozen=True)
class OneSidedDerivative:
    """Finite-difference ``d/dx min_y Q``: ``value`` is the right derivative."""

    value: float
    right: float
    left: float
    shock: bool


def min_x_derivative(kernel, g, x: float, t: float,
                     h_seq: Sequence[float] = (1e-3, 5e-4, 2.5e-4),
                     cfg: SearchConfig = DEFAULT_SEARCH, jump_tol: float = 1e-4) -> OneSidedDerivative:
    """Richardson-extrapolated one-sided differences of ``u(., t)`` at ``x``.

    Successive ``h`` in ``h_seq`` must halve.  ``shock`` is set when the left
    and right derivatives disagree by more than ``jump_tol (1 + |right|)``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    u0 = eval_u(kernel, g, x, t, cfg)
    h1, h2 = h_seq[-2], h_seq[-1]

    def one_sided(sign):
        d1 = (eval_u(kernel, g, x + sign * h1, t, cfg) - u0) / (sign * h1)
        d2 = (eval_u(kernel, g, x + sign * h2, t, cfg) - u0) / (sign * h2)
        return (h1 * d2 - h2 * d1) / (h1 - h2)

    right, left = one_sided(1.0), one_sided(-1.0)
    shock = abs(right - left) > jump_tol * (1.0 + abs(right))
    return OneSidedDerivative(right, right, left, shock)


def semigroup_residual(kernel: SharpKernel, g, x: float, t: float, s: float,
                       y_grid, cfg: SearchConfig = DEFAULT_SEARCH) -> float:
    """``|u(x,t) - min_y {(t-s) L((x-y)/(t-s)) + u(y,s)}|`` over ``y_grid``."""
    if not 0 <= s < t:
        raise ValueError("need 0 <= s < t")
    y_grid = np.asarray(y_grid, dtype=float)
    lo, hi = kernel.window(x, t - s)
    y_grid = y_grid[(y_grid >= lo) & (y_grid <= hi)]
    if y_grid.size == 0:
        raise ValueError("y_grid misses the feasible interval")
    # the kernel's kinks are where a grid minimum is least accurate; include them
    verts = np.asarray(kernel.vertices(x, t - s), dtype=float)
    y_grid = np.union1d(y_grid, verts[(verts >= lo) & (verts <= hi)])
    us = np.array([eval_u(kernel, g, y, s, cfg) for y in y_grid])
    rhs = np.min(kernel.value(x, y_grid, t - s) + us)
    return abs(eval_u(kernel, g, x, t, cfg) - float(rhs))


# --------------------------------------------------------------- field sweeps

@dataclass
class SolutionField:
    x_grid: np.ndarray
    t: float
    u_values: np.ndarray
    w_values: np.ndarray
    y_star_values: np.ndarray
    kinds: list = field(default_factory=list)

    def rows(self):
        for i in range(self.x_grid.size):
            kind = self.kinds[i].value if self.kinds else ""
            yield (self.x_grid[i], self.u_values[i], self.w_values[i], self.y_star_values[i], kind)

    def to_json(self) -> dict:
        return {"t": self.t, "x": self.x_grid.tolist(), "u": self.u_values.tolist(),
                "w": self.w_values.tolist(), "y_star": self.y_star_values.tolist(),
                "kind": [k.value for k in self.kinds]}


def solve_field(kernel, g, x_grid, t: float, cfg: SearchConfig = DEFAULT_SEARCH,
                workers: int = 1) -> SolutionField:
    """Evaluate ``u``, ``w`` and ``y*`` at every grid point for one time."""
    x_grid = np.asarray(x_grid, dtype=float)

    def one(x):
        res = greatest_minimizer(kernel, g, float(x), t, cfg)
        return res.q_min, w_from_result(kernel, g, float(x), t, res), res.y_star, res.kind

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as pool:
            out = list(pool.map(one, x_grid))
    else:
        out = [one(x) for x in x_grid]
    u, w, ys, kinds = zip(*out) if out else ((), (), (), ())
    return SolutionField(x_grid, float(t), np.array(u), np.array(w), np.array(ys), list(kinds))


def shock_flags(x_grid, y_star, factor: float = 10.0) -> np.ndarray:
    """Flag grid points where ``|y*(x+h) - y*(x-h)| > factor * h``.

    ``h`` is the grid step next to each point; endpoints compare with their
    single neighbour.
    """
    x = np.asarray(x_grid, dtype=float)
    y = np.asarray(y_star, dtype=float)
    n = x.size
    flags = np.zeros(n, dtype=bool)
    if n < 2:
        return flags
    hi = np.minimum(np.arange(n) + 1, n - 1)
    lo = np.maximum(np.arange(n) - 1, 0)
    h = 0.5 * (x[hi] - x[lo])
    h[0], h[-1] = x[1] - x[0], x[-1] - x[-2]
    return np.abs(y[hi] - y[lo]) > factor * h
