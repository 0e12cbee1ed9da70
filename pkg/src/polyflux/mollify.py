"""Smoothed, uniformly convex approximations of a polygonal flux.

Each corner ``c_i`` of ``H`` is replaced on ``[c_i - s, c_i + s]`` (``s`` is
``width_factor * epsilon``) by a blend that matches value and slope of ``H``
at both ends, and ``delta q**2`` is added on top::

    H_eps,delta(q) = H_eps(q) + delta q**2,   delta = eps**2 by default.

The quadratic blend is C^1 with peak deviation ``(m_{i+1} - m_i) s / 4`` at
the corner; ``blend="quintic"`` gives a C^2 (smoothstep) variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import PiecewiseConstantDerivative, mollify_steps
from .pwl import PwlConvex, conjugate, conjugate_eval
from .variational import (DEFAULT_SEARCH, SearchConfig, SharpKernel, SmoothKernel,
                          greatest_minimizer, shock_flags, solve_field)


class OverlapError(ValueError):
    """Corner blends of neighbouring break points would overlap."""


@dataclass(frozen=True)
class CornerBlend:
    center: float
    half_width: float
    a: float  # curvature (m_{i+1} - m_i) / (4 s)
    b: float  # mid slope (m_i + m_{i+1}) / 2
    k: float  # lift at the corner, (m_{i+1} - m_i) s / 4
    h_center: float
    m_left: float
    m_right: float


@dataclass(frozen=True)
class MollifiedFlux:
    base: PwlConvex
    epsilon: float
    delta: float
    width_factor: float = 1.0
    blend: str = "quadratic"
    corner_blends: tuple[CornerBlend, ...] = field(default=(), repr=False)

    @property
    def half_width(self) -> float:
        return self.width_factor * self.epsilon

    def __call__(self, q):
        return eval_mollified(self, q)


def build_mollified(H: PwlConvex, epsilon: float, delta: Optional[float] = None,
                    width_factor: float = 1.0, blend: str = "quadratic") -> MollifiedFlux:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if blend not in ("quadratic", "quintic"):
        raise ValueError(f"unknown blend {blend!r}")
    s = width_factor * epsilon
    c = np.asarray(H.break_points)
    if c.size > 1 and not s < 0.5 * np.min(np.diff(c)):
        raise OverlapError(
            f"blend half-width {s} must be below half the smallest break gap {0.5 * np.min(np.diff(c))}")
    hc = H.values_at_breaks()
    m = H.slopes
    blends = tuple(
        CornerBlend(center=float(c[i]), half_width=s,
                    a=(m[i + 1] - m[i]) / (4.0 * s), b=0.5 * (m[i] + m[i + 1]),
                    k=(m[i + 1] - m[i]) * s / 4.0, h_center=float(hc[i]),
                    m_left=m[i], m_right=m[i + 1])
        for i in range(c.size))
    if delta is None:
        delta = epsilon**2
    return MollifiedFlux(H, float(epsilon), float(delta), float(width_factor), blend, blends)


def _quintic_int(tau):
    # integral of the smoothstep 6 tau^5 - 15 tau^4 + 10 tau^3 from 0 to tau
    return tau**6 - 3.0 * tau**5 + 2.5 * tau**4


def _quintic_step(tau):
    return tau**3 * (tau * (6.0 * tau - 15.0) + 10.0)


def eval_blend(F: MollifiedFlux, q):
    """``H_eps(q)`` without the ``delta q**2`` term."""
    q = np.asarray(q, dtype=float)
    out = np.asarray(F.base(q), dtype=float).copy()
    for cb in F.corner_blends:
        z = q - cb.center
        inside = np.abs(z) <= cb.half_width
        if not np.any(inside):
            continue
        zi = z[inside] if out.ndim else z
        if F.blend == "quadratic":
            val = cb.h_center + cb.b * zi + cb.a * zi * zi + cb.k
        else:
            s = cb.half_width
            tau = (zi + s) / (2.0 * s)
            val = cb.h_center - cb.m_left * s + cb.m_left * (zi + s) \
                + (cb.m_right - cb.m_left) * 2.0 * s * _quintic_int(tau)
        if out.ndim:
            out[inside] = val
        else:
            out = np.asarray(val)
    return float(out) if out.ndim == 0 else out


def _blend_deriv(F: MollifiedFlux, q):
    q = np.asarray(q, dtype=float)
    c = np.asarray(F.base.break_points)
    m = np.asarray(F.base.slopes)
    out = m[np.searchsorted(c, q, side="right")].astype(float)
    for cb in F.corner_blends:
        z = q - cb.center
        inside = np.abs(z) <= cb.half_width
        if not np.any(inside):
            continue
        zi = z[inside] if out.ndim else z
        if F.blend == "quadratic":
            val = cb.b + 2.0 * cb.a * zi
        else:
            tau = (zi + cb.half_width) / (2.0 * cb.half_width)
            val = cb.m_left + (cb.m_right - cb.m_left) * _quintic_step(tau)
        if out.ndim:
            out[inside] = val
        else:
            out = np.asarray(val)
    return out


def eval_mollified(F: MollifiedFlux, q):
    """``H_eps,delta(q)``."""
    q = np.asarray(q, dtype=float)
    out = np.asarray(eval_blend(F, q)) + F.delta * q * q
    return float(out) if out.ndim == 0 else out


def deriv_mollified(F: MollifiedFlux, q):
    q = np.asarray(q, dtype=float)
    out = _blend_deriv(F, q) + 2.0 * F.delta * q
    return float(out) if np.ndim(out) == 0 else out


def _deriv_scalar(F: MollifiedFlux, q: float) -> float:
    base = F.base
    c, m = base.break_points, base.slopes
    k = 0
    while k < len(c) and c[k] <= q:
        k += 1
    d = m[k]
    for cb in F.corner_blends:
        z = q - cb.center
        if abs(z) <= cb.half_width:
            if F.blend == "quadratic":
                d = cb.b + 2.0 * cb.a * z
            else:
                d = cb.m_left + (cb.m_right - cb.m_left) * _quintic_step((z + cb.half_width) / (2.0 * cb.half_width))
            break
    return d + 2.0 * F.delta * q


def _bracket(F: MollifiedFlux, p):
    m1, mn = F.base.slopes[0], F.base.slopes[-1]
    two_d = 2.0 * F.delta
    return (p - mn) / two_d - 1.0, (p - m1) / two_d + 1.0


def conjugate_argmax(F: MollifiedFlux, p):
    """``q*`` with ``F'(q*) = p`` by bisection on a slope-derived bracket."""
    if np.ndim(p) == 0:
        return _argmax_scalar(F, float(p))
    p = np.asarray(p, dtype=float)
    lo, hi = _bracket(F, p)
    tol = 1e-12 * (1.0 + np.abs(p))
    assert np.all(deriv_mollified(F, lo) <= p) and np.all(deriv_mollified(F, hi) >= p), "bracket failure"
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        dm = deriv_mollified(F, mid) - p
        lo = np.where(dm < 0, mid, lo)
        hi = np.where(dm < 0, hi, mid)
        if np.all(np.abs(dm) <= tol) or np.all(hi - lo <= 4e-16 * np.maximum(1.0, np.abs(mid))):
            break
    return 0.5 * (lo + hi)


def _argmax_scalar(F: MollifiedFlux, p: float) -> float:
    lo, hi = _bracket(F, p)
    tol = 1e-12 * (1.0 + abs(p))
    assert _deriv_scalar(F, lo) <= p <= _deriv_scalar(F, hi), "bracket failure"
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        dm = _deriv_scalar(F, mid) - p
        if abs(dm) <= tol or hi - lo <= 4e-16 * max(1.0, abs(mid)):
            break
        if dm < 0:
            lo = mid
        else:
            hi = mid
    return mid


def numeric_conjugate(F: MollifiedFlux, p):
    """``L_eps,delta(p) = sup_q {p q - H_eps,delta(q)}`` (finite for every ``p``)."""
    q = conjugate_argmax(F, p)
    out = np.asarray(p, dtype=float) * q - eval_mollified(F, q)
    return float(out) if np.ndim(out) == 0 else out


def mollified_kernel(F: MollifiedFlux) -> SmoothKernel:
    m1, mn = F.base.slopes[0], F.base.slopes[-1]

    def window(x, t):
        return x - (mn + 1.0) * t, x - (m1 - 1.0) * t

    return SmoothKernel(lambda p: numeric_conjugate(F, p), window,
                        flux_fn=lambda q: eval_mollified(F, q),
                        conj_deriv=lambda p: conjugate_argmax(F, p))


def _smooth_data(F: MollifiedFlux, g):
    # step data gets its jumps ramped over the same half-width as the corners
    if isinstance(g, PiecewiseConstantDerivative):
        return mollify_steps(g, F.half_width)
    return g


def smoothed_w(F: MollifiedFlux, g, x: float, t: float,
               cfg: SearchConfig = DEFAULT_SEARCH) -> float:
    """``w_eps(x, t) = g'(y*_eps(x, t))`` for the mollified flux."""
    data = _smooth_data(F, g)
    res = greatest_minimizer(mollified_kernel(F), data, x, t, cfg)
    return float(data.gprime(res.y_star))


def smoothed_field(F: MollifiedFlux, g, x_grid, t: float, cfg: SearchConfig = DEFAULT_SEARCH):
    return solve_field(mollified_kernel(F), _smooth_data(F, g), x_grid, t, cfg)


def conjugate_gap(H: PwlConvex, epsilon: float, p_grid=None, width_factor: float = 1.0,
                  blend: str = "quadratic", delta: Optional[float] = None) -> float:
    """``max_p |L_eps,delta(p) - L(p)|`` over ``p_grid`` inside ``[m_1, m_{N+1}]``."""
    L = conjugate(H)
    lo, hi = L.domain
    if p_grid is None:
        p_grid = np.linspace(lo, hi, 1001)
    p_grid = np.asarray(p_grid, dtype=float)
    if np.any(p_grid < lo) or np.any(p_grid > hi):
        raise ValueError("p_grid must lie inside the conjugate's domain")
    F = build_mollified(H, epsilon, delta, width_factor, blend)
    return float(np.max(np.abs(numeric_conjugate(F, p_grid) - conjugate_eval(L, p_grid))))


@dataclass
class ConvergenceReport:
    epsilons: list
    conjugate_gaps: list
    w_errors: list
    rates: list
    gap_constant: float
    excluded: list

    def rows(self):
        for i, eps in enumerate(self.epsilons):
            yield eps, self.conjugate_gaps[i], self.w_errors[i], self.rates[i]

    def to_json(self) -> dict:
        return {"epsilons": self.epsilons, "conjugate_gaps": self.conjugate_gaps,
                "w_errors": self.w_errors, "rates": self.rates,
                "gap_constant": self.gap_constant, "excluded": self.excluded}


def convergence_study(H: PwlConvex, g, x_grid, t: float, epsilons: Sequence[float],
                      width_factor: float = 1.0, blend: str = "quadratic",
                      cfg: SearchConfig = DEFAULT_SEARCH,
                      delta: Optional[float] = None) -> ConvergenceReport:
    """Conjugate gaps and ``sup |w_eps - w|`` off the shock set, per epsilon.

    A grid point is excluded when either the sharp ``y*`` or the mollified
    ``y*_eps`` jumps next to it.  ``delta=None`` uses ``eps**2``.
    """
    eps = [float(e) for e in epsilons]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    x_grid = np.asarray(x_grid, dtype=float)
    sharp = solve_field(SharpKernel(H), g, x_grid, t, cfg)
    sharp_flags = shock_flags(x_grid, sharp.y_star_values)
    gaps, errs, excluded = [], [], []
    for e in eps:
        gaps.append(conjugate_gap(H, e, width_factor=width_factor, blend=blend, delta=delta))
        F = build_mollified(H, e, delta=delta, width_factor=width_factor, blend=blend)
        smooth = smoothed_field(F, g, x_grid, t, cfg)
        mask = ~(sharp_flags | shock_flags(x_grid, smooth.y_star_values))
        excluded.append(int(np.count_nonzero(~mask)))
        diff = np.abs(smooth.w_values - sharp.w_values)[mask]
        errs.append(float(np.max(diff)) if diff.size else 0.0)
    rates = [math.nan] + [gaps[i] / gaps[i - 1] if gaps[i - 1] > 0 else math.nan
                          for i in range(1, len(gaps))]
    const = max(gp / e for gp, e in zip(gaps, eps))
    return ConvergenceReport(eps, gaps, errs, rates, const, excluded)


@dataclass
class UniquenessReport:
    epsilons: list
    sup_differences: list
    excluded: list
    width_factors: tuple

    def to_json(self) -> dict:
        return {"epsilons": self.epsilons, "sup_differences": self.sup_differences,
                "excluded": self.excluded, "width_factors": list(self.width_factors)}


def limiting_uniqueness_check(H: PwlConvex, g, x_grid, t: float, epsilons: Sequence[float],
                              width_a: float = 1.0, width_b: float = 2.0,
                              blend: str = "quadratic",
                              cfg: SearchConfig = DEFAULT_SEARCH) -> UniquenessReport:
    """Compare two mollifier families (blend widths ``width_a * eps`` and ``width_b * eps``)."""
    x_grid = np.asarray(x_grid, dtype=float)
    sharp = solve_field(SharpKernel(H), g, x_grid, t, cfg)
    base_flags = shock_flags(x_grid, sharp.y_star_values)
    sups, excluded = [], []
    for e in epsilons:
        fa = smoothed_field(build_mollified(H, e, width_factor=width_a, blend=blend), g, x_grid, t, cfg)
        fb = smoothed_field(build_mollified(H, e, width_factor=width_b, blend=blend), g, x_grid, t, cfg)
        mask = ~(base_flags | shock_flags(x_grid, fa.y_star_values) | shock_flags(x_grid, fb.y_star_values))
        excluded.append(int(np.count_nonzero(~mask)))
        diff = np.abs(fa.w_values - fb.w_values)[mask]
        sups.append(float(np.max(diff)) if diff.size else 0.0)
    return UniquenessReport([float(e) for e in epsilons], sups, excluded, (width_a, width_b))
