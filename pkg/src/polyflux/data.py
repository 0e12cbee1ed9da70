"""Initial data ``(g, g')`` for the Hopf-Lax problem.

Three families are supported:

* :class:`ClosedFormC1` -- user supplied ``g`` and ``g'`` (vectorised callables);
* :class:`PiecewiseConstantDerivative` -- ``g'`` a step function, ``g`` its
  exact antiderivative with ``g(0) = 0``;
* :class:`PiecewiseLinearDerivative` -- ``g'`` continuous and piecewise linear
  through knots, ``g`` the exact piecewise-quadratic antiderivative.
  :class:`SampledPath` is the uniform-grid special case used for Brownian data.

Every family exposes ``g(y)``, ``gprime(y)`` (right limits at jumps) and
``lipschitz(window)``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


@dataclass(frozen=True, eq=False)
class ClosedFormC1:
    """Differentiable data given in closed form.

    ``gprime`` is spot-checked against a central difference of ``g`` at 64
    random points of ``check_window`` when the object is built.
    """

    g_fn: Callable
    gprime_fn: Callable
    name: str = "closed_form"
    check_window: tuple[float, float] = (-4.0, 4.0)
    check: bool = True
    breaks: tuple[float, ...] = ()    # points where g'' jumps, if any

    def __post_init__(self):
        if self.check:
            _check_derivative(self.g_fn, self.gprime_fn, self.check_window)

    def g(self, y):
        return _out(self.g_fn(np.asarray(y, dtype=float)))

    def gprime(self, y):
        return _out(self.gprime_fn(np.asarray(y, dtype=float)))

    def at_jump(self, y):
        return np.zeros(np.shape(y), dtype=bool) if np.ndim(y) else False

    def lipschitz(self, window: tuple[float, float]) -> float:
        ys = np.linspace(window[0], window[1], 2**12)
        return float(np.max(np.abs(self.gprime(ys))))


def _check_derivative(g_fn, gp_fn, window, n=64, rtol=1e-6):
    rng = np.random.default_rng(12345)
    ys = rng.uniform(window[0], window[1], n)
    h = 1e-5 * (1.0 + np.abs(ys))
    fd = (g_fn(ys + h) - g_fn(ys - h)) / (2.0 * h)
    gp = gp_fn(ys)
    scale = 1.0 + np.abs(gp) + np.abs(g_fn(ys)) * 1e-6 / h
    bad = np.abs(fd - gp) > rtol * scale
    if np.any(bad):
        raise ValueError(
            f"g' does not match a finite difference of g at y={ys[bad][:3].tolist()}")


def polynomial(coeffs: Sequence[float], check_window=(-4.0, 4.0)) -> ClosedFormC1:
    """``g(y) = sum_k coeffs[k] y**k``."""
    poly = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
    deriv = poly.deriv()
    return ClosedFormC1(poly, deriv, name=f"polynomial{list(coeffs)}", check_window=check_window)


def quadratic() -> ClosedFormC1:
    return polynomial([0.0, 0.0, 1.0])


def exponential() -> ClosedFormC1:
    return ClosedFormC1(np.exp, np.exp, name="exp")


def zero() -> ClosedFormC1:
    return ClosedFormC1(np.zeros_like, np.zeros_like, name="zero")


def concave_well(a: float, b: float, stiffness: float = 1e8) -> ClosedFormC1:
    """``g(y) = -y**2`` on ``[a, b]`` with a stiff C^1 quadratic rise outside.

    Paired with the kernel ``(x - y)**2`` at ``x = 0`` the Hopf-Lax functional
    vanishes identically on ``[a, b]``: every point there is a minimizer.
    """
    if not a < b:
        raise ValueError("need a < b")

    def g(y):
        return -y**2 + stiffness * (np.maximum(y - b, 0.0)**2 + np.maximum(a - y, 0.0)**2)

    def gp(y):
        return -2.0 * y + 2.0 * stiffness * (np.maximum(y - b, 0.0) - np.maximum(a - y, 0.0))

    return ClosedFormC1(g, gp, name=f"concave_well[{a},{b}]", check_window=(a, b),
                        breaks=(float(a), float(b)))


@dataclass(frozen=True)
class PiecewiseConstantDerivative:
    """``g'`` equal to ``values[k]`` between ``jumps[k-1]`` and ``jumps[k]``."""

    jumps: tuple[float, ...]
    values: tuple[float, ...]
    _g_at_jumps: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        d, v = self.jumps, self.values
        if len(v) != len(d) + 1:
            raise ValueError(f"values must have len(jumps) + 1 = {len(d) + 1} entries")
        if any(b <= a for a, b in zip(d, d[1:])):
            raise ValueError(f"jumps must be strictly increasing: {d}")
        object.__setattr__(self, "_g_at_jumps", tuple(_pcd_integral(d, v, y) for y in d))

    def g(self, y):
        y = np.asarray(y, dtype=float)
        d = np.asarray(self.jumps)
        v = np.asarray(self.values)
        if d.size == 0:
            return _out(v[0] * y)
        k = np.searchsorted(d, y, side="right")
        knot = np.maximum(k - 1, 0)
        return _out(np.asarray(self._g_at_jumps)[knot] + v[k] * (y - d[knot]))

    def gprime(self, y):
        k = np.searchsorted(np.asarray(self.jumps), np.asarray(y, dtype=float), side="right")
        return _out(np.asarray(self.values)[k])

    def at_jump(self, y):
        hit = np.isin(np.asarray(y, dtype=float), np.asarray(self.jumps))
        return bool(hit) if hit.ndim == 0 else hit

    def lipschitz(self, window: tuple[float, float]) -> float:
        d = np.asarray(self.jumps)
        lo = np.searchsorted(d, window[0], side="right")
        hi = np.searchsorted(d, window[1], side="right")
        return float(np.max(np.abs(np.asarray(self.values)[lo:hi + 1])))

    def matches(self, H) -> bool:
        """True when every value of ``g'`` is a break point of the flux ``H``."""
        return set(self.values) <= set(H.break_points)

    def to_json(self) -> dict:
        return {"jumps": list(self.jumps), "values": list(self.values)}


def _pcd_integral(d, v, y) -> float:
    # signed integral of the step function from 0 to y, segment by segment
    edges = [-np.inf, *d, np.inf]
    lo, hi, sign = (0.0, y, 1.0) if y >= 0 else (y, 0.0, -1.0)
    total = 0.0
    for k, val in enumerate(v):
        a, b = max(edges[k], lo), min(edges[k + 1], hi)
        if b > a:
            total += val * (b - a)
    return sign * total


def make_piecewise_constant(jumps, values) -> PiecewiseConstantDerivative:
    return PiecewiseConstantDerivative(tuple(float(x) for x in jumps),
                                       tuple(float(x) for x in values))


class PiecewiseLinearDerivative:
    """``g'`` linear between knots and constant beyond them; ``g(0) = 0``."""

    def __init__(self, knots, gprime_values):
        self.knots = np.asarray(knots, dtype=float)
        self.values = np.asarray(gprime_values, dtype=float)
        if self.knots.ndim != 1 or self.knots.shape != self.values.shape or self.knots.size < 2:
            raise ValueError("knots and gprime_values must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(self.knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        dx = np.diff(self.knots)
        cum = np.concatenate(([0.0], np.cumsum(0.5 * (self.values[:-1] + self.values[1:]) * dx)))
        self._cum = cum
        self._cum = cum - self._raw_g(np.asarray(0.0))

    def _raw_g(self, y):
        x, v = self.knots, self.values
        k = np.clip(np.searchsorted(x, y, side="right") - 1, 0, x.size - 2)
        s = np.clip(y, x[0], x[-1]) - x[k]
        slope = (v[k + 1] - v[k]) / (x[k + 1] - x[k])
        inside = self._cum[k] + v[k] * s + 0.5 * slope * s * s
        # constant extension of g' outside the knot range
        return inside + np.where(y < x[0], v[0] * (y - x[0]), 0.0) \
            + np.where(y > x[-1], v[-1] * (y - x[-1]), 0.0)

    def g(self, y):
        return _out(self._raw_g(np.asarray(y, dtype=float)))

    def gprime(self, y):
        return _out(np.interp(np.asarray(y, dtype=float), self.knots, self.values))

    def at_jump(self, y):
        return np.zeros(np.shape(y), dtype=bool) if np.ndim(y) else False

    def lipschitz(self, window: tuple[float, float]) -> float:
        inside = self.values[(self.knots > window[0]) & (self.knots < window[1])]
        ends = self.gprime(np.asarray(window, dtype=float))
        return float(np.max(np.abs(np.concatenate((inside, ends)))))

    def total_variation(self, window: tuple[float, float]) -> float:
        inside = (self.knots > window[0]) & (self.knots < window[1])
        pts = np.concatenate(([window[0]], self.knots[inside], [window[1]]))
        return float(np.sum(np.abs(np.diff(self.gprime(pts)))))


class SampledPath(PiecewiseLinearDerivative):
    """Samples of ``g'`` on a uniform grid (e.g. a Brownian path)."""

    def __init__(self, grid, gprime_values, seed: Optional[int] = None):
        super().__init__(grid, gprime_values)
        self.step = float(self.knots[1] - self.knots[0])
        if not np.allclose(np.diff(self.knots), self.step, rtol=1e-9, atol=1e-12):
            raise ValueError("SampledPath needs a uniform grid")
        self.seed = seed

    def covers(self, window: tuple[float, float]) -> bool:
        return self.knots[0] <= window[0] and window[1] <= self.knots[-1]


def mollify_steps(data: PiecewiseConstantDerivative, half_width: float) -> PiecewiseLinearDerivative:
    """Replace each jump of ``g'`` by a linear ramp over ``[d - s, d + s]``."""
    d = np.asarray(data.jumps)
    v = np.asarray(data.values)
    if d.size == 0:
        return PiecewiseLinearDerivative([-1.0, 1.0], [v[0], v[0]])
    if d.size > 1 and half_width >= 0.5 * np.min(np.diff(d)):
        raise ValueError("ramp half-width overlaps neighbouring jumps")
    knots = np.ravel(np.column_stack((d - half_width, d + half_width)))
    vals = np.ravel(np.column_stack((v[:-1], v[1:])))
    return PiecewiseLinearDerivative(knots, vals)


def sample_brownian(grid_start: float, grid_end: float, step: float, seed=None,
                    scale: float = 1.0) -> SampledPath:
    """Two-sided Brownian path pinned at ``B(0) = 0`` on the grid ``k * step``.

    The right and left halves use independent streams spawned from ``seed``
    (an int, a :class:`numpy.random.SeedSequence` or ``None``); ``scale``
    multiplies every increment, so ``scale=0`` gives the zero path.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if not grid_start <= 0.0 <= grid_end:
        raise ValueError("the sampling grid must contain 0")
    n_right = int(np.floor(grid_end / step + 1e-9))
    n_left = int(np.floor(-grid_start / step + 1e-9))
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    # same children as ss.spawn(2) on a fresh sequence, without advancing ss
    right_ss, left_ss = (np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (k,),
                                                pool_size=ss.pool_size) for k in (0, 1))
    sd = np.sqrt(step) * scale
    right = np.cumsum(np.random.default_rng(right_ss).normal(0.0, 1.0, n_right)) * sd
    left = np.cumsum(np.random.default_rng(left_ss).normal(0.0, 1.0, n_left)) * sd
    values = np.concatenate((left[::-1], [0.0], right))
    grid = np.arange(-n_left, n_right + 1) * step
    return SampledPath(grid, values, seed=ss.entropy if seed is not None else None)


def lipschitz_estimate(data, window: tuple[float, float]) -> float:
    if not window[0] <= window[1]:
        raise ValueError("window must satisfy lo <= hi")
    return data.lipschitz(window)


def eval_g(data, y):
    return data.g(y)


def eval_gprime(data, y):
    """Right limit of ``g'`` at ``y`` and whether ``y`` sits on a jump."""
    return data.gprime(y), data.at_jump(y)


def read_sampled_path(path) -> SampledPath:
    """Load a ``x,gprime`` CSV (comment lines starting with ``#`` are skipped)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(ln for ln in fh if ln.strip() and not ln.startswith("#")))
    if not rows or not {"x", "gprime"} <= set(rows[0]):
        raise ValueError(f"{path}: expected columns x,gprime")
    return SampledPath([float(r["x"]) for r in rows], [float(r["gprime"]) for r in rows])


def from_json(obj: dict):
    """Build initial data from a config dict (see the README for the keys)."""
    kind = obj.get("kind")
    if kind == "polynomial":
        return polynomial(obj["coeffs"])
    if kind == "quadratic":
        return quadratic()
    if kind == "exp":
        return exponential()
    if kind == "zero":
        return zero()
    if kind == "piecewise_constant":
        return make_piecewise_constant(obj["jumps"], obj["values"])
    if kind == "brownian":
        return sample_brownian(obj["start"], obj["end"], obj["step"], obj.get("seed"),
                               obj.get("scale", 1.0))
    if kind == "sampled":
        return read_sampled_path(obj["file"])
    raise KeyError(f"data.kind: unknown initial data kind {kind!r}")
