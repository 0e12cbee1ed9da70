"""Convex piecewise-linear ("polygonal") functions and their exact conjugates.

A flux ``H`` is stored by its break points ``c_1 < ... < c_N``, the slopes
``m_1 < ... < m_{N+1}`` of its ``N + 1`` segments and the anchor value
``H(c_1)``.  Its Legendre transform ``L(p) = sup_q {p q - H(q)}`` is again
polygonal, finite exactly on ``[m_1, m_{N+1}]``, with break points at the
``m_j`` and slopes ``c_j``.  Outside its domain ``L`` evaluates to ``inf``
(IEEE infinity is the extended-real sentinel: it compares and adds exactly).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class ConvexityError(ValueError):
    """Slopes are not strictly increasing."""


class DegenerateSegmentError(ValueError):
    """Break points are not strictly increasing (zero-length segment)."""


class FluxAssumptionError(ValueError):
    """A flux violates ``m_1 < 0 < m_{N+1}``."""


def _as_tuple(values: Sequence[float]) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class PwlConvex:
    """Convex piecewise-linear function on the real line.

    With no break points the function is affine, ``H(q) = m_1 q + anchor``;
    this degenerate form is only accepted with ``relaxed=True``.
    """

    break_points: tuple[float, ...]
    slopes: tuple[float, ...]
    anchor_value: float
    relaxed: bool = False

    def __post_init__(self):
        c, m = self.break_points, self.slopes
        if len(m) != len(c) + 1:
            raise ValueError(
                f"slopes must have len(break_points) + 1 = {len(c) + 1} entries, got {len(m)}")
        if any(b <= a for a, b in zip(c, c[1:])):
            raise DegenerateSegmentError(f"break_points must be strictly increasing: {c}")
        if any(b <= a for a, b in zip(m, m[1:])):
            raise ConvexityError(f"slopes must be strictly increasing (convexity): {m}")
        if not all(np.isfinite(c)) or not all(np.isfinite(m)) or not np.isfinite(self.anchor_value):
            raise ValueError("break_points, slopes and anchor_value must be finite")
        if not self.relaxed and len(c) == 0:
            raise ValueError("a flux needs at least one break point (pass relaxed=True for affine)")

    @property
    def n_breaks(self) -> int:
        return len(self.break_points)

    def values_at_breaks(self) -> np.ndarray:
        """``H(c_k)`` for every break point, integrated from the anchor."""
        c = np.asarray(self.break_points)
        if c.size == 0:
            return np.empty(0)
        inner = np.asarray(self.slopes[1:-1])
        return self.anchor_value + np.concatenate(([0.0], np.cumsum(inner * np.diff(c))))

    def __call__(self, q):
        return eval_pwl(self, q)

    def check_flux(self) -> None:
        """Raise unless ``m_1 < 0 < m_{N+1}`` (the solver's standing assumption)."""
        if not (self.slopes[0] < 0.0 < self.slopes[-1]):
            raise FluxAssumptionError(
                f"flux needs m_1 < 0 < m_N+1, got m_1={self.slopes[0]}, m_N+1={self.slopes[-1]}")

    def to_json(self) -> dict:
        return {"breaks": list(self.break_points), "slopes": list(self.slopes),
                "anchor": self.anchor_value}

    @classmethod
    def from_json(cls, obj: dict, relaxed: bool = False) -> "PwlConvex":
        return make_pwl(obj["breaks"], obj["slopes"], obj.get("anchor", 0.0), relaxed=relaxed)


def make_pwl(break_points, slopes, anchor_value=0.0, relaxed: bool = False) -> PwlConvex:
    return PwlConvex(_as_tuple(break_points), _as_tuple(slopes), float(anchor_value), relaxed)


def eval_pwl(H: PwlConvex, q):
    """Evaluate ``H`` at scalar or array ``q``."""
    q_arr = np.asarray(q, dtype=float)
    c = np.asarray(H.break_points)
    m = np.asarray(H.slopes)
    if c.size == 0:
        out = m[0] * q_arr + H.anchor_value
    else:
        hc = H.values_at_breaks()
        # segment k covers [c_{k-1}, c_k); the left knot of segment 0 is c_0 itself
        k = np.searchsorted(c, q_arr, side="right")
        knot = np.maximum(k - 1, 0)
        out = hc[knot] + m[k] * (q_arr - c[knot])
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ConjugateFn:
    """Legendre transform of a :class:`PwlConvex`.

    ``break_points`` are ``m_1..m_{N+1}`` (so ``domain`` is their hull),
    ``segment_slopes`` are ``c_1..c_N`` and ``values_at_breaks`` are ``L(m_j)``.
    """

    break_points: tuple[float, ...]
    segment_slopes: tuple[float, ...]
    values_at_breaks: tuple[float, ...]

    @property
    def domain(self) -> tuple[float, float]:
        return self.break_points[0], self.break_points[-1]

    @property
    def lipschitz(self) -> float:
        if not self.segment_slopes:
            return 0.0
        return max(abs(self.segment_slopes[0]), abs(self.segment_slopes[-1]))

    def __call__(self, p):
        return conjugate_eval(self, p)

    def derivative(self, p, side: str = "right"):
        """One-sided slope ``L'(p +/- 0)`` inside the domain (``nan`` outside)."""
        p_arr = np.asarray(p, dtype=float)
        m = np.asarray(self.break_points)
        c = np.asarray(self.segment_slopes)
        if c.size == 0:
            out = np.full(p_arr.shape, np.nan)
        else:
            k = np.searchsorted(m, p_arr, side="right" if side == "right" else "left") - 1
            k = np.clip(k, 0, c.size - 1)
            out = c[k].astype(float)
            out = np.where((p_arr < m[0]) | (p_arr > m[-1]), np.nan, out)
        return float(out) if out.ndim == 0 else out

    def to_json(self) -> dict:
        return {"breaks": list(self.break_points), "slopes": list(self.segment_slopes),
                "values": list(self.values_at_breaks), "domain": list(self.domain),
                "infinite_outside": True}

    @classmethod
    def from_json(cls, obj: dict) -> "ConjugateFn":
        return cls(_as_tuple(obj["breaks"]), _as_tuple(obj["slopes"]), _as_tuple(obj["values"]))


def conjugate(H: PwlConvex) -> ConjugateFn:
    """Exact conjugate: ``L(p) = p c_j - H(c_j)`` on ``[m_j, m_{j+1}]``."""
    m = np.asarray(H.slopes)
    c = np.asarray(H.break_points)
    if c.size == 0:
        return ConjugateFn((float(m[0]),), (), (-H.anchor_value,))
    hc = H.values_at_breaks()
    # L(m_j) from segment j; the last break m_{N+1} closes segment N
    left = m[:-1] * c - hc
    last = m[-1] * c[-1] - hc[-1]
    return ConjugateFn(_as_tuple(m), _as_tuple(c), _as_tuple(np.append(left, last)))


def conjugate_eval(L: ConjugateFn, p):
    """``L(p)``, exact inside ``[m_1, m_{N+1}]`` and ``inf`` outside."""
    p_arr = np.asarray(p, dtype=float)
    m = np.asarray(L.break_points)
    lv = np.asarray(L.values_at_breaks)
    c = np.asarray(L.segment_slopes)
    if c.size == 0:
        out = np.where(p_arr == m[0], lv[0], np.inf)
    else:
        k = np.clip(np.searchsorted(m, p_arr, side="right") - 1, 0, c.size - 1)
        out = lv[k] + c[k] * (p_arr - m[k])
        out = np.where((p_arr < m[0]) | (p_arr > m[-1]), np.inf, out)
    return float(out) if out.ndim == 0 else out


def biconjugate(L: ConjugateFn) -> PwlConvex:
    """``sup_p {p q - L(p)}`` over the finite domain, as a :class:`PwlConvex`."""
    m = np.asarray(L.break_points)
    c = np.asarray(L.segment_slopes)
    lv = np.asarray(L.values_at_breaks)
    if c.size == 0:
        return make_pwl([], [m[0]], -lv[0], relaxed=True)
    # the sup at q = c_1 is attained on the whole first segment; take its left end
    anchor = m[0] * c[0] - lv[0]
    return make_pwl(c, m, anchor, relaxed=True)
