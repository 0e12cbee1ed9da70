import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyflux.data import (concave_well, make_piecewise_constant, polynomial, quadratic,
                           PiecewiseLinearDerivative)
from polyflux.pwl import conjugate, make_pwl
from polyflux.variational import (DivergenceError, Kind, SearchConfig, SharpKernel, TestQuadratic,
                                  discrete_exact_minimizer, discrete_w, eval_u, eval_w,
                                  functional_Q, greatest_minimizer, min_x_derivative,
                                  semigroup_residual, shock_flags, solve_field)

ABS = make_pwl([0.0], [-1.0, 1.0], 0.0)
DEAD = make_pwl([-1.0, 1.0], [-1.0, 0.0, 1.0], 0.0)
K_ABS = SharpKernel(ABS)
K_DEAD = SharpKernel(DEAD)
G2 = quadratic()
SHOCK = make_piecewise_constant([0.0], [1.0, -1.0])       # g = -|y|
RAREF = make_piecewise_constant([0.0], [-1.0, 1.0])       # g = |y|


def closed_form_w(x, t):
    # H = |q|, g = y^2: w = 0 on |x| <= t, 2 (x -/+ t) outside
    x = np.asarray(x, dtype=float)
    return np.where(x > t, 2 * (x - t), np.where(x < -t, 2 * (x + t), 0.0))


def brute_min(kernel, g, x, t, n=200001):
    lo, hi = kernel.window(x, t)
    ys = np.linspace(lo, hi, n)
    q = kernel.value(x, ys, t) + g.g(ys)
    i = int(np.argmin(q))
    return ys[i], q[i], (hi - lo) / (n - 1)


# --------------------------------------------------------------- functional

def test_functional_examples():
    assert functional_Q(K_ABS, G2, 0.0, 1.0, 0.5) == pytest.approx(0.25, abs=1e-15)
    assert functional_Q(K_ABS, G2, 0.0, 1.0, 2.0) == math.inf
    assert functional_Q(TestQuadratic(), polynomial([0, 0, -1]), 0.0, 1.0, 0.7) == pytest.approx(0.0, abs=1e-15)


def test_functional_rejects_nonpositive_t():
    with pytest.raises(ValueError):
        functional_Q(K_ABS, G2, 0.0, 0.0, 0.1)


# ------------------------------------------------------- greatest minimizer

def test_interior_minimum_flat_segment():
    r = greatest_minimizer(K_ABS, G2, 0.5, 1.0)
    assert abs(r.y_star) < 1e-9 and abs(r.q_min) < 1e-15
    assert r.kind == Kind.FLAT_SEGMENT
    assert eval_w(K_ABS, G2, 0.5, 1.0) == pytest.approx(0.0, abs=1e-8)


def test_endpoint_minimum_vertex_of_l():
    r = greatest_minimizer(K_ABS, G2, 2.0, 1.0)
    assert r.y_star == 1.0 and r.q_min == 1.0 and r.kind == Kind.VERTEX_OF_L


def test_flat_interval_worked_example():
    g = concave_well(-1.0, 1.5)
    cfg = SearchConfig(window=(-3.0, 4.0))
    r = greatest_minimizer(TestQuadratic(), g, 0.0, 1.0, cfg)
    assert r.multiple
    assert abs(r.y_star - 1.5) < 1e-8
    assert abs(r.q_min) < 1e-9


def test_feasibility_and_tie_invariants():
    for x in np.linspace(-3, 3, 13):
        r = greatest_minimizer(K_DEAD, polynomial([0, 0.3, 0.5, -0.1]), float(x), 0.7)
        lo, hi = K_DEAD.window(x, 0.7)
        assert lo <= r.y_star <= hi
        ys = [c[0] for c in r.candidates]
        assert r.y_star == max(ys)
        tol = SearchConfig().tie_tol(r.q_min)
        assert all(c[1] <= r.q_min + tol for c in r.candidates)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_detected():
    # Q = (x - y)^2 - 2 y^2 is unbounded below; the search window exposes -inf only via nan/inf
    g = polynomial([0, 0, -2])
    cfg = SearchConfig(window=(-1e200, 1e200))
    with pytest.raises(DivergenceError):
        greatest_minimizer(TestQuadratic(), g, 0.0, 1.0, cfg)


def test_degenerate_window_dense_fallback():
    r = greatest_minimizer(K_ABS, polynomial([0, 0.2, 1.0]), 0.3, 1e-8)
    lo, hi = K_ABS.window(0.3, 1e-8)
    assert lo <= r.y_star <= hi


@pytest.mark.parametrize("x", [-2.2, -0.7, 0.0, 0.4, 1.3, 2.9])
@pytest.mark.parametrize("t", [0.5, 1.0])
def test_matches_brute_force(x, t):
    g = polynomial([0.0, 0.4, 0.8, -0.15])
    r = greatest_minimizer(K_DEAD, g, x, t)
    yb, qb, step = brute_min(K_DEAD, g, x, t)
    assert r.q_min <= qb + 1e-12
    assert abs(r.q_min - qb) <= 1e-6


def test_piecewise_linear_data_exact_path():
    g = PiecewiseLinearDerivative([-2.0, -0.5, 0.3, 1.0, 2.5], [0.7, -0.4, 0.9, -1.2, 0.5])
    for x in np.linspace(-1.5, 1.5, 7):
        r = greatest_minimizer(K_DEAD, g, float(x), 1.0)
        yb, qb, _ = brute_min(K_DEAD, g, float(x), 1.0)
        assert r.q_min <= qb + 1e-12 and abs(r.q_min - qb) < 1e-8


# ------------------------------------------------------------- u, w, du/dx

@pytest.mark.parametrize("x,u", [(0.0, 0.0), (2.0, 1.0)])
def test_eval_u_examples(x, u):
    assert eval_u(K_ABS, G2, x, 1.0) == pytest.approx(u, abs=1e-15)


def test_eval_u_at_zero_time():
    assert eval_u(K_ABS, G2, 1.7, 0.0) == pytest.approx(1.7**2)


@pytest.mark.parametrize("x,w", [(0.5, 0.0), (2.0, 2.0), (-2.0, -2.0)])
def test_eval_w_examples(x, w):
    assert eval_w(K_ABS, G2, x, 1.0) == pytest.approx(w, abs=1e-8)


@pytest.mark.parametrize("b", [0.5, 1.5])
def test_min_x_derivative_worked_example(b):
    cfg = SearchConfig(window=(-3.0, 4.0))
    d = min_x_derivative(TestQuadratic(), concave_well(-1.0, b), 0.0, 1.0, cfg=cfg)
    assert d.value == pytest.approx(-2 * b, abs=1e-6)


@pytest.mark.parametrize("x,expected", [(2.0, 2.0), (0.0, 0.0)])
def test_min_x_derivative_examples(x, expected):
    d = min_x_derivative(K_ABS, G2, x, 1.0)
    assert d.value == pytest.approx(expected, abs=1e-6)
    assert not d.shock


def test_min_x_derivative_flags_shock():
    d = min_x_derivative(K_DEAD, SHOCK, 0.0, 1.0)
    assert d.shock
    assert d.right == pytest.approx(-1.0, abs=1e-9) and d.left == pytest.approx(1.0, abs=1e-9)


def test_w_consistent_with_derivative():
    g = polynomial([0.0, 0.4, 0.8, -0.15])
    for x in np.linspace(-2, 2, 9):
        d = min_x_derivative(K_DEAD, g, float(x), 1.0)
        if not d.shock:
            assert abs(d.value - eval_w(K_DEAD, g, float(x), 1.0)) <= 10 * 1e-3


# ---------------------------------------------------------------- semigroup

@pytest.mark.parametrize("x,t,s", [(2.0, 2.0, 1.0), (0.0, 1.0, 0.5)])
def test_semigroup_examples(x, t, s):
    y = np.linspace(x - 4, x + 4, 10_000)
    assert semigroup_residual(K_ABS, G2, x, t, s, y) <= 1e-6


def test_semigroup_small_s():
    y = np.linspace(-3, 3, 10_000)
    assert semigroup_residual(K_ABS, G2, 0.8, 1.0, 1e-9, y) <= 1e-6


def test_semigroup_rejects_bad_s():
    with pytest.raises(ValueError):
        semigroup_residual(K_ABS, G2, 0.0, 1.0, 1.0, np.linspace(-1, 1, 5))


# ------------------------------------------------------------ discrete case

def test_discrete_shock_right_of_center():
    r = discrete_exact_minimizer(conjugate(DEAD), SHOCK, 0.5, 1.0)
    assert r.y_star == 1.5 and r.q_min == -0.5 and r.multiple
    assert discrete_w(conjugate(DEAD), SHOCK, 0.5, 1.0) == -1.0


def test_discrete_shock_left_of_center():
    r = discrete_exact_minimizer(conjugate(DEAD), SHOCK, -0.5, 1.0)
    assert r.y_star == -0.5 and r.q_min == -0.5
    assert discrete_w(conjugate(DEAD), SHOCK, -0.5, 1.0) == 1.0


def test_discrete_shock_center_ties():
    r = discrete_exact_minimizer(conjugate(DEAD), SHOCK, 0.0, 1.0)
    assert r.y_star == 1.0 and r.q_min == 0.0 and r.multiple


def test_discrete_rarefaction():
    assert discrete_w(conjugate(DEAD), RAREF, 0.5, 1.0) == 1.0


def test_discrete_kinds():
    L = conjugate(DEAD)
    assert discrete_exact_minimizer(L, RAREF, 0.5, 1.0).kind == Kind.VERTEX_OF_L
    # g = 2|y| makes the jump at 0 the unique minimizer of |x - y| + 2|y|, so u = |x|
    vee = make_piecewise_constant([0.0], [-2.0, 2.0])
    r = discrete_exact_minimizer(L, vee, 0.3, 1.0)
    assert r.y_star == 0.0 and r.kind == Kind.VERTEX_OF_G and not r.multiple
    assert discrete_w(L, vee, 0.3, 1.0) == 1.0
    # at x = 0 the jump is also the vertex x - 0 t of L; w is the right derivative of |x|
    r = discrete_exact_minimizer(L, vee, 0.0, 1.0)
    assert r.kind == Kind.COINCIDENT
    assert discrete_w(L, vee, 0.0, 1.0) == 1.0
    assert discrete_w(L, vee, -0.3, 1.0) == -1.0


def exact_brute(L, gpc, x, t, n=10**6):
    lo, hi = x - L.break_points[-1] * t, x - L.break_points[0] * t
    ys = np.linspace(lo, hi, n)
    return float(np.min(t * L((x - ys) / t) + gpc.g(ys))), (hi - lo) / (n - 1)


@st.composite
def matched_problems(draw, max_breaks=3, max_jumps=3):
    n = draw(st.integers(1, max_breaks))
    c = sorted(draw(st.lists(st.integers(-6, 6), min_size=n, max_size=n, unique=True)))
    c = [v / 2 for v in c]
    m = sorted(draw(st.lists(st.integers(-8, 8), min_size=n + 1, max_size=n + 1, unique=True)))
    if not (m[0] < 0 < m[-1]):
        m = list(range(-(n // 2) - 1, -(n // 2) - 1 + n + 2))
        m = [v for v in m if v != 0][: n + 1]
        if not (m[0] < 0 < m[-1]):
            m = [-1] + list(range(1, n + 1))
    m = [v / 4 for v in m]
    k = draw(st.integers(0, max_jumps))
    d = sorted(draw(st.lists(st.integers(-12, 12), min_size=k, max_size=k, unique=True)))
    d = [v / 4 for v in d]
    vals = draw(st.lists(st.sampled_from(c), min_size=k + 1, max_size=k + 1))
    x = draw(st.integers(-8, 8)) / 4
    t = draw(st.sampled_from([0.25, 0.5, 1.0, 1.5]))
    return make_pwl(c, m, draw(st.integers(-3, 3)) / 2), make_piecewise_constant(d, vals), x, t


@settings(max_examples=30, deadline=None)
@given(matched_problems())
def test_discrete_oracle_and_confinement(problem):
    H, gpc, x, t = problem
    L = conjugate(H)
    r = discrete_exact_minimizer(L, gpc, x, t)
    qb, step = exact_brute(L, gpc, x, t)
    lip = max(abs(v) for v in gpc.values) + max(abs(c) for c in H.break_points)
    assert r.q_min <= qb + 1e-12
    assert qb - r.q_min <= lip * step + 1e-12
    assert discrete_w(L, gpc, x, t) in set(H.break_points)


@settings(max_examples=30, deadline=None)
@given(matched_problems())
def test_discrete_monotone_in_x(problem):
    H, gpc, _, t = problem
    L = conjugate(H)
    ys = [discrete_exact_minimizer(L, gpc, float(x), t).y_star for x in np.linspace(-3, 3, 49)]
    assert all(Fraction(a) <= Fraction(b) for a, b in zip(ys, ys[1:]))


# ------------------------------------------------------------------- fields

def test_solve_field_closed_form_and_monotone():
    x = np.linspace(-3, 3, 121)
    f = solve_field(K_ABS, G2, x, 1.0)
    assert np.max(np.abs(f.w_values - closed_form_w(x, 1.0))) <= 1e-8
    assert np.all(np.diff(f.y_star_values) >= -1e-9)
    rows = list(f.rows())
    assert len(rows) == x.size and len(rows[0]) == 5
    assert set(f.to_json()) == {"t", "x", "u", "w", "y_star", "kind"}


def test_solve_field_threads_identical():
    x = np.linspace(-2, 2, 41)
    a = solve_field(K_DEAD, SHOCK, x, 1.0)
    b = solve_field(K_DEAD, SHOCK, x, 1.0, workers=3)
    assert np.array_equal(a.w_values, b.w_values) and np.array_equal(a.y_star_values, b.y_star_values)


def test_shock_flags():
    x = np.linspace(-1.5, 1.5, 61)
    f = solve_field(K_DEAD, SHOCK, x, 1.0)
    flags = shock_flags(x, f.y_star_values)
    assert flags[30] and flags.sum() <= 3
    assert not shock_flags(x, 0.5 * x).any()


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4), st.floats(0.2, 2.0))
def test_monotone_y_star_property(coeffs, t):
    g = polynomial(coeffs)
    xs = np.linspace(-2, 2, 17)
    ys = solve_field(K_DEAD, g, xs, t).y_star_values
    eta = SearchConfig().eta
    assert np.all(np.diff(ys) >= -eta * (1 + np.max(np.abs(ys))) - 1e-9)
