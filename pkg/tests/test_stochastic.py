import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyflux.data import sample_brownian
from polyflux.pwl import make_pwl
from polyflux.stochastic import (EnsembleConfigError, PathConfig, ensemble_run, feasible_hull,
                                 path_window, variance_profile)
from polyflux.variational import SearchConfig, SharpKernel, solve_field

ABS = make_pwl([0.0], [-1.0, 1.0])
FAST = SearchConfig(M=256)


def test_feasible_hull_and_window():
    assert feasible_hull(ABS, [0.0, 2.0], 1.0) == (-1.0, 3.0)
    lo, hi = path_window(ABS, PathConfig(margin=0.1), [0.0, 2.0], 1.0)
    assert lo == pytest.approx(-1.4) and hi == pytest.approx(3.4)
    # the origin is always inside the window, because B(0) = 0 is pinned
    lo, hi = path_window(ABS, PathConfig(margin=0.0), [5.0], 1.0)
    assert lo == 0.0 and hi == 6.0


def test_window_too_small_names_requirement():
    with pytest.raises(EnsembleConfigError, match="required window"):
        ensemble_run(ABS, PathConfig(window=(-0.5, 0.5)), [0.0], 1.0, 4, seed=1)


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        ensemble_run(ABS, PathConfig(), [0.0], 1.0, 1, seed=1)
    with pytest.raises(ValueError):
        ensemble_run(ABS, PathConfig(), [0.0], 0.0, 4, seed=1)


def test_mean_zero_at_origin():
    stats = ensemble_run(ABS, PathConfig(), [0.0], 1.0, 1024, seed=2024, cfg=FAST)
    assert abs(stats.mean_w[0]) <= 3.0 * np.sqrt(stats.var_w[0] / stats.n_paths)
    assert all(c.passed for c in stats.checks)


def test_two_path_smoke():
    stats = ensemble_run(ABS, PathConfig(), [0.0, 1.0], 1.0, 2, seed=3, cfg=FAST, n_crosscheck=2)
    assert stats.n_paths == 2
    assert np.all(np.isfinite(stats.mean_w)) and np.all(np.isfinite(stats.ci_half))


def test_zero_noise():
    x = [-1.0, 0.0, 0.5, 2.0]
    stats = ensemble_run(ABS, PathConfig(scale=0.0), x, 1.0, 8, seed=5, cfg=FAST)
    assert np.all(stats.mean_w == 0.0) and np.all(stats.var_w == 0.0)
    prof = variance_profile(stats)
    assert prof["trend"].passed and np.all(prof["isotonic_fit"] == 0.0)


def test_reproducible_bitwise():
    a = ensemble_run(ABS, PathConfig(), [0.0, 1.0], 1.0, 16, seed=9, cfg=FAST)
    b = ensemble_run(ABS, PathConfig(), [0.0, 1.0], 1.0, 16, seed=9, cfg=FAST)
    c = ensemble_run(ABS, PathConfig(), [0.0, 1.0], 1.0, 16, seed=10, cfg=FAST)
    assert a.to_json() == b.to_json()
    assert not np.array_equal(a.mean_w, c.mean_w)


def test_threads_match_serial(monkeypatch):
    a = ensemble_run(ABS, PathConfig(), [0.0, 1.0], 1.0, 8, seed=4, cfg=FAST)
    monkeypatch.setenv("POLYFLUX_THREADS", "3")
    b = ensemble_run(ABS, PathConfig(), [0.0, 1.0], 1.0, 8, seed=4, cfg=FAST)
    assert a.to_json() == b.to_json()


def test_symmetric_grid_variances_agree():
    stats = ensemble_run(ABS, PathConfig(), [-1.0, 1.0], 1.0, 512, seed=77, cfg=FAST)
    prof = variance_profile(stats)
    assert len(prof["symmetry"]) == 1
    assert prof["symmetry_passed"]
    # reflection y -> -y maps B to another two-sided Brownian path with w -> -w
    assert abs(stats.mean_w[0] + stats.mean_w[1]) <= np.hypot(stats.ci_half[0], stats.ci_half[1])


def test_crosscheck_within_step():
    stats = ensemble_run(ABS, PathConfig(step=0.01), [0.0, 0.5, 1.0], 1.0, 8, seed=1, cfg=FAST)
    cc = [c for c in stats.checks if c.check == "w_vs_du_dx"][0]
    assert cc.passed and cc.tolerance == pytest.approx(0.1)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sign_of_w_right_of_origin(seed):
    # for H = |q| and x = t the admissible window is [0, 2t] and B(0) = 0, so the
    # minimizer of int_0^y B is at 0, at an interior zero of B, or at 2t with B(2t) <= 0
    path = sample_brownian(-0.5, 2.5, 0.01, seed=seed)
    fld = solve_field(SharpKernel(ABS), path, [1.0], 1.0, FAST)
    assert fld.w_values[0] <= 1e-9
