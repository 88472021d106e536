import math

import numpy as np
import pytest

from fellerlab import (CouplingParams, EquationSpec, Field, Grid, ShiftPath,
                       blowup_probability, estimate_tv_bound, l2_norm,
                       weighted_expectation, wilson_interval)


@pytest.fixture
def grid():
    return Grid(dim=1, n=32, extent=(1.0,))


@pytest.fixture
def nonlinear():
    return EquationSpec.she(drift="cubic_decay", diffusion="bounded_smooth", g_min=1.0)


DT = 2.0**-7
T = 0.25
N_STEPS = 128


def _state(grid, amp=0.3):
    return Field(grid, amp * np.cos(2 * np.pi * grid.axes()[0]))


def _direction(grid):
    f = Field(grid, np.cos(2 * np.pi * grid.axes()[0]))
    return f * (1.0 / l2_norm(f))


def test_wilson_interval_edges():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and hi < 5.0 / 100
    lo, hi = wilson_interval(100, 100)
    assert hi > 0.999 and lo > 0.95
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi


def test_tv_same_state_trivial(grid, nonlinear):
    u = _state(grid)
    report = estimate_tv_bound(u, u, T, nonlinear,
                               CouplingParams(m_bound=10.0, k_gamma=4),
                               n_samples=5, seed=40, dt=DT)
    assert report.gamma == 0.0
    assert report.mean_h_norm_sq == 0.0
    assert report.fail_prob == 0.0
    assert report.bound == 0.0


def test_tv_linear_additive_bound(grid):
    spec = EquationSpec.she(drift="zero", diffusion="one")
    gamma, m_bound = 0.1, 8.0
    u = _state(grid)
    u_bar = u + _direction(grid) * gamma
    report = estimate_tv_bound(u, u_bar, T, spec,
                               CouplingParams(m_bound=m_bound, k_gamma=4),
                               n_samples=20, seed=41, dt=DT)
    assert report.fail_prob == 0.0
    assert 0.0 <= report.bound <= 2.0 * math.e * m_bound * gamma
    assert report.mean_h_norm_sq <= m_bound**2 * gamma**2 + 1e-9


def test_tv_reproducible_across_threads(grid, nonlinear):
    u = _state(grid)
    u_bar = u + _direction(grid) * 0.05
    params = CouplingParams(m_bound=10.0, k_gamma=4)
    fns = [("mean", lambda f: float(np.mean(f.values)))]
    a = estimate_tv_bound(u, u_bar, T, nonlinear, params, 8, 42, DT,
                          functionals=fns, threads=1)
    b = estimate_tv_bound(u, u_bar, T, nonlinear, params, 8, 42, DT,
                          functionals=fns, threads=2)
    assert a.bound == b.bound
    assert a.mean_h_norm_sq == b.mean_h_norm_sq
    assert [r.residual for r in a.records] == [r.residual for r in b.records]
    assert a.mean_diff == b.mean_diff


def test_tv_fail_prob_weakly_better_at_smaller_t(grid, nonlinear):
    u = _state(grid)
    u_bar = u + _direction(grid) * 0.05
    params = CouplingParams(m_bound=10.0, k_gamma=8)
    late = estimate_tv_bound(u, u_bar, 0.25, nonlinear, params, 30, 43, DT)
    early = estimate_tv_bound(u, u_bar, 0.125, nonlinear, params, 30, 43, DT)
    assert early.fail_prob <= late.fail_prob + (late.fail_interval[1] - late.fail_interval[0])


def test_weighted_zero_shift_z_is_zero(grid, nonlinear):
    u = _state(grid)
    h = ShiftPath.zeros(grid, 1, N_STEPS, DT)
    cmp = weighted_expectation(lambda f: float(np.mean(f.values)), u, h, T,
                               nonlinear, n_samples=50, seed=44)
    assert cmp.z_score == 0.0
    assert cmp.shifted_weighted_mean == cmp.unshifted_mean


def test_weighted_clamps_functional(grid, nonlinear):
    u = _state(grid)
    h = ShiftPath.zeros(grid, 1, N_STEPS, DT)
    cmp = weighted_expectation(lambda f: 1e9, u, h, T, nonlinear,
                               n_samples=5, seed=45)
    assert cmp.unshifted_mean == 1.0  # clamped to [-1, 1]


def test_weighted_requires_grid_info_for_callable(grid, nonlinear):
    with pytest.raises(ValueError):
        weighted_expectation(lambda f: 0.0, _state(grid), lambda out: None, T,
                             nonlinear, n_samples=2, seed=46)


def test_blowup_probability_trivial(grid, nonlinear):
    u = _state(grid, amp=0.2)
    rep = blowup_probability(u, T, nonlinear, n_samples=40, seed=47, dt=DT)
    assert rep.estimate == 0.0
    assert rep.interval[0] == 0.0 and rep.interval[1] < 0.12


def test_blowup_probability_certain(grid):
    spec = EquationSpec.she(drift="cubic_growth", diffusion="one")
    u = Field.constant(grid, 10.0)
    rep = blowup_probability(u, T, spec, n_samples=20, seed=48, dt=DT)
    assert rep.estimate == 1.0


def test_blowup_continuity_smoke(grid):
    """Near the basin boundary of the inverted cubic, nearby starts give
    estimates within joint uncertainty as the displacement shrinks."""
    spec = EquationSpec.she(drift="cubic_growth", diffusion="one", r_blowup=1e4)
    base = 2.2  # u' = u^3 from 2.2 explodes around t = 0.1; noise decides
    a = blowup_probability(Field.constant(grid, base), T, spec, 60, 49, DT)
    b = blowup_probability(Field.constant(grid, base + 0.01), T, spec, 60, 49, DT)
    se = math.sqrt(max(a.estimate * (1 - a.estimate), 0.25 / 60) / 60)
    assert abs(a.estimate - b.estimate) <= 3.0 * math.sqrt(2.0) * max(se, 1 / 60)


def test_gamma_m_budget_enforced(grid, nonlinear):
    u = _state(grid)
    u_bar = u + _direction(grid) * 0.5
    with pytest.raises(ValueError):
        estimate_tv_bound(u, u_bar, T, nonlinear,
                          CouplingParams(m_bound=10.0, k_gamma=4), 2, 50, DT)
