from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from killedwalk import oracles
from killedwalk.environment import Environment, GapVector, from_gaps, to_gaps
from killedwalk.exact_walk import (
    CrossingUnderflowError,
    conditioned_crossing_time_free,
    corrected_upper_bound,
    crossing_time_bounds,
    f_m,
    f_m_limit,
    recursion_log_product,
    restricted_crossing_time,
    ruin_probability,
    run_recursion,
    solve_crossing,
)

envs = st.builds(
    lambda bits, M, origin: (bits, M, origin),
    st.lists(st.booleans(), min_size=2, max_size=60),
    st.sampled_from([0.3, 1.0, 2.0, 5.0]),
    st.booleans(),
)


def _env(bits, M, origin):
    vals = np.where(bits, M, 0.0)
    vals[0] = M if origin else 0.0
    return Environment(0, vals, M), len(bits) - 1


def test_closed_forms_against_fraction_oracle():
    for n in range(2, 25):
        h, g = oracles.fraction_ruin_and_time(n)
        for k in range(1, n):
            assert h[k] == ruin_probability(k, n)
            assert g[k] == restricted_crossing_time(k, n)


def test_free_conditioned_time():
    assert conditioned_crossing_time_free(1) == 1
    assert conditioned_crossing_time_free(4) == Fraction(6)
    for y in range(1, 30):
        env = Environment(0, np.zeros(y + 1), 1.0)
        assert solve_crossing(env, y).t_cond == pytest.approx(float(conditioned_crossing_time_free(y)), rel=1e-13)


def test_y_one():
    env = Environment(0, np.array([1.0, 0.0]), 1.0)
    sol = solve_crossing(env, 1)
    assert sol.z == pytest.approx(0.5 * math.exp(-1.0))
    assert sol.t_cond == 1.0


@settings(max_examples=60, deadline=None)
@given(envs)
def test_solve_matches_banded_oracle(case):
    env, y = _env(*case)
    if y < 2:
        return
    sol = solve_crossing(env, y)
    h, g = oracles.banded_crossing(env.values.copy())
    np.testing.assert_allclose(sol.h[1:], h[1:], rtol=1e-10)
    np.testing.assert_allclose(sol.g[1:-1], g[1:-1], rtol=1e-9)


@settings(max_examples=40, deadline=None)
@given(envs)
def test_solve_matches_dense_chain(case):
    env, y = _env(*case)
    if y < 3:
        return
    sol = solve_crossing(env, y)
    surv = np.ones(y + 1)
    surv[1:y] = np.exp(-env.values[1:y])
    prob, time = oracles.absorbing_chain_time(surv, 1)
    assert sol.h[1] == pytest.approx(prob, rel=1e-9)
    assert sol.t_cond == pytest.approx(1.0 + time, rel=1e-9)


@settings(max_examples=80, deadline=None)
@given(envs)
def test_recursion_product_is_z(case):
    env, y = _env(*case)
    gaps = to_gaps(env, y)
    lp = recursion_log_product(gaps, env.potential(0), env.M)
    assert lp == pytest.approx(solve_crossing(env, y).log_z, rel=1e-12, abs=1e-12)


def test_second_step_ignores_first_crossing():
    # the walk from x_1 that falls back to the origin is already lost
    gaps = GapVector((2, 3, 4))
    M = 1.0
    env = from_gaps(gaps, M)
    states = run_recursion(gaps, 0.0, M)
    h, _ = oracles.banded_crossing(env.values[:6].copy())
    assert states[1].u == pytest.approx(h[2], rel=1e-13)
    assert abs(f_m(2, 3, states[0].u, M) - h[2]) > 1e-4


def test_f_m_edge_cases():
    assert f_m(0, 3, 0.7, 1.0) == pytest.approx(math.exp(-1) / 6)
    assert f_m(10**9, 10**9, 0.0, 1.0) * 2 * 10**9 == pytest.approx(1 / math.expm1(1.0), rel=1e-6)
    assert f_m_limit(5, 1.0) == pytest.approx(math.exp(-1) / (10 * (1 - math.exp(-1))))
    with pytest.raises(ValueError):
        f_m(1, 0, 0.1, 1.0)
    with pytest.raises(ValueError):
        f_m(1, 2, 1.5, 1.0)


@settings(max_examples=100, deadline=None)
@given(envs)
def test_lower_bound_and_cap(case):
    env, y = _env(*case)
    t = solve_crossing(env, y).t_cond
    lo, _, cap = crossing_time_bounds(to_gaps(env, y), env.M)
    assert lo <= t <= cap


@settings(max_examples=100, deadline=None)
@given(envs)
def test_corrected_upper_bound(case):
    env, y = _env(*case)
    t = solve_crossing(env, y).t_cond
    assert t <= corrected_upper_bound(to_gaps(env, y), env.M) * (1 + 1e-12)


def test_stated_upper_bound_fails_on_unit_gaps():
    env = from_gaps((1, 1, 1, 1), 4.0)
    t = solve_crossing(env, 4).t_cond
    _, hi, _ = crossing_time_bounds((1, 1, 1, 1), 4.0)
    assert t > hi


def test_underflow_is_reported():
    env = Environment(0, np.array([0.0, 800.0, 0.0]), 800.0)
    with pytest.raises(CrossingUnderflowError):
        solve_crossing(env, 2)


def test_tiny_z_stays_finite_in_log():
    y = 4000
    env = Environment.constant(0, y, 3.0)
    sol = solve_crossing(env, y)
    assert sol.z_underflows
    assert np.isfinite(sol.log_z) and sol.log_z < -1e4


def test_csv_and_json():
    env = from_gaps((2, 3), 1.0)
    sol = solve_crossing(env, 5)
    lines = sol.to_csv().splitlines()
    assert lines[0] == "site,h,g" and len(lines) == 7
    assert '"t_cond"' in sol.summary_json()


def test_window_must_cover():
    env = Environment(0, np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        solve_crossing(env, 5)
