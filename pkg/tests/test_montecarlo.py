from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from killedwalk.environment import Environment, WalkParams, from_gaps, sample_environment
from killedwalk.exact_walk import solve_crossing
from killedwalk.montecarlo import (
    batch_crossing_time,
    first_step_counts,
    sample_conditioned_path,
    sample_lengths,
)


def test_vacant_two_sites():
    env = Environment(0, np.zeros(3), 1.0)
    sol = solve_crossing(env, 2)
    est = batch_crossing_time(env, 2, 100_000, seed=0)
    assert est.mean == pytest.approx(1.0 + sol.g[1] / sol.h[1])
    assert est.mean == 2.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([0.1, 0.5]), st.sampled_from([0.5, 3.0]), st.integers(1, 40))
def test_paths_are_valid(seed, p, M, y):
    env = sample_environment(WalkParams(p, M), (0, y), seed)
    sol = solve_crossing(env, y)
    path = sample_conditioned_path(sol, env, seed)
    assert path.is_valid()
    assert path.y == y and path.length == path.steps.size - 1


def test_first_step_kernel():
    env = sample_environment(WalkParams(0.4, 1.0), (0, 30), 2)
    sol = solve_crossing(env, 30)
    n = 100_000
    for site in (1, 5, 17):
        k = first_step_counts(sol, site, n, seed=site)
        pr = sol.right_prob[site]
        assert abs(k - n * pr) <= 4 * math.sqrt(n * pr * (1 - pr)) + 1e-9


def test_lockstep_and_single_path_laws_agree():
    env = sample_environment(WalkParams(0.3, 1.0), (0, 25), 4)
    sol = solve_crossing(env, 25)
    a = sample_lengths(sol, 20_000, seed=1)
    b = np.array([sample_conditioned_path(sol, env, s).length for s in range(3000)])
    se = math.hypot(a.std() / math.sqrt(a.size), b.std() / math.sqrt(b.size))
    assert abs(a.mean() - b.mean()) <= 4 * se


def test_obstacle_occupation():
    M = 6.0
    env = from_gaps((8, 9), M)
    sol = solve_crossing(env, 17)
    visits = [sample_conditioned_path(sol, env, s).occupation()[8] for s in range(3000)]
    assert np.mean(visits) <= 1 / (1 - math.exp(-M)) + 3 * np.std(visits) / math.sqrt(3000)


def test_single_path_has_no_stderr():
    env = Environment(0, np.zeros(6), 1.0)
    est = batch_crossing_time(env, 5, 1, seed=0)
    assert not est.stderr_defined


def test_path_dump():
    env = Environment(0, np.zeros(4), 1.0)
    path = sample_conditioned_path(solve_crossing(env, 3), env, 0)
    lines = path.to_text().split()
    assert lines[0] == "0" and lines[-1] == "3"
    assert [int(s) for s in lines] == path.steps.tolist()
