from __future__ import annotations

import csv
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from killedwalk import oracles
from killedwalk._kernels import escape_time_from_gaps
from killedwalk.environment import Environment, WalkParams, sample_environment
from killedwalk.quenched import (
    SpeedEstimate,
    TruncationPolicy,
    WindowTooShortError,
    append_ledger,
    constant_lyapunov,
    constant_speed,
    main_term,
    main_term_series,
    quenched_lyapunov,
    quenched_speed_mc,
    site_crossing_expectation,
    speed_from_lyapunov,
    truncation_bound,
)


def _left_env(left_gaps, M, origin_occupied):
    """Environment on [-depth-1, 1] with obstacles at -a_1 > -a_2 > ..."""
    depth = sum(left_gaps)
    a = -depth - 1
    vals = np.zeros(depth + 3)
    pos = 0
    for g in left_gaps:
        pos -= g
        vals[pos - a] = M
    if origin_occupied:
        vals[-a] = M
    return Environment(a, vals, M)


def test_main_term_values():
    assert main_term(Fraction(1)) == 1
    assert main_term(Fraction(1, 2)) == Fraction(4, 3)
    assert main_term(Fraction(1, 4)) == Fraction(5, 2)
    assert main_term(WalkParams(0.5, 1.0)) == pytest.approx(4 / 3)
    with pytest.raises(ValueError):
        main_term(0.0)


@pytest.mark.parametrize("p", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
def test_main_term_series(p):
    assert abs(main_term(p) - main_term_series(p)) <= 1e-10


def test_full_occupation_depth_one():
    env = Environment.constant(-5, 1, 2.0)
    res = site_crossing_expectation(env, TruncationPolicy(1))
    assert res.value == 1.0 and res.converged


def test_full_occupation_deep_limit():
    M = 1.0
    env = Environment.constant(-400, 1, M)
    res = site_crossing_expectation(env, TruncationPolicy(300))
    assert res.value == pytest.approx(1 / constant_speed(M), rel=1e-10)


def test_vacant_window_does_not_converge():
    vals = []
    for L in (5, 20, 80):
        env = Environment(-L, np.zeros(L + 2), 1.0)
        with pytest.raises(WindowTooShortError):
            site_crossing_expectation(env, TruncationPolicy(1))
        res = site_crossing_expectation(env, TruncationPolicy(1), strict=False)
        assert not res.converged and math.isinf(res.error_bound)
        vals.append(res.value)
    assert vals[0] < vals[1] < vals[2]


def test_single_obstacle_against_dense_chain():
    M = 2.0
    env = Environment(-2, np.array([M, 0.0, 0.0, 0.0]), M)
    res = site_crossing_expectation(env, TruncationPolicy(1))
    _, ref = oracles.absorbing_chain_time(np.ones(4), 2)
    assert abs(res.value - ref) <= 1e-10
    assert res.value == pytest.approx(5 / 3)


left_cases = st.tuples(
    st.lists(st.integers(1, 8), min_size=0, max_size=6),
    st.integers(0, 8),
    st.sampled_from([0.5, 1.0, 3.0]),
)


@settings(max_examples=80, deadline=None)
@given(left_cases)
def test_gap_kernel_matches_environment_route(case):
    rest, a1, M = case
    gaps = [a1, *rest]
    env = _left_env(gaps, M, a1 == 0)
    ref = site_crossing_expectation(env, TruncationPolicy(len(gaps))).value
    got = escape_time_from_gaps(np.array(gaps, dtype=np.int64), M if a1 == 0 else 0.0, M)
    assert got == pytest.approx(ref, rel=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([0.1, 0.3, 0.6]), st.sampled_from([0.5, 1.0, 3.0]))
def test_truncation_soundness(seed, p, M):
    params = WalkParams(p, M)
    env = sample_environment(params, (-3000, 1), seed)
    prev = None
    for j in range(1, 7):
        try:
            res = site_crossing_expectation(env, TruncationPolicy(j))
        except WindowTooShortError:
            break
        if prev is not None:
            assert abs(res.value - prev.value) <= prev.error_bound
        prev = res


def test_default_depth_meets_tolerance():
    params = WalkParams(0.3, 1.0)
    pol = TruncationPolicy.for_params(params, 1e-4)
    assert pol.error_bound(params) < 1e-4
    assert truncation_bound(0.3, 1.0, pol.depth_obstacles - 1) >= 1e-4
    assert truncation_bound(1.0, 1.0, 2) == pytest.approx(math.exp(-2) / (1 - math.exp(-1)) ** 3)


def test_mc_full_occupation_depth_one_is_exact():
    est = quenched_speed_mc(WalkParams(1.0, 3.0), 1000, TruncationPolicy(1), seed=0)
    assert est.inverse == 1.0 and est.value == 1.0 and est.stderr == 0.0


def test_mc_main_term_at_large_m():
    est = quenched_speed_mc(WalkParams(0.5, 8.0), 100_000, seed=4)
    assert abs(est.inverse - 4 / 3) <= 3 * est.stderr + truncation_bound(0.5, 8.0, 1)


def test_iid_and_ergodic_agree():
    params = WalkParams(0.3, 1.0)
    a = quenched_speed_mc(params, 100_000, seed=1, mode="iid")
    b = quenched_speed_mc(params, 100_000, seed=2, mode="ergodic")
    assert abs(a.inverse - b.inverse) <= 3 * math.hypot(a.stderr, b.stderr)
    with pytest.raises(ValueError):
        quenched_speed_mc(params, 100, seed=1, mode="other")


def test_mc_is_seeded():
    params = WalkParams(0.3, 1.0)
    assert quenched_speed_mc(params, 5000, seed=7) == quenched_speed_mc(params, 5000, seed=7)


def test_lyapunov_vacant_is_zero():
    env = Environment(-100, np.zeros(1100), 1.0)
    assert quenched_lyapunov(env, 0.0, 1000) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("gamma", [0.01, 0.5, 3.0])
def test_lyapunov_constant(gamma):
    env = Environment.constant(-100, 10**5 - 1, gamma)
    assert abs(quenched_lyapunov(env, 0.2, 10**5) - constant_lyapunov(gamma + 0.2)) <= 1e-6


def test_lyapunov_halves_agree():
    params = WalkParams(0.4, 1.5)
    env = sample_environment(params, (-2000, 199_999), 3)
    terms = []
    for lo in (0, 100_000):
        sub = Environment(lo - 2000, env.slice(lo - 2000, lo + 99_999), env.M)
        shifted = Environment(-2000, sub.values, env.M)
        terms.append(quenched_lyapunov(shifted, 0.0, 100_000))
    # per-site spread from short blocks estimates the self-averaging scale
    block = [
        quenched_lyapunov(Environment(-2000, env.slice(k - 2000, k + 999), env.M), 0.0, 1000)
        for k in range(0, 100_000, 1000)
    ]
    spread = np.std(block, ddof=1) / math.sqrt(100)
    assert abs(terms[0] - terms[1]) <= 3 * math.sqrt(2) * spread


def test_speed_from_lyapunov_constant():
    est = speed_from_lyapunov(WalkParams(1.0, 0.5), 500)
    assert abs(est.value - math.sqrt(1 - math.exp(-1))) <= 1e-3
    assert est.diagnostics["monotone"]


def test_speed_small_gamma_trend():
    ratios = [speed_from_lyapunov(WalkParams(1.0, g), 500).value / math.sqrt(2 * g) for g in (0.5, 0.1, 0.02)]
    assert ratios[0] < ratios[1] < ratios[2] < 1.0
    assert abs(ratios[2] - 1) < 0.02


def test_lyapunov_speed_agrees_with_mc():
    params = WalkParams(0.5, 4.0)
    a = speed_from_lyapunov(params, 10**5, seed=10)
    b = quenched_speed_mc(params, 100_000, seed=11)
    assert abs(a.inverse - b.inverse) <= 3 * math.hypot(a.stderr, b.stderr)


def test_speed_from_lyapunov_rejects_bad_grid():
    with pytest.raises(ValueError):
        speed_from_lyapunov(WalkParams(1.0, 0.5), 100, steps=(0.1, 0.07, 0.01))


def test_speed_estimate_invariants():
    est = SpeedEstimate(1.25, 0.01, 10, "closed-form", None, WalkParams(0.5, 1.0))
    assert est.value * est.inverse == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        SpeedEstimate(1.0, -1.0, 10, "closed-form", None, WalkParams(0.5, 1.0))
    with pytest.raises(ValueError):
        SpeedEstimate(1.0, 0.0, 10, "guess", None, WalkParams(0.5, 1.0))


def test_ledger_csv(tmp_path):
    path = tmp_path / "ledger.csv"
    est = quenched_speed_mc(WalkParams(0.5, 2.0), 2000, seed=1)
    append_ledger(path, [est])
    append_ledger(path, [est])
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 2
    assert list(rows[0]) == ["method", "p", "M", "lambda", "y", "value", "inverse", "stderr", "n", "seed"]
    assert float(rows[0]["inverse"]) == est.inverse
