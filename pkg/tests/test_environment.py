from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from killedwalk.environment import (
    Environment,
    GapVector,
    WalkParams,
    child_seeds,
    from_gaps,
    sample_environment,
    to_gaps,
)

gap_lists = st.lists(st.integers(1, 12), min_size=1, max_size=10)


def test_params_validation():
    with pytest.raises(ValueError):
        WalkParams(0.0, 1.0)
    with pytest.raises(ValueError):
        WalkParams(1.2, 1.0)
    with pytest.raises(ValueError):
        WalkParams(0.5, 0.0)
    with pytest.raises(ValueError):
        WalkParams(0.5, 1.0, lam=-0.1)


def test_rho():
    assert WalkParams(0.25, 1.0).rho == pytest.approx(1 / 3)
    assert math.isinf(WalkParams(1.0, 1.0).rho)
    assert not WalkParams(1.0, 1.0).rho_defined


def test_environment_rejects_other_values():
    with pytest.raises(ValueError):
        Environment(0, np.array([0.0, 0.5]), 1.0)


def test_environment_is_read_only():
    env = Environment(-2, np.array([0.0, 1.0, 0.0]), 1.0)
    with pytest.raises(ValueError):
        env.values[0] = 1.0
    assert env.window == (-2, 0)
    assert env[-1] == 1.0
    with pytest.raises(IndexError):
        env.potential(1)


@given(st.lists(st.booleans(), min_size=1, max_size=40), st.integers(-20, 20))
def test_line_round_trip(bits, a):
    env = Environment(a, np.where(bits, 2.5, 0.0), 2.5)
    assert Environment.from_line(env.to_line(), M=2.5) == env


@given(gap_lists)
def test_gap_round_trip(gaps):
    gv = GapVector(tuple(gaps))
    env = from_gaps(gv, 1.5)
    assert to_gaps(env, gv.total) == gv
    assert GapVector.from_text(gv.to_text()) == gv


def test_empty_interval_is_single_gap():
    env = Environment(0, np.zeros(8), 1.0)
    assert to_gaps(env, 7).gaps == (7,)


def test_gap_vector_rejects_zero():
    with pytest.raises(ValueError):
        GapVector((2, 0))


def test_sampling_is_seeded():
    params = WalkParams(0.3, 1.0)
    assert sample_environment(params, (-5, 50), 9) == sample_environment(params, (-5, 50), 9)


def test_child_seeds_are_stable():
    a = [s.generate_state(2).tolist() for s in child_seeds(123, 4)]
    b = [s.generate_state(2).tolist() for s in child_seeds(123, 6)[:4]]
    assert a == b
    assert len({tuple(x) for x in a}) == 4
