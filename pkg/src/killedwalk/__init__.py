"""Crossing speeds of a simple random walk killed by Bernoulli obstacles."""

from .environment import Environment, GapVector, WalkParams, from_gaps, sample_environment, to_gaps
from .exact_walk import CrossingSolution, f_m, run_recursion, solve_crossing
from .montecarlo import ConditionedPath, batch_crossing_time, sample_conditioned_path
from .quenched import (
    SpeedEstimate,
    TruncationPolicy,
    main_term,
    quenched_lyapunov,
    quenched_speed_mc,
    site_crossing_expectation,
    speed_from_lyapunov,
)

__all__ = [
    "ConditionedPath",
    "CrossingSolution",
    "Environment",
    "GapVector",
    "SpeedEstimate",
    "TruncationPolicy",
    "WalkParams",
    "batch_crossing_time",
    "f_m",
    "from_gaps",
    "main_term",
    "quenched_lyapunov",
    "quenched_speed_mc",
    "run_recursion",
    "sample_conditioned_path",
    "sample_environment",
    "site_crossing_expectation",
    "solve_crossing",
    "speed_from_lyapunov",
    "to_gaps",
]
