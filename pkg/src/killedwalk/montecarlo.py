"""Path-level sampling of the conditioned walk via its Doob transform.

Given the exact solution on ``[0, y]``, the walk conditioned to reach ``y``
before returning to 0 (and before being killed) is a Markov chain whose
left-step probability at ``x`` is ``e^{-V(x)} h(x-1) / (2 h(x))``.  These
probabilities are already stored as ``CrossingSolution.left_prob``, so paths
are drawn exactly with no rejection step.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .environment import Environment, make_rng
from .exact_walk import CrossingSolution, solve_crossing

STEP_CAP = 10**9
_BLOCK = 4096


class PathDefectError(RuntimeError):
    """A sampled path exceeded the step cap, which signals a broken kernel."""


def env_id(env: Environment) -> str:
    return hashlib.sha1(env.to_line().encode()).hexdigest()[:12]


@dataclass(frozen=True)
class ConditionedPath:
    steps: np.ndarray
    env_ref: str
    seed: object

    @property
    def length(self) -> int:
        return int(self.steps.size - 1)

    @property
    def y(self) -> int:
        return int(self.steps[-1])

    def is_valid(self) -> bool:
        s = self.steps
        return bool(
            s[0] == 0
            and np.all(np.abs(np.diff(s)) == 1)
            and np.all(s[1:] > 0)
            and np.all(s[:-1] < s[-1])
        )

    def occupation(self) -> np.ndarray:
        """Visits to each site 0..y before the final arrival."""
        return np.bincount(self.steps[:-1], minlength=self.y + 1)

    def to_text(self) -> str:
        return "\n".join(str(int(x)) for x in self.steps) + "\n"


def sample_conditioned_path(sol: CrossingSolution, env: Environment, seed=None,
                            step_cap: int = STEP_CAP) -> ConditionedPath:
    """One exact draw from the conditioned path law on ``[0, y]``."""
    rng = make_rng(seed)
    y = sol.y
    pm = sol.left_prob
    steps = [0, 1]
    x = 1
    buf = rng.random(_BLOCK)
    i = 0
    while x != y:
        if len(steps) > step_cap:
            raise PathDefectError(f"path exceeded {step_cap} steps")
        if i == _BLOCK:
            buf = rng.random(_BLOCK)
            i = 0
        x += -1 if buf[i] < pm[x] else 1
        i += 1
        steps.append(x)
    return ConditionedPath(np.asarray(steps, dtype=np.int64), env_id(env), seed)


def sample_lengths(sol: CrossingSolution, n_paths: int, seed=None,
                   step_cap: int = STEP_CAP) -> np.ndarray:
    """Crossing times of ``n_paths`` independent paths, advanced in lockstep."""
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    rng = make_rng(seed)
    y = sol.y
    pm = sol.left_prob
    pos = np.ones(n_paths, dtype=np.int64)
    length = np.ones(n_paths, dtype=np.int64)
    active = np.flatnonzero(pos != y)
    t = 1
    while active.size:
        if t > step_cap:
            raise PathDefectError(f"paths exceeded {step_cap} steps")
        u = rng.random(active.size)
        pos[active] += np.where(u < pm[pos[active]], -1, 1)
        length[active] += 1
        active = active[pos[active] != y]
        t += 1
    return length


@dataclass(frozen=True)
class CrossingTimeEstimate:
    mean: float
    stderr: float
    n_paths: int

    @property
    def stderr_defined(self) -> bool:
        return not math.isnan(self.stderr)


def batch_crossing_time(env: Environment, y: int, n_paths: int, seed=None) -> CrossingTimeEstimate:
    """Sample mean of tau_y over conditioned paths; stderr is NaN for one path."""
    sol = solve_crossing(env, y)
    lengths = sample_lengths(sol, n_paths, seed)
    se = float(lengths.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else math.nan
    return CrossingTimeEstimate(float(lengths.mean()), se, n_paths)


def first_step_counts(sol: CrossingSolution, site: int, n: int, seed=None) -> int:
    """Number of right steps in ``n`` draws of the kernel at ``site``."""
    if not 1 <= site <= sol.y - 1:
        raise ValueError("site must be interior")
    rng = make_rng(seed)
    return int(np.sum(rng.random(n) >= sol.left_prob[site]))
