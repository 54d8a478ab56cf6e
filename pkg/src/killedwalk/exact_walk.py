"""Exact hitting probabilities and conditioned crossing times in one environment.

Covers the no-killing closed forms, the tridiagonal solve for the killed
walk on ``[0, y]``, the gap recursion ``F_M`` and the crossing-time
sandwich bounds expressed through the gaps.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._kernels import conditioned_chain
from .environment import Environment, GapVector, to_gaps

_LOG_TINY = math.log(np.finfo(float).tiny)


class CrossingUnderflowError(ArithmeticError):
    """Survival at an obstacle is below double precision (M too large)."""


def ruin_probability(k: int, n: int) -> Fraction:
    """P^k(tau_n < tau_0) for the simple symmetric walk, i.e. k/n."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 <= k <= n:
        raise ValueError(f"start {k} outside [0, {n}]")
    return Fraction(k, n)


def restricted_crossing_time(k: int, n: int) -> Fraction:
    """E^k(tau_n; tau_n < tau_0) = k(n-k)(n+k)/(3n) for the simple walk."""
    if not 1 <= k <= n - 1:
        raise ValueError(f"start {k} outside [1, {n - 1}]")
    return Fraction(k * (n - k) * (n + k), 3 * n)


def conditioned_crossing_time_free(y: int) -> Fraction:
    """E(tau_y | tau_y < tau_0) from 0 without killing: (y^2 + 2)/3."""
    if y < 1:
        raise ValueError("y must be at least 1")
    if y == 1:
        return Fraction(1)
    return 1 + restricted_crossing_time(1, y) / ruin_probability(1, y)


@dataclass(frozen=True)
class CrossingSolution:
    """Killed walk on ``[0, y]`` conditioned to reach ``y`` before returning to 0.

    ``log_h[x] = log P^x(tau_y < tau_0)`` and ``w[x]`` is the conditioned
    expected remaining time from ``x``; ``g = w * h`` is the restricted
    expectation E^x(tau_y; tau_y < tau_0).
    """

    y: int
    log_h: np.ndarray
    w: np.ndarray
    log_z: float
    t_cond: float
    ratio: np.ndarray
    left_prob: np.ndarray
    survival: np.ndarray

    @property
    def h(self) -> np.ndarray:
        return np.exp(self.log_h)

    @property
    def g(self) -> np.ndarray:
        return self.w * self.h

    @property
    def z(self) -> float:
        return math.exp(self.log_z)

    @property
    def z_underflows(self) -> bool:
        return self.log_z < _LOG_TINY

    @property
    def right_prob(self) -> np.ndarray:
        """Conditioned probability of stepping right from each site."""
        pr = 1.0 - self.left_prob
        pr[0] = 1.0
        pr[self.y] = 0.0
        return pr

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["site", "h", "g"])
        for x, (h, g) in enumerate(zip(self.h, self.g)):
            writer.writerow([x, repr(float(h)), repr(float(g))])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "y": self.y,
            "z": self.z,
            "log_z": self.log_z,
            "t_cond": self.t_cond,
            "h1": float(self.h[1]) if self.y >= 1 else None,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary())


def solve_crossing(env: Environment, y: int) -> CrossingSolution:
    """Exact h, g, Z and conditioned mean crossing time on ``[0, y]``.

    The tridiagonal systems are eliminated left to right through the
    ratios ``h(x)/h(x+1)``, so everything stays in the log domain and no
    intermediate underflows even when Z is astronomically small.
    """
    if y < 1:
        raise ValueError("y must be at least 1")
    if not env.covers(0, y - 1):
        raise ValueError(f"window {env.window} does not cover [0, {y}]")
    surv = np.ones(y + 1)
    surv[:y] = env.survival(0, y - 1)
    if np.any(surv[1:y] == 0.0):
        raise CrossingUnderflowError("exp(-M) underflows; cannot solve")
    a, pm, d = conditioned_chain(surv)
    log_a = np.zeros(y + 1)
    log_a[1:y] = np.log(a[1:y])
    log_h = np.empty(y + 1)
    log_h[y] = 0.0
    log_h[1:y] = np.cumsum(log_a[1:y][::-1])[::-1]
    log_h[0] = -math.inf
    w = np.zeros(y + 1)
    w[1:y] = np.cumsum(d[1:y][::-1])[::-1]
    log_z = math.log(0.5) - float(env.potential(0)) + float(log_h[1])
    t_cond = 1.0 + float(w[1])
    return CrossingSolution(
        y=y,
        log_h=log_h,
        w=w,
        log_z=log_z,
        t_cond=t_cond,
        ratio=a,
        left_prob=pm,
        survival=surv,
    )


def f_m(ell: int, r: int, u: float, M: float) -> float:
    """Gap transfer F_M(ell, r, u).

    Probability of crossing a gap ``r`` from an obstacle whose left gap is
    ``ell``, given probability ``u`` of climbing back over that left gap.
    """
    if ell < 0 or r < 1:
        raise ValueError(f"need ell >= 0 and r >= 1, got ({ell}, {r})")
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"u must lie in [0, 1], got {u}")
    s = math.exp(-M)
    base = s / (2.0 * r)
    if ell == 0:
        return base
    return base / (1.0 - s * (1.0 - 1.0 / (2.0 * r) - (1.0 - u) / (2.0 * ell)))


def f_m_limit(r: float, M: float) -> float:
    """Large-gap asymptote e^{-M} / (2 r (1 - e^{-M}))."""
    return 1.0 / (2.0 * r * math.expm1(M))


@dataclass(frozen=True)
class RecursionState:
    u: float
    last_gap: int
    index: int


def run_recursion(gaps: GapVector | Sequence[int], v0: float, M: float) -> list[RecursionState]:
    """Successive crossing probabilities u_n = P^{x_{n-1}}(tau_{x_n} < tau_0).

    ``last_gap`` of state ``n`` is ``r_{n-1}`` (0 for the first state).
    From ``x_1`` a fall back to the origin already counts as a return to 0,
    so the second step is fed ``u = 0`` rather than ``u_1``.
    """
    if not isinstance(gaps, GapVector):
        gaps = GapVector(tuple(gaps))
    r = gaps.gaps
    u1 = math.exp(-v0) / (2.0 * r[0])
    states = [RecursionState(u1, 0, 1)]
    u_back = 0.0
    for n in range(1, len(r)):
        u = f_m(r[n - 1], r[n], u_back, M)
        states.append(RecursionState(u, r[n - 1], n + 1))
        u_back = u
    return states


def recursion_log_product(gaps: GapVector | Sequence[int], v0: float, M: float) -> float:
    """log of prod u_n, which equals log Z^omega_{0,y}."""
    return sum(math.log(s.u) for s in run_recursion(gaps, v0, M))


def crossing_time_bounds(gaps: GapVector | Sequence[int], M: float) -> tuple[float, float, float]:
    """(lower, upper, cap) = (S/3, S/(3(1-e^{-M})), 1 + 2y^2) with S = sum r_j^2."""
    if not isinstance(gaps, GapVector):
        gaps = GapVector(tuple(gaps))
    s2 = gaps.sum_squares()
    y = gaps.total
    return s2 / 3.0, s2 / (3.0 * -math.expm1(-M)), 1.0 + 2.0 * y * y


def env_crossing_time_bounds(env: Environment, y: int) -> tuple[float, float, float]:
    return crossing_time_bounds(to_gaps(env, y), env.M)


def corrected_upper_bound(gaps: GapVector | Sequence[int], M: float) -> float:
    """sum (r_j^2 + 2) / (3 (1 - e^{-M})).

    Each gap crossed from its left obstacle costs (r^2 + 2)/3 steps on
    average, so the +2 is needed for the bound to hold when gaps are short.
    """
    if not isinstance(gaps, GapVector):
        gaps = GapVector(tuple(gaps))
    return sum(r * r + 2 for r in gaps) / (3.0 * -math.expm1(-M))
