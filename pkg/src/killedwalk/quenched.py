"""Quenched crossing speed.

The inverse quenched speed is the environment average of the one-site
conditioned crossing time E^omega(tau_1 | tau_1 < inf).  That expectation
is computed exactly on a window truncated at the ``j``-th obstacle left of
the origin (hitting it counts as failure), and averaged either over
independent environments or ergodically along one long environment.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ._kernels import conditioned_chain, escape_times_batch, lyapunov_terms
from .environment import Environment, WalkParams, make_rng

METHODS = (
    "ergodic-mc",
    "lyapunov-derivative",
    "closed-form",
    "exact-enumeration",
    "importance-mc",
)

LEDGER_COLUMNS = ("method", "p", "M", "lambda", "y", "value", "inverse", "stderr", "n", "seed")


class WindowTooShortError(ValueError):
    """The environment window holds fewer left obstacles than the policy needs."""


@dataclass(frozen=True)
class SpeedEstimate:
    """Point estimate of a crossing speed together with its inverse."""

    inverse: float
    stderr: float
    n_samples: int
    method: str
    seed: object
    params: WalkParams
    y: int | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")
        if not self.inverse > 0:
            raise ValueError(f"inverse speed must be positive, got {self.inverse}")
        if self.stderr < 0 or math.isnan(self.stderr):
            raise ValueError(f"stderr must be nonnegative, got {self.stderr}")

    @property
    def value(self) -> float:
        return 1.0 / self.inverse

    def to_row(self) -> dict:
        return {
            "method": self.method,
            "p": self.params.p,
            "M": self.params.M,
            "lambda": self.params.lam,
            "y": "" if self.y is None else self.y,
            "value": repr(self.value),
            "inverse": repr(self.inverse),
            "stderr": repr(self.stderr),
            "n": self.n_samples,
            "seed": "" if self.seed is None else self.seed,
        }


def append_ledger(path: str | os.PathLike, estimates: Iterable[SpeedEstimate]) -> None:
    """Append estimates to a CSV results ledger, writing the header once."""
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LEDGER_COLUMNS, lineterminator="\n")
        if new:
            writer.writeheader()
        for est in estimates:
            writer.writerow(est.to_row())


def phi(p: float) -> float:
    """log(1/p)/(1-p), extended by continuity to 1 at p = 1."""
    if p >= 1.0:
        return 1.0
    return -math.log(p) / (1.0 - p)


def truncation_bound(p: float, M: float, depth: int) -> float:
    """Bound on the mean error from dropping excursions past the ``depth``-th obstacle.

    The left-of-window tail is e^{-M j} phi(p) / (1 - e^{-M})^3.  At depth 1
    the escape-probability and first-interval terms, 5/3 e^{-M} and
    1/(e^M - 1), are added as well.  Unknown absolute constants are taken as 1.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    one_minus = -math.expm1(-M)
    bound = math.exp(-M * depth) * phi(p) / one_minus**3
    if depth == 1:
        bound += 5.0 / 3.0 * math.exp(-M) + 1.0 / math.expm1(M)
    return bound


@dataclass(frozen=True)
class TruncationPolicy:
    depth_obstacles: int
    tolerance: float = math.inf

    def __post_init__(self) -> None:
        if self.depth_obstacles < 1:
            raise ValueError("depth_obstacles must be at least 1")

    @classmethod
    def for_params(cls, params: WalkParams, tolerance: float = 1e-4,
                   max_depth: int = 200) -> "TruncationPolicy":
        """Smallest depth whose tail bound drops below ``tolerance``."""
        for j in range(2, max_depth + 1):
            if truncation_bound(params.p, params.M, j) < tolerance:
                return cls(j, tolerance)
        raise ValueError(f"no depth <= {max_depth} reaches tolerance {tolerance}")

    def error_bound(self, params: WalkParams) -> float:
        return truncation_bound(params.p, params.M, self.depth_obstacles)


@dataclass(frozen=True)
class TruncatedExpectation:
    value: float
    error_bound: float
    depth: int
    failure_site: int
    converged: bool


def _chain_time(surv: np.ndarray, start: int) -> float:
    """Conditioned mean time to reach the right end of a chain from ``start``."""
    _, _, d = conditioned_chain(surv)
    if start == 0:
        # the first step out of the failure site is forced to the right
        return 1.0 + float(d[1:-1].sum())
    return float(d[start:-1].sum())


def site_crossing_expectation(env: Environment, policy: TruncationPolicy,
                              strict: bool = True) -> TruncatedExpectation:
    """E^omega(tau_1 | tau_1 < tau_{-a_j}) with ``j = policy.depth_obstacles``.

    ``-a_1 > -a_2 > ...`` are the obstacles at or left of 0.  When the window
    holds fewer than ``j`` of them, ``strict`` raises; otherwise the walk is
    killed just left of the window and the result is marked unconverged.
    """
    if not env.covers(env.a, 0) or env.a > 0:
        raise ValueError("environment window must contain the origin")
    j = policy.depth_obstacles
    left = env.occupied()
    left = left[left <= 0][::-1]
    M = env.M
    if left.size >= j:
        fail = int(left[j - 1])
        converged = True
        bound = truncation_bound(_density_hint(env), M, j) if M > 0 else math.inf
    else:
        if strict:
            raise WindowTooShortError(
                f"window {env.window} has {left.size} obstacles left of 0, need {j}"
            )
        fail = env.a - 1
        converged = False
        bound = math.inf
    # chain sites fail..1; index 0 is the failure site, last index is site 1
    surv = np.ones(1 - fail + 1)
    lo = max(fail, env.a)
    surv[lo - fail : 1 - fail] = env.survival(lo, 0)
    value = _chain_time(surv, -fail)
    return TruncatedExpectation(value, bound, j, fail, converged)


def _density_hint(env: Environment) -> float:
    occ = float(np.mean(env.values > 0))
    return min(max(occ, 1e-12), 1.0)


def sample_left_gaps(params: WalkParams, n: int, depth: int,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """I.i.d. left environments as gap rows ``(a_1, a_2 - a_1, ...)``.

    Returns the gap matrix and the potential at the origin for each row.
    """
    gaps = np.empty((n, depth), dtype=np.int64)
    gaps[:, 0] = rng.geometric(params.p, n) - 1
    if depth > 1:
        gaps[:, 1:] = rng.geometric(params.p, (n, depth - 1))
    v0 = np.where(gaps[:, 0] == 0, params.M, 0.0)
    return gaps, v0


def escape_times(params: WalkParams, n: int, depth: int, seed) -> np.ndarray:
    """Per-environment E^omega(tau_1 | tau_1 < tau_{-a_depth}) for ``n`` i.i.d. environments."""
    rng = make_rng(seed)
    out = np.empty(n)
    chunk = 1 << 16
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        gaps, v0 = sample_left_gaps(params, m, depth, rng)
        out[start : start + m] = escape_times_batch(gaps, v0, params.M)
    return out


def _ergodic_times(params: WalkParams, n_sites: int, depth: int, seed) -> np.ndarray:
    rng = make_rng(seed)
    # left margin holding `depth` obstacles, then the averaging stretch
    lead = np.cumsum(rng.geometric(params.p, depth))
    left_sites = -lead[::-1] + 0
    body = np.flatnonzero(rng.random(n_sites) < params.p)
    occ = np.concatenate([left_sites, body]).astype(np.int64)
    ks = np.arange(n_sites)
    idx = np.searchsorted(occ, ks, side="right") - 1
    rows = idx[:, None] - np.arange(depth)[None, :]
    pos = occ[rows]
    gaps = np.empty((n_sites, depth), dtype=np.int64)
    gaps[:, 0] = ks - pos[:, 0]
    if depth > 1:
        gaps[:, 1:] = pos[:, :-1] - pos[:, 1:]
    v0 = np.where(gaps[:, 0] == 0, params.M, 0.0)
    return escape_times_batch(gaps, v0, params.M)


def batch_means_stderr(samples: np.ndarray, n_batches: int = 50) -> float:
    n = samples.size
    n_batches = min(n_batches, n)
    if n_batches < 2:
        return math.nan
    usable = (n // n_batches) * n_batches
    means = samples[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def quenched_speed_mc(params: WalkParams, n_sites: int,
                      policy: TruncationPolicy | None = None, seed=None,
                      mode: str = "iid") -> SpeedEstimate:
    """Monte Carlo estimate of 1/v^que as the mean one-site crossing time.

    ``mode="iid"`` draws a fresh environment per sample; ``mode="ergodic"``
    averages along one environment and reports a batch-means standard error.
    """
    if policy is None:
        policy = TruncationPolicy.for_params(params)
    if n_sites < 2:
        raise ValueError("need at least two samples")
    j = policy.depth_obstacles
    if mode == "iid":
        times = escape_times(params, n_sites, j, seed)
        stderr = float(times.std(ddof=1) / math.sqrt(n_sites))
    elif mode == "ergodic":
        times = _ergodic_times(params, n_sites, j, seed)
        stderr = batch_means_stderr(times)
    else:
        raise ValueError(f"mode must be 'iid' or 'ergodic', got {mode!r}")
    return SpeedEstimate(
        inverse=float(times.mean()),
        stderr=stderr,
        n_samples=n_sites,
        method="ergodic-mc",
        seed=seed,
        params=params,
        diagnostics={
            "mode": mode,
            "depth": j,
            "truncation_bound": policy.error_bound(params),
        },
    )


def main_term(params: WalkParams | float | Fraction) -> float | Fraction:
    """(2 - p + 2p^2)/(3p), the mean crossing time before the first left obstacle.

    Passing a :class:`~fractions.Fraction` returns an exact rational.
    """
    p = params.p if isinstance(params, WalkParams) else params
    if p <= 0:
        raise ValueError("p must be positive")
    return (2 - p + 2 * p * p) / (3 * p)


def main_term_series(p: float, rtol: float = 1e-16) -> float:
    """p + p * sum_{a>=1} (2a+1)/3 (1-p)^a summed term by term."""
    total = p
    q = 1.0 - p
    a = 1
    term = q
    while True:
        contrib = p * (2 * a + 1) / 3.0 * term
        total += contrib
        if contrib < rtol * total and a > 10:
            return total
        a += 1
        term *= q


# -- Lyapunov exponents --------------------------------------------------------

def constant_lyapunov(c: float) -> float:
    """log(e^c + sqrt(e^{2c} - 1)) evaluated stably for c >= 0."""
    if c < 0:
        raise ValueError("potential must be nonnegative")
    return c + math.log1p(math.sqrt(-math.expm1(-2.0 * c)))


def constant_speed(gamma: float) -> float:
    """sqrt(1 - e^{-2 gamma})."""
    return math.sqrt(-math.expm1(-2.0 * gamma))


def _fixed_point(c: float) -> float:
    return math.exp(-constant_lyapunov(c))


def _lyapunov_table(env: Environment, lams: np.ndarray, y: int) -> np.ndarray:
    if y < 1:
        raise ValueError("y must be at least 1")
    if not env.covers(min(env.a, 0), y - 1):
        raise ValueError(f"window {env.window} does not cover [0, {y - 1}]")
    values = env.slice(env.a, y - 1)
    burn = -env.a
    ref = float(values[:burn].mean()) if burn > 0 else float(values[0])
    a_init = np.array([_fixed_point(lam + ref) for lam in lams])
    terms = lyapunov_terms(np.ascontiguousarray(values), lams, a_init)
    return terms[:, burn:]


def quenched_lyapunov(env: Environment, lam: float, y: int) -> float:
    """-(1/y) sum_{k<y} log a(k) for the one-site crossing probabilities a(k).

    Sites of the window left of 0 serve as burn-in; the recursion starts
    from the constant-potential fixed point at their mean potential.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    terms = _lyapunov_table(env, np.array([float(lam)]), y)
    return float(terms[0].mean())


DEFAULT_STEPS = tuple(2.0 ** -k for k in range(4, 13))


def _richardson(values: np.ndarray, steps: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Forward quotients and two-level Richardson table along the last axis.

    ``values[..., 0]`` is alpha(0); ``values[..., i+1]`` is alpha(steps[i])
    for halving steps.  Returns (quotients, level-two extrapolants).
    """
    h = np.asarray(steps)
    quot = (values[..., 1:] - values[..., :1]) / h
    r1 = 2.0 * quot[..., 1:] - quot[..., :-1]
    r2 = (4.0 * r1[..., 1:] - r1[..., :-1]) / 3.0
    return quot, r2


def speed_from_lyapunov(params: WalkParams, y: int,
                        steps: Sequence[float] = DEFAULT_STEPS, seed=None,
                        env: Environment | None = None,
                        burn_in: int = 1000) -> SpeedEstimate:
    """1/v^que as the right derivative of the quenched exponent at lambda = 0.

    Uses forward differences on a halving grid with two-level Richardson
    extrapolation, all on one sampled environment.  The standard error
    combines the last extrapolation change with a batch-means spread of the
    per-site derivative contributions.
    """
    steps = tuple(float(h) for h in steps)
    if len(steps) < 3 or any(h <= 0 for h in steps):
        raise ValueError("need at least three positive steps")
    if any(b != a / 2 for a, b in zip(steps[:-1], steps[1:])):
        raise ValueError("steps must halve successively")
    if env is None:
        if params.p >= 1.0:
            env = Environment.constant(-burn_in, y - 1, params.M)
        else:
            from .environment import sample_environment

            env = sample_environment(params, (-burn_in, y - 1), seed)
    lams = np.array((0.0, *steps)) + params.lam
    terms = _lyapunov_table(env, lams, y)
    alphas = terms.mean(axis=1)
    quot, r2 = _richardson(alphas, steps)
    estimate = float(r2[-1])
    extrap = float(abs(r2[-1] - r2[-2]))
    monotone = bool(np.all(np.diff(quot) >= -1e-9 * abs(quot).max()))
    per_site = _richardson(terms.T, steps)[1][:, -1]
    stat = batch_means_stderr(per_site) if y >= 100 else 0.0
    if math.isnan(stat):
        stat = 0.0
    return SpeedEstimate(
        inverse=estimate,
        stderr=math.hypot(extrap, stat),
        n_samples=y,
        method="lyapunov-derivative",
        seed=seed,
        params=params,
        y=y,
        diagnostics={
            "monotone": monotone,
            "reliable": monotone,
            "extrapolation_error": extrap,
            "statistical_error": stat,
            "alpha0": float(alphas[0]),
            "quotients": quot.tolist(),
        },
    )


def small_potential_reference(p: float, M: float) -> float:
    """sqrt(2 p M), the small-M reference curve for both speeds."""
    return math.sqrt(2.0 * p * M)
