"""Exact and sampled annealed crossing measures on ``[0, y]``.

An interior configuration is encoded as an integer whose bit ``k - 1`` marks
site ``k`` as occupied.  The potential at the origin only rescales the
quenched normalisation by ``e^{-V(0)}`` and leaves the conditioned path law
unchanged, so it is averaged out analytically: every configuration carries
the factor ``p e^{-M} + 1 - p``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .._kernels import conditioned_chain, crossing_batch
from ..environment import Environment, GapVector, WalkParams, make_rng
from ..exact_walk import f_m, run_recursion, solve_crossing
from ..quenched import SpeedEstimate

DEFAULT_CAP = 22


class EnumerationCapError(ValueError):
    """The requested distance needs more configurations than the cap allows."""


def _check_cap(y: int, cap: int) -> None:
    if y < 1:
        raise ValueError("y must be at least 1")
    if y > cap:
        raise EnumerationCapError(f"y = {y} exceeds the enumeration cap {cap} (2^(y-1) configurations)")


def _log_probs(p: float, n_occ: np.ndarray, n_sites: int) -> np.ndarray:
    """log P(configuration) for Bernoulli(p) sites, safe at p = 1."""
    n_vac = n_sites - n_occ
    lp = np.where(n_occ > 0, n_occ * math.log(p), 0.0)
    if p < 1.0:
        lq = np.where(n_vac > 0, n_vac * math.log1p(-p), 0.0)
    else:
        lq = np.where(n_vac > 0, -np.inf, 0.0)
    return lp + lq


def origin_log_factor(params: WalkParams) -> float:
    """log E[e^{-V(0)}] = log(p e^{-M} + 1 - p)."""
    return math.log1p(-params.p * -math.expm1(-params.M))


def config_gaps(config: int, y: int) -> GapVector:
    sites = [k for k in range(1, y) if (config >> (k - 1)) & 1]
    return GapVector.from_sites(sites, y)


def _sweep(y: int, M: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Interior log-ratio sums, unit-crossing-time sums and occupation counts.

    Configurations are grown one site at a time so every prefix is solved
    once; the output index equals the configuration bitmask.
    """
    a = np.zeros(1)
    d = np.zeros(1)
    log_h = np.zeros(1)
    t = np.zeros(1)
    n_occ = np.zeros(1, dtype=np.int64)
    s_occ = math.exp(-M)
    for _ in range(1, y):
        parts = []
        for s in (1.0, s_occ):
            half = 0.5 * s
            pm = half * a
            pp = 1.0 - pm
            a_new = half / pp
            d_new = (1.0 + pm * d) / pp
            parts.append((a_new, d_new, log_h + np.log(a_new), t + d_new))
        a = np.concatenate([parts[0][0], parts[1][0]])
        d = np.concatenate([parts[0][1], parts[1][1]])
        log_h = np.concatenate([parts[0][2], parts[1][2]])
        t = np.concatenate([parts[0][3], parts[1][3]])
        n_occ = np.concatenate([n_occ, n_occ + 1])
    return log_h, t, n_occ


@dataclass(frozen=True, eq=False)
class AnnealedTable:
    """Q_{0,y} over all interior configurations.

    ``weights[c]`` is the annealed probability of configuration ``c``,
    ``log_z[c]`` the origin-averaged log Z^omega_{0,y}, and ``t_cond[c]`` the
    quenched conditioned mean crossing time.
    """

    y: int
    params: WalkParams
    weights: np.ndarray
    log_z: np.ndarray
    t_cond: np.ndarray
    n_occ: np.ndarray
    log_z0y: float
    t_ann: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def z0y(self) -> float:
        return math.exp(self.log_z0y)

    @property
    def beta_hat(self) -> float:
        return -self.log_z0y / self.y

    @property
    def configs(self) -> np.ndarray:
        return np.arange(self.weights.size)

    def rows(self):
        """Yield (gaps, weight, crossing probability product, t_cond) per configuration."""
        for c in range(self.weights.size):
            yield (
                config_gaps(c, self.y),
                float(self.weights[c]),
                math.exp(self.log_z[c]),
                float(self.t_cond[c]),
            )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["gaps", "weight", "t_cond"])
        for gaps, w, _, t in self.rows():
            writer.writerow([gaps.to_text("-"), repr(w), repr(t)])
        return buf.getvalue()


def enumerate_annealed(params: WalkParams, y: int, cap: int = DEFAULT_CAP) -> AnnealedTable:
    """Exhaustive Q_{0,y} table for ``y <= cap``."""
    _check_cap(y, cap)
    log_h, t_sum, n_occ = _sweep(y, params.M)
    log_z = math.log(0.5) + origin_log_factor(params) + log_h
    log_joint = _log_probs(params.p, n_occ, y - 1) + log_z
    log_z0y = float(logsumexp(log_joint))
    weights = np.exp(log_joint - log_z0y)
    t_cond = 1.0 + t_sum
    t_ann = float(np.dot(weights, t_cond))
    return AnnealedTable(
        y=y,
        params=params,
        weights=weights,
        log_z=log_z,
        t_cond=t_cond,
        n_occ=n_occ,
        log_z0y=log_z0y,
        t_ann=t_ann,
        diagnostics={"weight_sum": float(weights.sum())},
    )


def _config_env(config: int, y: int, M: float, origin: float) -> Environment:
    vals = np.zeros(y + 1)
    vals[0] = origin
    for k in range(1, y):
        if (config >> (k - 1)) & 1:
            vals[k] = M
    return Environment(0, vals, M)


def direct_weights(params: WalkParams, y: int, cap: int = 12) -> tuple[np.ndarray, float]:
    """Q_{0,y} weights from one linear solve per environment, origin summed explicitly.

    Returns (normalised weights, log Z_{0,y}).  Slow; meant as an oracle.
    """
    _check_cap(y, cap)
    n = 1 << (y - 1)
    joint = np.empty(n)
    for c in range(n):
        occ = bin(c).count("1")
        prob = params.p**occ * (1.0 - params.p) ** (y - 1 - occ)
        z_vac = solve_crossing(_config_env(c, y, params.M, 0.0), y).z
        z_occ = solve_crossing(_config_env(c, y, params.M, params.M), y).z
        joint[c] = prob * (params.p * z_occ + (1.0 - params.p) * z_vac)
    total = joint.sum()
    return joint / total, math.log(total)


def formula_weights(params: WalkParams, y: int, cap: int = 12) -> tuple[np.ndarray, float]:
    """Q_{0,y} weights from the gap-product formula.

    Each configuration with gaps ``r_1..r_n`` gets
    (1-p)^y (e^M/rho + 1) prod_i rho F_M(r_{i-1}, r_i, u_{i-1}) with r_0 = 0,
    normalised by the total.  Requires p < 1.
    """
    _check_cap(y, cap)
    if not params.rho_defined:
        raise ValueError("the gap-product formula needs p < 1")
    rho, M = params.rho, params.M
    pref = y * math.log1p(-params.p) + math.log(math.exp(M) / rho + 1.0)
    n = 1 << (y - 1)
    log_joint = np.empty(n)
    for c in range(n):
        gaps = config_gaps(c, y)
        states = run_recursion(gaps, M, M)
        acc = pref + math.log(rho * f_m(0, gaps[0], 0.0, M))
        for st in states[1:]:
            acc += math.log(rho * st.u)
        log_joint[c] = acc
    log_total = float(logsumexp(log_joint))
    return np.exp(log_joint - log_total), log_total


def total_variation(w1: np.ndarray, w2: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(w1) - np.asarray(w2)).sum())


# -- speeds and exponents ------------------------------------------------------

def annealed_speed_exact(params: WalkParams, y_list, cap: int = DEFAULT_CAP) -> list[SpeedEstimate]:
    """E_{Q_{0,y}}(tau_y)/y for each ``y``, the finite-y proxy for 1/v^ann."""
    out = []
    for y in y_list:
        table = enumerate_annealed(params, int(y), cap)
        out.append(SpeedEstimate(
            inverse=table.t_ann / table.y,
            stderr=0.0,
            n_samples=table.weights.size,
            method="exact-enumeration",
            seed=None,
            params=params,
            y=table.y,
            diagnostics={"t_ann": table.t_ann, "log_z0y": table.log_z0y},
        ))
    return out


def sample_crossings(params: WalkParams, y: int, n_env: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Origin-averaged (log Z^omega_{0,y}, t_cond) for ``n_env`` sampled environments."""
    rng = make_rng(seed)
    log_z = np.empty(n_env)
    t_cond = np.empty(n_env)
    shift = origin_log_factor(params)
    chunk = max(1, (1 << 22) // (y + 1))
    for start in range(0, n_env, chunk):
        m = min(chunk, n_env - start)
        vals = np.where(rng.random((m, y + 1)) < params.p, params.M, 0.0)
        vals[:, 0] = 0.0
        lz, tc = crossing_batch(vals)
        log_z[start : start + m] = lz + shift
        t_cond[start : start + m] = tc
    return log_z, t_cond


def annealed_speed_mc(params: WalkParams, y: int, n_env: int, seed=None,
                      ess_threshold: float = 100.0) -> SpeedEstimate:
    """Self-normalised estimate of E_{Q_{0,y}}(tau_y)/y from sampled environments.

    Environments are drawn from P and weighted by Z^omega_{0,y}.  A small
    effective sample size marks the result unreliable instead of failing.
    """
    if y < 1:
        raise ValueError("y must be at least 1")
    if n_env < 1000:
        raise ValueError("n_env must be at least 1000")
    log_z, t_cond = sample_crossings(params, y, n_env, seed)
    w = np.exp(log_z - log_z.max())
    sw = w.sum()
    est = float(np.dot(w, t_cond) / sw)
    var = float(np.sum(w**2 * (t_cond - est) ** 2)) / sw**2
    ess = float(sw**2 / np.sum(w**2))
    return SpeedEstimate(
        inverse=est / y,
        stderr=math.sqrt(var) / y,
        n_samples=n_env,
        method="importance-mc",
        seed=seed,
        params=params,
        y=y,
        diagnostics={
            "ess": ess,
            "reliable": ess >= ess_threshold,
            "log_z0y": float(logsumexp(log_z) - math.log(n_env)),
        },
    )


@dataclass(frozen=True)
class ExponentSequence:
    y: tuple[int, ...]
    values: np.ndarray
    stderr: np.ndarray
    mode: str

    def differences(self) -> np.ndarray:
        return np.diff(self.values)

    @property
    def final_spread(self) -> float:
        """|last - second to last|, a crude convergence indicator."""
        if self.values.size < 2:
            return math.nan
        return float(abs(self.values[-1] - self.values[-2]))


def annealed_lyapunov(params: WalkParams, y_list, mode: str = "exact",
                      n_env: int = 10_000, seed=None, cap: int = DEFAULT_CAP) -> ExponentSequence:
    """beta_hat(y) = -(1/y) log Z_{0,y} for each ``y``.

    ``mode="mc"`` estimates Z_{0,y} as a plain mean over sampled
    environments and reports a delta-method standard error.
    """
    ys = tuple(int(y) for y in y_list)
    vals = np.empty(len(ys))
    errs = np.zeros(len(ys))
    for i, y in enumerate(ys):
        if mode == "exact":
            vals[i] = enumerate_annealed(params, y, cap).beta_hat
        elif mode == "mc":
            log_z, _ = sample_crossings(params, y, n_env, seed)
            top = log_z.max()
            z = np.exp(log_z - top)
            mean = z.mean()
            vals[i] = -(top + math.log(mean)) / y
            errs[i] = float(z.std(ddof=1) / math.sqrt(n_env) / mean / y)
        else:
            raise ValueError(f"mode must be 'exact' or 'mc', got {mode!r}")
    return ExponentSequence(ys, vals, errs, mode)


def half_line_ratio_mc(params: WalkParams, y: int, n_env: int, left: int = 200,
                       seed=None) -> float:
    """Estimate E[Z_{0,y}] / E[Z_y] by sampling environments on ``[-left, y]``.

    Z_y lets the walk wander left of 0 (killed past ``-left``).  The ratio is
    the annealed probability that a crossing to ``y`` never returns to 0.
    """
    rng = make_rng(seed)
    log_z0 = np.empty(n_env)
    log_zy = np.empty(n_env)
    for i in range(n_env):
        vals = np.where(rng.random(left + y + 1) < params.p, params.M, 0.0)
        # chain index 0 is the cemetery past -left; index left + 1 is site 0
        surv = np.ones(left + y + 2)
        surv[1 : left + y + 1] = np.exp(-vals[: left + y])
        a, _, _ = conditioned_chain(surv)
        log_zy[i] = float(np.log(a[left + 1 : left + y + 1]).sum())
        inner = np.ones(y + 1)
        inner[:y] = surv[left + 1 : left + y + 1]
        a0, _, _ = conditioned_chain(inner)
        log_z0[i] = math.log(0.5) - vals[left] + float(np.log(a0[1:y]).sum())
    return math.exp(float(logsumexp(log_z0) - logsumexp(log_zy)))
