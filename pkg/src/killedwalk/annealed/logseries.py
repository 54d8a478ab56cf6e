"""The auxiliary sums U_n(q), the growth rate mu(q) and the root q(rho, M).

U_n(q) sums prod_i G_q(r_i) F_M(r_{i-1}, r_i, u_{i-1}) over gap vectors with
geometric weights G_q(r) = q(1-q)^{r-1}.  Everything is parameterised by
``t = log(1/q)`` so that the extremely small ``q`` reached at small rho or
large M stays representable; values are carried as logarithms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ..environment import WalkParams, make_rng


class BudgetExceededError(RuntimeError):
    """The exhaustive sum would need more terms than the budget allows."""


class InconsistentBracketError(ArithmeticError):
    """Lower and upper estimates of mu(q) do not overlap."""


class BracketTooWideError(ArithmeticError):
    """The mu bracket is too wide to locate q at the requested tolerance."""


def log_q_ratio(t: float) -> float:
    """log(q/(1-q)) = -log(e^t - 1) for q = e^{-t}."""
    if t > 30.0:
        return -t - math.log1p(-math.exp(-t))
    return -math.log(math.expm1(t))


def t_of_q(q: float) -> float:
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    return -math.log(q)


def log_u1(t: float, M: float) -> float:
    """log U_1 = log(q log(1/q) / (2 e^M (1-q)))."""
    return log_q_ratio(t) + math.log(t) - M - math.log(2.0)


def u1_exact(q: float, M: float) -> float:
    return q * math.log(1.0 / q) / (2.0 * math.exp(M) * (1.0 - q))


def mu_analytic_bounds(t: float, M: float) -> tuple[float, float]:
    """log of the closed-form bounds U_1 <= mu <= U_1 / (1 - e^{-M})."""
    lo = log_u1(t, M)
    return lo, lo - math.log(-math.expm1(-M))


def sample_logseries(t: float, size, rng: np.random.Generator) -> np.ndarray:
    """Draws from the log-series law P(r) = (1-q)^r / (r t), q = e^{-t}.

    Kemp's LS algorithm written in terms of ``t``.  Returns floats because
    typical values exceed the int64 range once q is tiny.
    """
    v = rng.random(size)
    w = rng.random(size)
    return _kemp(t, v, w)


_R_CAP = 1e300


def _kemp(t: float, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    h = -np.expm1(-w * t)  # 1 - q^w
    out = np.ones_like(v)
    one_minus_v = 1.0 - v
    q = math.exp(-t)
    cand = one_minus_v > q  # v < 1 - q
    big = cand & (v <= h * h)
    # -log h stays accurate when q^w is far below machine epsilon
    neg_log_h = -np.log1p(-np.exp(-w * t))
    with np.errstate(divide="ignore", over="ignore"):
        vals = np.floor(1.0 - np.log(v) / neg_log_h)
    out[big] = np.clip(vals[big], 1.0, _R_CAP)
    out[cand & ~big & (v <= h)] = 2.0
    return out


def _f_vec(ell: np.ndarray, r: np.ndarray, u: np.ndarray, M: float) -> np.ndarray:
    s = math.exp(-M)
    base = s / (2.0 * r)
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = 1.0 - s * (1.0 - 1.0 / (2.0 * r) - (1.0 - u) / (2.0 * ell))
    return np.where(ell == 0, base, base / denom)


@dataclass(frozen=True)
class UnEstimate:
    """log U_n for n = 1..n_max with a bracket for each."""

    t: float
    M: float
    log_u: np.ndarray
    log_lo: np.ndarray
    log_hi: np.ndarray
    mode: str
    n_samples: int

    @property
    def q(self) -> float:
        return math.exp(-self.t)

    def estimate(self, n: int) -> float:
        return math.exp(self.log_u[n - 1])

    def bracket(self, n: int) -> tuple[float, float]:
        return math.exp(self.log_lo[n - 1]), math.exp(self.log_hi[n - 1])


def _u_mc(t: float, M: float, n_max: int, n_samples: int, seed,
          uniforms: tuple[np.ndarray, np.ndarray] | None = None) -> UnEstimate:
    if uniforms is None:
        rng = make_rng(seed)
        v = rng.random((n_max, n_samples))
        w = rng.random((n_max, n_samples))
    else:
        v, w = uniforms
        v, w = v[:n_max], w[:n_max]
        n_samples = v.shape[1]
    # per step the weight is G_q(r) F / pmf(r) = (q/(1-q)) t r F
    log_c = log_q_ratio(t) + math.log(t)
    log_u = np.empty(n_max)
    log_lo = np.empty(n_max)
    log_hi = np.empty(n_max)
    log_prod = np.zeros(n_samples)
    r_prev = np.zeros(n_samples)
    u_back = np.zeros(n_samples)
    for i in range(n_max):
        r = _kemp(t, v[i], w[i])
        if i == 0:
            u = np.full(n_samples, math.exp(-M) / 2.0) / r
        else:
            u = _f_vec(r_prev, r, u_back if i > 1 else np.zeros(n_samples), M)
        log_prod += np.log(r * u)
        if i == 0:
            # the first factor is deterministic: U_1 exactly
            log_u[0] = log_lo[0] = log_hi[0] = log_u1(t, M)
        else:
            top = log_prod.max()
            z = np.exp(log_prod - top)
            mean = z.mean()
            se = z.std(ddof=1) / math.sqrt(n_samples)
            base = top + (i + 1) * log_c
            log_u[i] = base + math.log(mean)
            log_lo[i] = base + math.log(max(mean - 3.0 * se, mean * 1e-300))
            log_hi[i] = base + math.log(mean + 3.0 * se)
        r_prev, u_back = r, u
    return UnEstimate(t, M, log_u, log_lo, log_hi, "mc", n_samples)


def truncation_radius(t: float, tail_tol: float) -> int:
    """ceil(log(tail_tol) / log(1-q))."""
    log1mq = math.log1p(-math.exp(-t))
    return max(1, math.ceil(math.log(tail_tol) / log1mq))


def _u_exhaustive(t: float, M: float, n_max: int, tail_tol: float, budget: int) -> UnEstimate:
    r_max = truncation_radius(t, tail_tol)
    if r_max**n_max > budget:
        raise BudgetExceededError(
            f"exhaustive sum needs {r_max}^{n_max} terms, budget is {budget}"
        )
    q = math.exp(-t)
    log1mq = math.log1p(-q)
    gaps = np.arange(1, r_max + 1, dtype=float)
    log_g = log_q_ratio(t) + gaps * log1mq  # log G_q(r)
    # tail of sum_r G_q(r) e^{-M}/(2 r (1 - e^{-M})) beyond r_max, bounded geometrically
    one_minus = -math.expm1(-M)
    a_bound = math.exp(log_u1(t, M)) / one_minus
    tail = (
        math.exp(log_q_ratio(t) - M + (r_max + 1) * log1mq)
        / (2.0 * one_minus * (r_max + 1) * q)
    )
    log_u = np.empty(n_max)
    log_lo = np.empty(n_max)
    log_hi = np.empty(n_max)
    weights = np.exp(log_g) * math.exp(-M) / (2.0 * gaps)
    r_prev = gaps.copy()
    u_cur = math.exp(-M) / (2.0 * gaps)
    total = weights.sum()
    for i in range(n_max):
        if i > 0:
            rp = np.repeat(r_prev, r_max)
            ub = np.repeat(u_cur if i > 1 else np.zeros_like(u_cur), r_max)
            r = np.tile(gaps, r_prev.size)
            u_new = _f_vec(rp, r, ub, M)
            weights = np.repeat(weights, r_max) * np.tile(np.exp(log_g), r_prev.size) * u_new
            r_prev, u_cur = r, u_new
            total = weights.sum()
        n = i + 1
        slack = n * a_bound ** (n - 1) * tail
        log_u[i] = math.log(total)
        log_lo[i] = math.log(total)
        log_hi[i] = math.log(total + slack)
    log_u[0] = log_lo[0] = log_hi[0] = log_u1(t, M)
    return UnEstimate(t, M, log_u, log_lo, log_hi, "truncated-sum", r_max**n_max)


def u_n_estimate(q: float | None, M: float, n: int, mode: str = "mc",
                 budget: int = 200_000, seed=None, t: float | None = None,
                 tail_tol: float = 1e-8) -> UnEstimate:
    """U_1..U_n by Monte Carlo (``budget`` samples) or truncated exhaustive sum.

    In MC mode gaps are drawn from the log-series law, which keeps the
    importance weights bounded by (q t / (1-q)) / (2 e^M (1 - e^{-M})) per
    step.  The truncated sum bounds the dropped mass by n A^{n-1} T with
    A = U_1/(1-e^{-M}) and T the tail of one coordinate past r_max.
    Pass ``t = log(1/q)`` instead of ``q`` when q underflows.
    """
    if t is None:
        t = t_of_q(q)
    if not t > 0:
        raise ValueError("q must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be at least 1")
    if mode == "mc":
        if budget < 2:
            raise BudgetExceededError("need at least two samples")
        return _u_mc(t, M, n, budget, seed)
    if mode == "truncated-sum":
        return _u_exhaustive(t, M, n, tail_tol, budget)
    raise ValueError(f"mode must be 'mc' or 'truncated-sum', got {mode!r}")


@dataclass(frozen=True)
class MuBracket:
    log_lo: float
    log_hi: float
    n_max: int

    @property
    def lo(self) -> float:
        return math.exp(self.log_lo)

    @property
    def hi(self) -> float:
        return math.exp(self.log_hi)

    @property
    def log_mid(self) -> float:
        return 0.5 * (self.log_lo + self.log_hi)

    @property
    def mid(self) -> float:
        return math.exp(self.log_mid)

    @property
    def width(self) -> float:
        """Relative width hi/lo - 1."""
        return math.expm1(self.log_hi - self.log_lo)


def bracket_from(est: UnEstimate, use_bounds: bool = False) -> MuBracket:
    """Intersect [U_n^{1/n}, (U_n/(1-e^{-M}))^{1/n}] over n.

    With ``use_bounds`` the statistical or truncation bracket of each U_n is
    used (outer endpoints), otherwise the point estimates.
    """
    n = np.arange(1, est.log_u.size + 1)
    lo_src = est.log_lo if use_bounds else est.log_u
    hi_src = est.log_hi if use_bounds else est.log_u
    log_one_minus = math.log(-math.expm1(-est.M))
    log_lo = float(np.max(lo_src / n))
    log_hi = float(np.min((hi_src - log_one_minus) / n))
    if log_lo > log_hi + 1e-12:
        raise InconsistentBracketError(
            f"mu bracket empty: lo={log_lo:.6g} > hi={log_hi:.6g} (log scale)"
        )
    return MuBracket(log_lo, max(log_hi, log_lo), int(n[-1]))


def mu_bracket(q: float | None, M: float, n_max: int, mode: str = "mc",
               budget: int = 200_000, seed=None, t: float | None = None) -> MuBracket:
    """Bracket for mu(q) from U_1..U_{n_max}; n_max = 1 gives [U_1, U_1/(1-e^{-M})]."""
    return bracket_from(u_n_estimate(q, M, n_max, mode, budget, seed, t))


@dataclass(frozen=True)
class LogSeriesModel:
    """Root q(rho, M) with the accompanying mu bracket."""

    p: float
    M: float
    rho: float
    t: float
    log_mu_lo: float
    log_mu_hi: float

    @property
    def q(self) -> float:
        return math.exp(-self.t)

    @property
    def mu_lo(self) -> float:
        return math.exp(self.log_mu_lo)

    @property
    def mu_hi(self) -> float:
        return math.exp(self.log_mu_hi)

    @property
    def mu(self) -> float:
        return math.exp(0.5 * (self.log_mu_lo + self.log_mu_hi))

    @property
    def K(self) -> float:
        return k_rate(self.p, self.M)

    @property
    def mean_gap_heuristic(self) -> float:
        return mean_gap_heuristic(self.K)

    def rho_check(self) -> tuple[float, bool]:
        """e^{-M} rho log(1/q) and whether it lies in [2(1-e^{-M}), 2]."""
        val = math.exp(-self.M) * self.rho * self.t
        return val, 2.0 * -math.expm1(-self.M) <= val <= 2.0

    def to_record(self) -> dict:
        return {
            "p": self.p,
            "M": self.M,
            "rho": self.rho,
            "q": self.q,
            "mu_lo": self.mu_lo,
            "mu_hi": self.mu_hi,
            "K": self.K,
            "log_inv_q": self.t,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record())


def k_rate(p: float, M: float) -> float:
    """K(p, M) = 2 (1-p)(e^M - 1) / p."""
    return 2.0 * (1.0 - p) * math.expm1(M) / p


def mean_gap_heuristic(K: float) -> float:
    """(e^K - 1)/K, the mean of the log-series law with parameter 1 - e^{-K}."""
    return math.expm1(K) / K


def solve_q(params: WalkParams, n_max: int = 12, tol: float = 1e-6,
            n_samples: int = 50_000, seed=0, max_width: float = 0.5,
            max_iter: int = 200) -> LogSeriesModel:
    """Solve rho = q / (mu(q) (1-q)) for q by bisection on t = log(1/q).

    mu is the midpoint of the bracket from U_1..U_{n_max}, estimated with
    common random numbers so the map is smooth in t.  The analytic bounds on
    mu confine the root to 2(e^M-1)/rho <= t <= 2 e^M/rho, where the search
    starts; the sign at both ends is re-checked after every step.
    """
    if not params.rho_defined:
        raise ValueError("solve_q needs p < 1 (rho finite)")
    rho, M = params.rho, params.M
    rng = make_rng(seed)
    uniforms = (rng.random((n_max, n_samples)), rng.random((n_max, n_samples)))

    def bracket_at(t: float) -> MuBracket:
        est = _u_mc(t, M, n_max, n_samples, None, uniforms)
        br = bracket_from(est)
        a_lo, a_hi = mu_analytic_bounds(t, M)
        return MuBracket(max(br.log_lo, a_lo), min(br.log_hi, a_hi), n_max)

    def excess(t: float) -> float:
        # log(q/(mu(1-q))) - log(rho); decreasing in t when mu tracks its bounds
        return log_q_ratio(t) - bracket_at(t).log_mid - math.log(rho)

    t_lo = 2.0 * math.expm1(M) / rho
    t_hi = 2.0 * math.exp(M) / rho
    f_lo, f_hi = excess(t_lo), excess(t_hi)
    if f_lo < 0 or f_hi > 0:
        raise BracketTooWideError(
            f"no sign change on [{t_lo:.6g}, {t_hi:.6g}]: {f_lo:.3g}, {f_hi:.3g}"
        )
    for _ in range(max_iter):
        if t_hi - t_lo <= tol * t_lo:
            break
        mid = 0.5 * (t_lo + t_hi)
        f_mid = excess(mid)
        if f_mid >= 0:
            t_lo, f_lo = mid, f_mid
        else:
            t_hi, f_hi = mid, f_mid
        if f_lo < 0 or f_hi > 0:
            raise BracketTooWideError("bisection lost its sign change")
    t = 0.5 * (t_lo + t_hi)
    br = bracket_at(t)
    if br.width > max_width:
        raise BracketTooWideError(f"mu bracket relative width {br.width:.3g} exceeds {max_width}")
    return LogSeriesModel(params.p, M, rho, t, br.log_lo, br.log_hi)


def logseries_pmf(theta: float, r: np.ndarray) -> np.ndarray:
    """theta^r / (r log(1/(1-theta)))."""
    r = np.asarray(r, dtype=float)
    return np.exp(r * math.log(theta) - np.log(r)) / -math.log1p(-theta)


def logseries_tail_sum(t: float, x: int) -> float:
    """sum_{r >= x} (1-q)^r / r for q = e^{-t}."""
    if x <= 1:
        return t
    log_theta = math.log1p(-math.exp(-t))
    r = np.arange(1, x, dtype=float)
    head = float(np.sum(np.exp(r * log_theta) / r))
    tail = t - head
    if tail > 1e-6 * t:
        return tail
    # cancellation: sum directly
    total = 0.0
    k = x
    while True:
        term = math.exp(k * log_theta) / k
        total += term
        if term < 1e-17 * total:
            return total
        k += 1


@dataclass(frozen=True)
class ComparisonDistributions:
    """Bracketing tails for an annealed gap.

    y_tail(x) = min(1, Gamma rho sum_{r>=x} (1-q)^r/r) with Gamma = (1-e^{-M})^{-2};
    z_tail uses gamma = (1-e^{-M})^2 instead and is clipped to 1.
    """

    rho: float
    t: float
    M: float

    @classmethod
    def from_model(cls, model: LogSeriesModel) -> "ComparisonDistributions":
        return cls(model.rho, model.t, model.M)

    @property
    def Gamma(self) -> float:
        return (-math.expm1(-self.M)) ** -2

    @property
    def gamma(self) -> float:
        return (-math.expm1(-self.M)) ** 2

    def y_tail(self, x: int) -> float:
        return min(1.0, self.Gamma * self.rho * logseries_tail_sum(self.t, int(x)))

    def z_tail(self, x: int) -> float:
        return min(1.0, self.gamma * self.rho * logseries_tail_sum(self.t, int(x)))
