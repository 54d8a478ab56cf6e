"""Gap-law diagnostics for an exact annealed table."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .enumeration import AnnealedTable
from .logseries import ComparisonDistributions, LogSeriesModel, k_rate, logseries_pmf, mean_gap_heuristic


def _bit(configs: np.ndarray, site: int) -> np.ndarray:
    return (configs >> (site - 1)) & 1


def first_gaps(configs: np.ndarray, y: int) -> np.ndarray:
    """R_1 for each configuration (``y`` when no site is occupied)."""
    out = np.full(configs.size, y, dtype=np.int64)
    for k in range(y - 1, 0, -1):
        out = np.where(_bit(configs, k) == 1, k, out)
    return out


def middle_gaps(configs: np.ndarray, y: int) -> np.ndarray:
    """Length of the gap that contains the bond (m-1, m), m = ceil(y/2)."""
    m = max(1, (y + 1) // 2)
    prev = np.zeros(configs.size, dtype=np.int64)
    for k in range(1, m):
        prev = np.where(_bit(configs, k) == 1, k, prev)
    nxt = np.full(configs.size, y, dtype=np.int64)
    for k in range(y - 1, m - 1, -1):
        nxt = np.where(_bit(configs, k) == 1, k, nxt)
    return nxt - prev


def marginal(values: np.ndarray, weights: np.ndarray, y: int) -> np.ndarray:
    """pmf on 1..y (index 0 unused)."""
    return np.bincount(values, weights=weights, minlength=y + 1)


def pooled_gap_pmf(table: AnnealedTable) -> np.ndarray:
    """Weighted histogram of every gap in every configuration, normalised."""
    y = table.y
    hist = np.zeros(y + 1)
    configs = table.configs
    prev = np.zeros(configs.size, dtype=np.int64)
    for k in range(1, y + 1):
        occ = np.ones(configs.size, dtype=bool) if k == y else _bit(configs, k) == 1
        np.add.at(hist, k - prev[occ], table.weights[occ])
        prev = np.where(occ, k, prev)
    return hist / hist.sum()


@dataclass(frozen=True)
class GapDiagnostics:
    y: int
    K: float
    mean_gap: float
    mean_gap_heuristic: float
    first_gap_pmf: np.ndarray
    middle_gap_pmf: np.ndarray
    pooled_pmf: np.ndarray
    logseries_tv: float
    first_gap_tail: np.ndarray
    y_tail: np.ndarray | None
    z_tail: np.ndarray | None

    @property
    def below_y_tail(self) -> bool | None:
        if self.y_tail is None:
            return None
        return bool(np.all(self.first_gap_tail[1:] <= self.y_tail[1:]))

    @property
    def above_z_tail(self) -> bool | None:
        if self.z_tail is None:
            return None
        return bool(np.all(self.z_tail[1:] <= self.first_gap_tail[1:]))

    def summary(self) -> dict:
        return {
            "y": self.y,
            "K": self.K,
            "mean_gap": self.mean_gap,
            "mean_gap_heuristic": self.mean_gap_heuristic,
            "logseries_tv": self.logseries_tv,
            "below_y_tail": self.below_y_tail,
            "above_z_tail": self.above_z_tail,
        }


def gap_statistics(table: AnnealedTable, model: LogSeriesModel | None = None) -> GapDiagnostics:
    """Gap marginals under Q_{0,y} compared with the log-series heuristic.

    The log-series comparison uses parameter 1 - e^{-K} truncated to 1..y.
    With a ``model`` the first-gap tail P(R_1 >= x) is also set against the
    comparison tails built from its q.
    """
    y = table.y
    p, M = table.params.p, table.params.M
    if p >= 1.0:
        raise ValueError("gap statistics need p < 1")
    K = k_rate(p, M)
    configs = table.configs
    first = marginal(first_gaps(configs, y), table.weights, y)
    middle = marginal(middle_gaps(configs, y), table.weights, y)
    pooled = pooled_gap_pmf(table)
    mean_n = float(np.dot(table.weights, table.n_occ + 1))
    r = np.arange(1, y + 1)
    ref = logseries_pmf(-math.expm1(-K), r)
    ref = ref / ref.sum()
    tv = 0.5 * float(np.abs(pooled[1:] - ref).sum())
    tail = np.zeros(y + 1)
    tail[1:] = np.cumsum(first[1:][::-1])[::-1]
    y_tail = z_tail = None
    if model is not None:
        comp = ComparisonDistributions.from_model(model)
        y_tail = np.array([math.nan] + [comp.y_tail(x) for x in range(1, y + 1)])
        z_tail = np.array([math.nan] + [comp.z_tail(x) for x in range(1, y + 1)])
    return GapDiagnostics(
        y=y,
        K=K,
        mean_gap=y / mean_n,
        mean_gap_heuristic=mean_gap_heuristic(K),
        first_gap_pmf=first,
        middle_gap_pmf=middle,
        pooled_pmf=pooled,
        logseries_tv=tv,
        first_gap_tail=tail,
        y_tail=y_tail,
        z_tail=z_tail,
    )
