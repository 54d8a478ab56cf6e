"""Annealed crossing measures, their exponents and the log-series gap law."""

from .enumeration import (
    AnnealedTable,
    EnumerationCapError,
    ExponentSequence,
    annealed_lyapunov,
    annealed_speed_exact,
    annealed_speed_mc,
    direct_weights,
    enumerate_annealed,
    formula_weights,
    half_line_ratio_mc,
    total_variation,
)
from .gaps import GapDiagnostics, gap_statistics
from .logseries import (
    BracketTooWideError,
    BudgetExceededError,
    ComparisonDistributions,
    InconsistentBracketError,
    LogSeriesModel,
    MuBracket,
    UnEstimate,
    k_rate,
    mean_gap_heuristic,
    mu_bracket,
    sample_logseries,
    solve_q,
    u1_exact,
    u_n_estimate,
)

__all__ = [
    "AnnealedTable",
    "BracketTooWideError",
    "BudgetExceededError",
    "ComparisonDistributions",
    "EnumerationCapError",
    "ExponentSequence",
    "GapDiagnostics",
    "InconsistentBracketError",
    "LogSeriesModel",
    "MuBracket",
    "UnEstimate",
    "annealed_lyapunov",
    "annealed_speed_exact",
    "annealed_speed_mc",
    "direct_weights",
    "enumerate_annealed",
    "formula_weights",
    "gap_statistics",
    "half_line_ratio_mc",
    "k_rate",
    "mean_gap_heuristic",
    "mu_bracket",
    "sample_logseries",
    "solve_q",
    "total_variation",
    "u1_exact",
    "u_n_estimate",
]
