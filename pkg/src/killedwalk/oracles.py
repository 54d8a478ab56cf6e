"""Independent reference solvers used to cross-check the fast code paths.

These are deliberately naive: dense linear algebra or exact rationals,
with no shared code beyond the environment container.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy.linalg import solve_banded


def fraction_ruin_and_time(n: int) -> tuple[list[Fraction], list[Fraction]]:
    """Solve -1/2 Laplacian u = f on {1..n-1} exactly for the simple walk.

    Returns (h, g) with h(k) = P^k(tau_n < tau_0) and
    g(k) = E^k(tau_n; tau_n < tau_0), by Gaussian elimination on Fractions.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    m = n - 1
    half = Fraction(1, 2)

    def solve(rhs: list[Fraction]) -> list[Fraction]:
        # tridiagonal: u_k - (u_{k-1} + u_{k+1})/2 = rhs_k, zero boundary values folded in
        diag = [Fraction(1)] * m
        r = list(rhs)
        for i in range(1, m):
            w = -half / diag[i - 1]
            diag[i] -= w * -half
            r[i] -= w * r[i - 1]
        u = [Fraction(0)] * m
        u[-1] = r[-1] / diag[-1]
        for i in range(m - 2, -1, -1):
            u[i] = (r[i] + half * u[i + 1]) / diag[i]
        return u

    rhs_h = [Fraction(0)] * m
    rhs_h[-1] = half
    h = solve(rhs_h)
    g = solve(h)
    return [Fraction(0), *h, Fraction(1)], [Fraction(0), *g, Fraction(0)]


def absorbing_chain_time(surv: np.ndarray, start: int) -> tuple[float, float]:
    """Dense solve for a killed walk on chain indices ``0..Y``.

    Index 0 is failure, ``Y`` success; interior sites survive a step with
    probability ``surv[k]``.  Returns (P(success), E(time | success)) from
    ``start``, using the fundamental matrix of the transient block.
    """
    Y = surv.size - 1
    if not 1 <= start <= Y - 1:
        raise ValueError("start must be an interior index")
    m = Y - 1
    Q = np.zeros((m, m))
    R = np.zeros(m)
    for k in range(1, Y):
        i = k - 1
        s = 0.5 * surv[k]
        if k - 1 >= 1:
            Q[i, i - 1] = s
        if k + 1 <= Y - 1:
            Q[i, i + 1] = s
        else:
            R[i] = s
    N = np.linalg.inv(np.eye(m) - Q)
    b = N @ R
    t = N @ b
    i = start - 1
    return float(b[i]), float(t[i] / b[i])


def banded_crossing(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """h and g on ``0..y`` from the potential ``values[0..y]`` via banded solves."""
    y = values.size - 1
    if y < 2:
        raise ValueError("need y >= 2 for interior sites")
    m = y - 1
    s = np.exp(-values[1:y])
    ab = np.zeros((3, m))
    ab[1] = 1.0
    ab[0, 1:] = -0.5 * s[:-1]
    ab[2, :-1] = -0.5 * s[1:]
    rhs = np.zeros(m)
    rhs[-1] = 0.5 * s[-1]
    h = solve_banded((1, 1), ab, rhs)
    g = solve_banded((1, 1), ab, h)
    return np.concatenate([[0.0], h, [1.0]]), np.concatenate([[0.0], g, [0.0]])
