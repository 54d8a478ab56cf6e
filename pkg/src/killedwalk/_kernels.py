"""Compiled inner loops shared by the exact solvers and the Monte Carlo code.

Every kernel works on survival probabilities ``s = exp(-V)`` of a chain on
sites ``0..Y`` with failure at index 0 and success at index ``Y``.  For the
killed walk conditioned on success, the ratio ``a(k) = h(k)/h(k+1)`` obeys

    a(0) = 0,   a(k) = (s_k/2) / (1 - (s_k/2) a(k-1)),

which depends only on sites to the left of ``k``.  The conditioned walk
steps left from ``k`` with probability ``s_k a(k-1)/2``, and the expected
time ``d(k)`` to move from ``k`` to ``k+1`` satisfies
``d(k) = (1 + pi_minus(k) d(k-1)) / pi_plus(k)``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def conditioned_chain(surv):
    """Ratios, left-step probabilities and unit-crossing times for one chain.

    ``surv[k]`` is used for ``k = 1..Y-1``; entries 0 and ``Y`` are ignored.
    """
    Y = surv.shape[0] - 1
    a = np.zeros(Y + 1)
    pm = np.zeros(Y + 1)
    d = np.zeros(Y + 1)
    for k in range(1, Y):
        half = 0.5 * surv[k]
        pm[k] = half * a[k - 1]
        pp = 1.0 - pm[k]
        a[k] = half / pp
        d[k] = (1.0 + pm[k] * d[k - 1]) / pp
    return a, pm, d


@njit(cache=True)
def escape_time_from_gaps(left_gaps, v_origin, M):
    """E(tau_1 | tau_1 < tau_{-a_j}) for one left environment.

    ``left_gaps[0] = a_1 >= 0`` is the distance from 0 to the nearest
    obstacle at or left of 0; later entries are the gaps between successive
    obstacles.  Sites strictly between obstacles are vacant and site 0 has
    potential ``v_origin`` (equal to ``M`` exactly when ``a_1 == 0``).
    Hitting ``-a_j`` (``j = len(left_gaps)``) counts as failure.
    """
    j = left_gaps.shape[0]
    depth = 0
    for i in range(j):
        depth += left_gaps[i]
    if depth == 0:
        return 1.0
    # chain index i <-> site i - depth; target index depth + 1 is site 1.
    # Obstacle -a_k sits at index a_j - a_k, visited for k = j-1 down to 1.
    s_obs = math.exp(-M)
    next_obs = left_gaps[j - 1] if j >= 2 else -1
    g = j - 2
    a_prev = 0.0
    d_prev = 0.0
    for i in range(1, depth + 1):
        if i == depth:
            s = math.exp(-v_origin)
        elif i == next_obs:
            s = s_obs
            if g >= 1:
                next_obs += left_gaps[g]
                g -= 1
            else:
                next_obs = -1
        else:
            s = 1.0
        half = 0.5 * s
        pm = half * a_prev
        pp = 1.0 - pm
        a_prev = half / pp
        d_prev = (1.0 + pm * d_prev) / pp
    return d_prev


@njit(cache=True)
def escape_times_batch(gap_matrix, origin_values, M):
    """Vectorised :func:`escape_time_from_gaps` over rows of ``gap_matrix``."""
    n = gap_matrix.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = escape_time_from_gaps(gap_matrix[i], origin_values[i], M)
    return out


@njit(cache=True)
def crossing_batch(values):
    """(log Z, t_cond) for each row of a potential matrix on sites ``0..y``.

    Row ``i`` holds V(0..y) for one environment; V(y) is ignored.
    """
    n, width = values.shape
    y = width - 1
    log_z = np.empty(n)
    t_cond = np.empty(n)
    for i in range(n):
        a_prev = 0.0
        d_prev = 0.0
        acc_log = 0.0
        acc_t = 0.0
        for k in range(1, y):
            half = 0.5 * math.exp(-values[i, k])
            pm = half * a_prev
            pp = 1.0 - pm
            a_prev = half / pp
            d_prev = (1.0 + pm * d_prev) / pp
            acc_log += math.log(a_prev)
            acc_t += d_prev
        log_z[i] = math.log(0.5) - values[i, 0] + acc_log
        t_cond[i] = 1.0 + acc_t
    return log_z, t_cond


@njit(cache=True)
def lyapunov_terms(values, lams, a_init):
    """Per-site ``-log a(k)`` for each tilt in ``lams``.

    ``values`` is the potential along the whole window (burn-in first);
    ``a_init[m]`` seeds the recursion for tilt ``lams[m]``.
    Returns an array of shape ``(len(lams), len(values))``.
    """
    nl = lams.shape[0]
    n = values.shape[0]
    out = np.empty((nl, n))
    for m in range(nl):
        a = a_init[m]
        for k in range(n):
            half = 0.5 * math.exp(-(lams[m] + values[k]))
            a = half / (1.0 - half * a)
            out[m, k] = -math.log(a)
    return out
