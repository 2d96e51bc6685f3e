"""Relaxed belief propagation on the per-entry model (small n only).

Keeps one ``(m_ij, v_ij)`` pair per directed edge, so memory is O(n^2).
It exists to cross-check AMP, not as a production estimator.
"""
import math

import numpy as np

from ..errors import ResourceError, UsageError
from ..priors import posterior_moments

MAX_N = 64


def _eta(priors, groups, a, b):
    """Apply eta_i row by row; ``a`` and ``b`` have shape (n, ...)."""
    m = np.empty_like(a)
    v = np.empty_like(a)
    for g in np.unique(groups):
        rows = groups == g
        m[rows], v[rows] = posterior_moments(priors[int(g)], a[rows], b[rows])
    return m, v


def relaxed_bp(y_tilde, lambda_tilde, N, priors, groups, T=30, m0=None, tol=1e-12):
    """Parallel relaxed BP; returns a dict with edge messages and marginals.

    ``msg_m[i, j]`` is the cavity mean of ``x_i`` with node ``j`` removed.
    Edge coefficients are ``a_ki = y~_ki m_ki / sqrt(N)`` and
    ``b_ki = (l~_ki m_ki^2 + (l~_ki - y~_ki^2) v_ki) / N``.
    """
    Yt = np.asarray(y_tilde, dtype=np.float64)
    Lt = np.asarray(lambda_tilde, dtype=np.float64)
    n = Yt.shape[0]
    if n > MAX_N:
        raise ResourceError(f"relaxed BP keeps n^2 messages; n={n} exceeds {MAX_N}")
    if Yt.shape != (n, n) or Lt.shape != (n, n):
        raise UsageError("y_tilde and lambda_tilde must be square and the same size")
    groups = np.asarray(groups)
    off = ~np.eye(n, dtype=bool)
    if m0 is None:
        m0 = np.zeros(n)
    msg_m = np.repeat(np.asarray(m0, dtype=np.float64)[:, None], n, axis=1)
    msg_v = np.zeros((n, n))
    sq = math.sqrt(N)
    for t in range(T):
        # rows index the sender k, columns the receiver i
        a = np.where(off, Yt * msg_m / sq, 0.0)
        b = np.where(off, (Lt * msg_m**2 + (Lt - Yt**2) * msg_v) / N, 0.0)
        A_in = a.sum(axis=0)
        B_in = b.sum(axis=0)
        # cavity field at i excluding j: A_in[i] - a[j, i]
        cav_a = A_in[:, None] - a.T
        cav_b = np.maximum(B_in[:, None] - b.T, 0.0)
        new_m, new_v = _eta(priors, groups, cav_a, cav_b)
        new_m[~off] = 0.0
        new_v[~off] = 0.0
        delta = float(np.max(np.abs(new_m - msg_m))) if t else np.inf
        msg_m, msg_v = new_m, new_v
        if delta < tol:
            break
    a = np.where(off, Yt * msg_m / sq, 0.0)
    b = np.where(off, (Lt * msg_m**2 + (Lt - Yt**2) * msg_v) / N, 0.0)
    mean, var = _eta(priors, groups, a.sum(axis=0), np.maximum(b.sum(axis=0), 0.0))
    return {"msg_m": msg_m, "msg_v": msg_v, "mean": mean, "var": var, "iterations": t + 1}
