"""Approximate message passing, groupwise and per-entry forms.

Groupwise update for every group k, all groups in parallel::

    a_k = sum_l sqrt(ls_kl/N) Ys_kl m_l - (sum_l ls_kl/N Ys_kl^2 v_l) * m_k^{t-1}
    b_k = sum_l ls_kl/N (1 m_l^2 + (1 - Ys_kl^2) v_l)
    m_k, v_k = eta_k(a_k, b_k), eta_k'(a_k, b_k)

with ``ls = Lam + Lam^T``.  Side channels add ``sqrt(r_k) Y_k`` to ``a_k``
and ``r_k`` to ``b_k``.  The fluctuation term ``(1 - Ys^2) v`` can push
``b`` slightly below zero in early iterations; ``b`` is floored at zero,
which is the domain of the denoisers.
"""
from dataclasses import dataclass
import math

import numpy as np

from ..errors import NumericError, UsageError
from ..priors import posterior_moments
from . import POSTERIOR_MEAN, EstimateSet, split

INIT_STD = 1e-3


@dataclass
class AmpState:
    t: int
    m: list
    v: list
    a: list
    b: list


def _denoise(priors, groups_slices, a, b):
    m = np.empty_like(a)
    v = np.empty_like(a)
    for prior, sl in zip(priors, groups_slices):
        mk, vk = posterior_moments(prior, a[sl], b[sl])
        m[sl] = mk
        v[sl] = vk
    return m, v


def _check(t, m, v):
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(v))):
        raise NumericError(f"AMP state became non-finite at iteration {t}")
    if np.any(v < -1e-12):
        raise NumericError(f"AMP variance went negative at iteration {t}")


def _loop(matvec_a, matvec_s, lin_b, priors, slices, h, rvec, m0, T, tol, damping, trace, offsets):
    m = m0.copy()
    m_prev = np.zeros_like(m)
    v = np.zeros_like(m)
    traj = []
    a = b = None
    t = 0
    for t in range(T):
        a = matvec_a(m) - matvec_s(v) * m_prev + h
        b = np.maximum(lin_b(m * m) + lin_b(v) - matvec_s(v) + rvec, 0.0)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise NumericError(f"AMP fields became non-finite at iteration {t}")
        m_new, v_new = _denoise(priors, slices, a, b)
        if damping:
            m_new = (1.0 - damping) * m_new + damping * m
            v_new = (1.0 - damping) * v_new + damping * v
        _check(t, m_new, v_new)
        step = float(np.linalg.norm(m_new - m))
        scale = float(np.linalg.norm(m))
        m_prev, m, v = m, m_new, v_new
        if trace:
            traj.append(AmpState(t + 1, split(m, offsets), split(v, offsets), split(a, offsets), split(b, offsets)))
        if scale > 0 and step / scale < tol:
            break
    if not trace:
        traj.append(AmpState(t + 1, split(m, offsets), split(v, offsets),
                             split(a, offsets) if a is not None else None,
                             split(b, offsets) if b is not None else None))
    return m, v, traj, t + 1


def initial_means(dim, seed):
    """``m^0`` with i.i.d. N(0, 1e-6) entries from a seeded Philox stream."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(3,))))
    return INIT_STD * rng.standard_normal(dim)


def amp_groupwise(sym, spec, T=200, m0=None, seed=0, tol=1e-8, damping=0.0, trace=False, zero_diagonal=False):
    """Run groupwise AMP on symmetrised observations.

    Returns ``(EstimateSet of m^T, list of AmpState)``; the list holds every
    iterate when ``trace`` is set and only the last one otherwise.  With
    ``zero_diagonal`` the diagonal of each ``Ys_kk`` is dropped, which is the
    per-entry convention.
    """
    n = np.asarray(sym.n)
    off = sym.offsets
    dim = int(n.sum())
    if len(spec.priors) != sym.K:
        raise UsageError("spec and observations disagree on K")
    if not 0.0 <= damping < 1.0:
        raise UsageError("damping must lie in [0, 1)")
    Y = sym.dense()
    if zero_diagonal:
        np.fill_diagonal(Y, 0.0)
    G2 = sym.lambda_sym / sym.N
    A = sym.scale_matrix() * Y
    S = np.repeat(np.repeat(G2, n, axis=0), n, axis=1) * (Y * Y)
    del Y
    slices = [slice(off[k], off[k + 1]) for k in range(sym.K)]

    def lin_b(z):
        sums = np.array([z[s].sum() for s in slices])
        return np.repeat(G2 @ sums, n)

    h = np.zeros(dim)
    rvec = np.repeat(np.asarray(sym.r, dtype=np.float64), n)
    for k in range(sym.K):
        if sym.r[k] > 0 and sym.side[k] is not None:
            h[slices[k]] = math.sqrt(sym.r[k]) * sym.side[k]
    if m0 is None:
        m0 = initial_means(dim, seed)
    else:
        m0 = np.concatenate([np.asarray(v, dtype=np.float64) for v in m0]) if isinstance(m0, (list, tuple)) else np.asarray(m0, dtype=np.float64)
    m, v, traj, iters = _loop(lambda z: A @ z, lambda z: S @ z, lin_b, spec.priors, slices, h, rvec,
                              m0, T, tol, damping, trace, off)
    return EstimateSet(split(m, off), POSTERIOR_MEAN, {"iterations": iters, "v": split(v, off)}), traj


def _coordinate_slices(priors, groups):
    groups = np.asarray(groups)
    out_p, out_s = [], []
    for g in np.unique(groups):
        idx = np.flatnonzero(groups == g)
        out_p.append(priors[int(g)])
        out_s.append(idx)
    return out_p, out_s


def amp_general(y_tilde, lambda_tilde, N, priors, groups, T=200, m0=None, seed=0, tol=1e-8):
    """Per-entry AMP on ``y~_ij = sqrt(l_ij) y_ij + sqrt(l_ji) y_ji``.

    ``priors[g]`` is the prior of every coordinate with ``groups[i] == g``.
    Both matrices must be symmetric with zero diagonal.
    """
    Yt = np.asarray(y_tilde, dtype=np.float64)
    Lt = np.asarray(lambda_tilde, dtype=np.float64)
    dim = Yt.shape[0]
    if Yt.shape != (dim, dim) or Lt.shape != (dim, dim):
        raise UsageError("y_tilde and lambda_tilde must be square and the same size")
    if np.any(np.diag(Yt) != 0) or np.any(np.diag(Lt) != 0):
        raise UsageError("diagonals of y_tilde and lambda_tilde must be zero")
    if len(groups) != dim:
        raise UsageError("need one group label per coordinate")
    plist, slices = _coordinate_slices(priors, groups)
    A = Yt / math.sqrt(N)
    S = Yt * Yt / N
    L = Lt / N
    if m0 is None:
        m0 = initial_means(dim, seed)
    m, v, traj, iters = _loop(lambda z: A @ z, lambda z: S @ z, lambda z: L @ z, plist, slices,
                              np.zeros(dim), np.zeros(dim), np.asarray(m0, dtype=np.float64),
                              T, tol, 0.0, False, np.array([0, dim]))
    return m, v, iters
