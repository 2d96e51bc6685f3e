"""Joint and weighted PCA.

Both return unit-norm, sign-ambiguous estimates; evaluation applies the
optimal scaling.
"""
import itertools
import math

import numpy as np

from ..errors import DegenerateInputError, UsageError
from . import SCALE_FREE, EstimateSet, split
from .eig import leading_eigvec


def joint_pca(sym, method="auto", seed=0):
    """Leading eigenvector of ``Y*``: all symmetrised blocks with ``lam_sym > 0``."""
    Y = sym.dense(zero_unused=True)
    if not np.any(Y):
        raise DegenerateInputError("every block has lam_sym = 0; Y* is empty")
    v, val = leading_eigvec(Y, method=method, seed=seed)
    return EstimateSet(split(v, sym.offsets), SCALE_FREE, {"eigval": val})


def components(lambda_sym):
    """Connected components of the graph with an edge wherever ``lam_sym > 0``."""
    K = lambda_sym.shape[0]
    seen, comps = set(), []
    for s in range(K):
        if s in seen:
            continue
        stack, comp = [s], []
        seen.add(s)
        while stack:
            k = stack.pop()
            comp.append(k)
            for l in range(K):
                if l not in seen and lambda_sym[k, l] > 0:
                    seen.add(l)
                    stack.append(l)
        comps.append(sorted(comp))
    return comps


def componentwise_pca(sym, method="auto", seed=0):
    """Joint PCA run separately on each connected component of ``Y*``.

    On a connected SNR graph this is joint PCA itself.  When ``Y*`` is block
    diagonal the global leading eigenvector lives in one component and is
    exactly zero elsewhere; this variant gives every component its own
    eigenvector, scaled to norm ``sqrt(n_component)``.  Groups with no
    observed interactions get zeros.
    """
    full = sym.dense(zero_unused=True)
    off = sym.offsets
    out = [np.zeros(n) for n in sym.n]
    for comp in components(sym.lambda_sym):
        if not any(sym.lambda_sym[k, l] > 0 for k in comp for l in comp):
            continue
        idx = np.concatenate([np.arange(off[k], off[k + 1]) for k in comp])
        v, _ = leading_eigvec(full[np.ix_(idx, idx)], method=method, seed=seed)
        v = v * math.sqrt(idx.size)
        pos = 0
        for k in comp:
            out[k] = v[pos:pos + sym.n[k]].copy()
            pos += sym.n[k]
    return out


def _gram(sym, k, l, cache):
    key = (k, l)
    if cache is not None and key in cache:
        return cache[key]
    B = sym.block(k, l)
    G = B @ B.T
    if cache is not None:
        cache[key] = G
    return G


def weighted_pca(sym, weights, k, method="auto", seed=0, _cache=None):
    """Leading eigenvector of ``w_kk Y_kk + sum_{l != k} w_kl Y_kl Y_kl^T``.

    ``weights`` is a length-K vector indexed by the partner group ``l``.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (sym.K,):
        raise UsageError(f"need {sym.K} weights, got shape {w.shape}")
    if np.any(w < 0):
        raise UsageError("weights must be nonnegative")
    if not np.any(w > 0):
        raise UsageError("all weights are zero")
    M = w[k] * sym.block(k, k) if w[k] > 0 else np.zeros((sym.n[k], sym.n[k]))
    for l in range(sym.K):
        if l != k and w[l] > 0:
            M = M + w[l] * _gram(sym, k, l, _cache)
    v, _ = leading_eigvec(M, method=method, seed=seed)
    return v


def weight_grid(K, n, resolution=17):
    """Simplex grid with ``resolution`` levels per weight.

    A point ``c`` maps to ``w_kk = c_k`` and ``w_kl = c_l / sqrt(n_l)``; the
    ``1/sqrt(n)`` puts ``Y_kk`` and ``Y_kl Y_kl^T`` on comparable spectral
    scales.  Returned as ``grid[k] -> list of weight vectors`` for target k.
    """
    if resolution < 1:
        raise UsageError("grid resolution must be >= 1")
    steps = resolution - 1
    comps = []
    if steps == 0:
        comps.append(np.full(K, 1.0 / K))
    else:
        for c in itertools.product(range(steps + 1), repeat=K):
            if sum(c) == steps:
                comps.append(np.array(c, dtype=np.float64) / steps)
    out = []
    for k in range(K):
        rows = []
        for c in comps:
            w = np.array([c[l] if l == k else c[l] / math.sqrt(n[l]) for l in range(K)])
            if np.any(w > 0):
                rows.append(w)
        out.append(rows)
    return out


def _scaled_loss(u, uhat):
    n = u.size
    nu2 = float(u @ u)
    corr = float(u @ uhat) ** 2 / (n * float(uhat @ uhat))
    return nu2**2 / n**2 - corr**2


def weight_grid_search(sym, truth, grid, method="auto", seed=0):
    """Per-group weights minimising the optimally scaled loss against ``truth``.

    This is an oracle: it looks at the ground truth, so the result is a lower
    bound for any data-driven weight choice.
    """
    if len(grid) != sym.K or any(len(g) == 0 for g in grid):
        raise UsageError("weight grid must list at least one candidate per group")
    cache = {}
    best_w, est = [], []
    for k in range(sym.K):
        best = (np.inf, None, None)
        for w in grid[k]:
            v = weighted_pca(sym, w, k, method=method, seed=seed, _cache=cache)
            loss = _scaled_loss(truth[k], v)
            if loss < best[0]:
                best = (loss, np.asarray(w), v)
        best_w.append(best[1])
        est.append(best[2])
    return best_w, EstimateSet(est, SCALE_FREE, {"weights": [w.tolist() for w in best_w]})
