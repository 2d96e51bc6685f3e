"""Gradient ascent on the Gaussian log-likelihood of the symmetrised data."""
from dataclasses import dataclass
import math

import numpy as np

from ..errors import DivergenceError, UsageError
from . import POSTERIOR_MEAN, EstimateSet, split
from .spectral import componentwise_pca


@dataclass(frozen=True)
class GdConfig:
    steps: int = 5000
    gamma: float = 0.05
    schedule: str = "constant"  # or "decay": gamma / (1 + t)
    init: str = "joint_pca"  # or "given"
    tol: float = 1e-6
    max_halvings: int = 6

    def __post_init__(self):
        if self.schedule not in ("constant", "decay"):
            raise UsageError(f"unknown step schedule {self.schedule!r}")
        if self.init not in ("joint_pca", "given"):
            raise UsageError(f"unknown init {self.init!r}")
        if self.gamma < 0 or self.steps < 0:
            raise UsageError("gamma and steps must be nonnegative")


def _run(A, ls_over_N, n, offsets, side_terms, x, cfg, gamma0, trace):
    K = len(n)
    limit = 1e6 * math.sqrt(float(np.sum(n)))
    hist = []
    for t in range(cfg.steps):
        gamma = gamma0 if cfg.schedule == "constant" else gamma0 / (1.0 + t)
        norms = np.array([x[offsets[k]:offsets[k + 1]] @ x[offsets[k]:offsets[k + 1]] for k in range(K)])
        coef = np.repeat(ls_over_N @ norms, n)
        grad = A @ x - coef * x
        if side_terms is not None:
            h, r = side_terms
            grad += h - r * x
        step = gamma * grad
        x = x + step
        xn = float(np.linalg.norm(x))
        if not math.isfinite(xn) or xn > limit:
            return None, t, hist
        if trace:
            hist.append((t, norms.copy()))
        if float(np.linalg.norm(step)) <= cfg.tol * max(xn, 1e-300):
            return x, t + 1, hist
    return x, cfg.steps, hist


def gradient_descent(sym, spec, cfg=GdConfig(), init=None, seed=0, trace=False):
    """Iterate ``x_k += g [sum_l sqrt(ls_kl/N) Y_kl x_l - (sum_l ls_kl |x_l|^2 / N) x_k]``.

    Side channels, when present, add the matching likelihood term
    ``sqrt(r_k) Y_k - r_k x_k``.  On blow-up the step size is halved and the
    run restarted, up to ``cfg.max_halvings`` times.  The default start is
    joint PCA applied per connected component of the SNR graph, so that a
    decoupled group never starts at the exact zero fixed point.
    """
    n = np.asarray(sym.n)
    off = sym.offsets
    if cfg.init == "given":
        if init is None:
            raise UsageError("init='given' needs initial vectors")
        x0 = np.concatenate([np.asarray(v, dtype=np.float64) for v in init])
    else:
        x0 = np.concatenate(componentwise_pca(sym, seed=seed))
    if x0.shape != (n.sum(),):
        raise UsageError("initial vector has the wrong length")
    A = sym.scale_matrix() * sym.dense()
    ls_over_N = sym.lambda_sym / sym.N
    side = None
    if np.any(sym.r > 0):
        h = np.concatenate([
            math.sqrt(sym.r[k]) * sym.side[k] if sym.side[k] is not None else np.zeros(n[k])
            for k in range(sym.K)
        ])
        side = (h, np.repeat(sym.r, n))
    gamma = cfg.gamma
    for _ in range(cfg.max_halvings + 1):
        x, iters, hist = _run(A, ls_over_N, n, off, side, x0.copy(), cfg, gamma, trace)
        if x is not None:
            info = {"iterations": iters, "gamma": gamma, "converged": iters < cfg.steps or cfg.steps == 0}
            if trace:
                info["trace"] = hist
            return EstimateSet(split(x, off), POSTERIOR_MEAN, info)
        gamma *= 0.5
    raise DivergenceError(f"gradient descent diverged even at step size {gamma * 2:.3g}; try a smaller gamma")
