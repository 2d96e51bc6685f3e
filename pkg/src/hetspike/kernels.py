"""Hot numeric kernels, each in a numba and a pure-numpy flavour.

The public names (``posterior_moments``, ``gh_entropy_terms``,
``enumerate_posterior``) dispatch on :data:`hetspike._accel.USE_NUMBA`.
The ``*_numpy`` / ``*_numba`` variants are importable directly so tests and
the benchmark can compare both paths on identical inputs.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# Tilted posterior moments of a finite discrete prior
# ---------------------------------------------------------------------------


def posterior_moments_numpy(a, b, atoms, logp):
    """Mean and variance of ``p_i exp(a x_i - b x_i^2 / 2)`` for each (a, b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    logits = a[..., None] * atoms - 0.5 * b[..., None] * atoms**2 + logp
    logits -= logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=-1, keepdims=True)
    mean = w @ atoms
    second = w @ (atoms**2)
    var = np.maximum(second - mean**2, 0.0)
    return mean, var


@njit
def _posterior_moments_kernel(a, b, atoms, logp, mean, var):
    n = a.shape[0]
    m = atoms.shape[0]
    buf = np.empty(m)
    for j in range(n):
        top = -np.inf
        for i in range(m):
            v = a[j] * atoms[i] - 0.5 * b[j] * atoms[i] * atoms[i] + logp[i]
            buf[i] = v
            if v > top:
                top = v
        z = 0.0
        s1 = 0.0
        s2 = 0.0
        for i in range(m):
            w = math.exp(buf[i] - top)
            z += w
            s1 += w * atoms[i]
            s2 += w * atoms[i] * atoms[i]
        mu = s1 / z
        mean[j] = mu
        v2 = s2 / z - mu * mu
        var[j] = v2 if v2 > 0.0 else 0.0


def posterior_moments_numba(a, b, atoms, logp):
    a, b = np.broadcast_arrays(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))
    shape = a.shape
    af = np.ascontiguousarray(a).ravel()
    bf = np.ascontiguousarray(b).ravel()
    mean = np.empty_like(af)
    var = np.empty_like(af)
    _posterior_moments_kernel(af, bf, atoms, logp, mean, var)
    return mean.reshape(shape), var.reshape(shape)


# ---------------------------------------------------------------------------
# Gauss-Hermite evaluation of D(gamma) and D'(gamma) for a discrete prior
# ---------------------------------------------------------------------------


def gh_entropy_terms_numpy(sqrt_gamma, atoms, probs, logp, nodes, weights):
    """Return (D, D') at gamma = sqrt_gamma**2 by per-atom Gauss-Hermite.

    ``nodes``/``weights`` integrate against the standard normal density.
    """
    g = sqrt_gamma * sqrt_gamma
    # y[j, m] = sqrt_gamma * a_j + z_m
    y = sqrt_gamma * atoms[:, None] + nodes[None, :]
    logits = logp[None, None, :] + sqrt_gamma * atoms[None, None, :] * y[:, :, None] - 0.5 * g * atoms**2
    top = logits.max(axis=-1, keepdims=True)
    w = np.exp(logits - top)
    z = w.sum(axis=-1)
    log_ratio = np.log(z) + top[..., 0]
    eta = (w @ atoms) / z
    d = float(probs @ (log_ratio @ weights))
    dp = 0.5 * float(probs @ ((eta**2) @ weights))
    return d, dp


@njit
def _gh_entropy_kernel(sqrt_gamma, atoms, probs, logp, nodes, weights):
    g = sqrt_gamma * sqrt_gamma
    m = atoms.shape[0]
    buf = np.empty(m)
    d = 0.0
    dp = 0.0
    for j in range(m):
        dj = 0.0
        ej = 0.0
        for k in range(nodes.shape[0]):
            y = sqrt_gamma * atoms[j] + nodes[k]
            top = -np.inf
            for i in range(m):
                v = logp[i] + sqrt_gamma * atoms[i] * y - 0.5 * g * atoms[i] * atoms[i]
                buf[i] = v
                if v > top:
                    top = v
            z = 0.0
            s1 = 0.0
            for i in range(m):
                w = math.exp(buf[i] - top)
                z += w
                s1 += w * atoms[i]
            eta = s1 / z
            dj += weights[k] * (math.log(z) + top)
            ej += weights[k] * eta * eta
        d += probs[j] * dj
        dp += probs[j] * ej
    return d, 0.5 * dp


def gh_entropy_terms_numba(sqrt_gamma, atoms, probs, logp, nodes, weights):
    return _gh_entropy_kernel(float(sqrt_gamma), atoms, probs, logp, nodes, weights)


# ---------------------------------------------------------------------------
# Exhaustive posterior over a product of finite priors
# ---------------------------------------------------------------------------
#
# Log-weight of a configuration x (length n):
#     x^T C x - 0.5 (x^2)^T Q (x^2) + h^T x - 0.5 s^T x^2 + sum_i logp_i(x_i)
# where C carries the linear data coefficients, Q the quartic ones, and
# (h, s) the side channels.  Configurations are indexed in mixed radix with
# coordinate 0 varying slowest.


def _unravel(idx, counts):
    n = counts.shape[0]
    out = np.empty((idx.shape[0], n), dtype=np.int64)
    rem = idx.copy()
    for i in range(n - 1, -1, -1):
        out[:, i] = rem % counts[i]
        rem //= counts[i]
    return out


def enumerate_posterior_numpy(atom_table, logp_table, counts, C, Q, h, s, chunk=1 << 16):
    """Return (log Z, E[x], E[x x^T], E[x^2 (x^2)^T]) under the exact posterior."""
    n = counts.shape[0]
    total = int(np.prod(counts))
    rows = np.arange(n)
    log_z = -np.inf
    mean = np.zeros(n)
    second = np.zeros((n, n))
    fourth = np.zeros((n, n))
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        digits = _unravel(idx, counts)
        x = atom_table[rows, digits]
        x2 = x * x
        lw = (
            np.einsum("ci,ij,cj->c", x, C, x)
            - 0.5 * np.einsum("ci,ij,cj->c", x2, Q, x2)
            + x @ h
            - 0.5 * (x2 @ s)
            + logp_table[rows, digits].sum(axis=1)
        )
        top = lw.max()
        if top == -np.inf:
            continue
        new_log_z = np.logaddexp(log_z, top + np.log(np.exp(lw - top).sum()))
        scale_old = math.exp(log_z - new_log_z) if np.isfinite(log_z) else 0.0
        w = np.exp(lw - new_log_z)
        mean = mean * scale_old + w @ x
        second = second * scale_old + (x * w[:, None]).T @ x
        fourth = fourth * scale_old + (x2 * w[:, None]).T @ x2
        log_z = new_log_z
    return float(log_z), mean, second, fourth


@njit
def _enumerate_kernel(atom_table, logp_table, counts, C, Q, h, s):
    n = counts.shape[0]
    total = 1
    for i in range(n):
        total *= counts[i]
    x = np.empty(n)
    mean = np.zeros(n)
    second = np.zeros((n, n))
    fourth = np.zeros((n, n))
    top = -np.inf
    z = 0.0
    for c in range(total):
        rem = c
        lw = 0.0
        for i in range(n - 1, -1, -1):
            d = rem % counts[i]
            rem //= counts[i]
            x[i] = atom_table[i, d]
            lw += logp_table[i, d] + h[i] * x[i] - 0.5 * s[i] * x[i] * x[i]
        for i in range(n):
            acc = 0.0
            acc2 = 0.0
            for j in range(n):
                acc += C[i, j] * x[j]
                acc2 += Q[i, j] * x[j] * x[j]
            lw += x[i] * acc - 0.5 * x[i] * x[i] * acc2
        if lw == -np.inf:
            continue
        if lw > top:
            scale = math.exp(top - lw) if top > -np.inf else 0.0
            z *= scale
            for i in range(n):
                mean[i] *= scale
                for j in range(n):
                    second[i, j] *= scale
                    fourth[i, j] *= scale
            top = lw
        w = math.exp(lw - top)
        z += w
        for i in range(n):
            mean[i] += w * x[i]
            for j in range(n):
                second[i, j] += w * x[i] * x[j]
                fourth[i, j] += w * x[i] * x[i] * x[j] * x[j]
    return top + math.log(z), mean / z, second / z, fourth / z


def enumerate_posterior_numba(atom_table, logp_table, counts, C, Q, h, s):
    return _enumerate_kernel(atom_table, logp_table, counts, C, Q, h, s)


posterior_moments = posterior_moments_numba if USE_NUMBA else posterior_moments_numpy
gh_entropy_terms = gh_entropy_terms_numba if USE_NUMBA else gh_entropy_terms_numpy
enumerate_posterior = enumerate_posterior_numba if USE_NUMBA else enumerate_posterior_numpy
