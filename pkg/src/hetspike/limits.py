"""Asymptotic relative entropy and MMSE of the groupwise spiked model.

The limit is the max-inf value

    max_{0 <= q <= beta} inf_{rt >= 0}  sum_k beta_k D_k(r_k + rt_k)
                                         + q^T Lam q / 2 - rt^T q / 2.

Differentiating gives the stationarity system used by the solver::

    rt = (Lam + Lam^T) q,        q_k = 2 beta_k D_k'(r_k + rt_k).

The right-hand side of the second equation is monotone in ``q`` when
``Lam >= 0``, so damped fixed-point iteration from a lattice of starts finds
every stable stationary point; a Newton polish sharpens each one.  The
multistart search is a heuristic, not a certified global optimiser.
"""
from dataclasses import dataclass, field, replace
from itertools import product
import math

import numpy as np
from scipy import optimize

from .errors import DomainError, NumericError, SolverError, UsageError
from .priors import DEFAULT_ORDER, Prior, relative_entropy, relative_entropy_deriv


def _frozen(x):
    x = np.array(x, dtype=np.float64)
    x.setflags(write=False)
    return x


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Group sizes, priors, SNR matrix and side-information SNRs."""

    beta: np.ndarray
    priors: tuple
    lam: np.ndarray
    r: np.ndarray = None

    def __post_init__(self):
        beta = _frozen(self.beta)
        K = beta.size
        lam = _frozen(self.lam)
        r = _frozen(np.zeros(K) if self.r is None else self.r)
        priors = tuple(self.priors)
        if beta.ndim != 1 or K == 0:
            raise UsageError("beta must be a nonempty vector")
        if lam.shape != (K, K) or r.shape != (K,) or len(priors) != K:
            raise UsageError(f"inconsistent dimensions for K={K}")
        if not all(isinstance(p, Prior) for p in priors):
            raise UsageError("priors must be Prior instances")
        if not np.all(np.isfinite(lam)) or not np.all(np.isfinite(r)) or not np.all(np.isfinite(beta)):
            raise DomainError("beta, lambda and r must be finite")
        if np.any(beta <= 0):
            raise DomainError("all beta_k must be positive")
        if np.any(lam < 0) or np.any(r < 0):
            raise DomainError("lambda and r must be nonnegative")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "priors", priors)

    @property
    def K(self):
        return self.beta.size

    @property
    def lam_sym(self):
        return self.lam + self.lam.T

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return {
            "beta": self.beta.tolist(),
            "priors": [p.to_dict() for p in self.priors],
            "lambda": self.lam.tolist(),
            "r": self.r.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            beta=doc["beta"],
            priors=tuple(Prior.from_dict(p) for p in doc["priors"]),
            lam=doc["lambda"],
            r=doc.get("r"),
        )


@dataclass(frozen=True)
class SolverOptions:
    damping: float = 0.5
    max_iter: int = 20000
    tol: float = 1e-10
    random_starts: int = 32
    seed: int = 0
    objective_tol: float = 1e-7
    uniqueness_gap: float = 1e-4
    order: int = DEFAULT_ORDER


@dataclass
class SaddlePoint:
    q_star: np.ndarray
    r_tilde_star: np.ndarray
    value: float
    stationary_points: list
    stationary_values: list
    unique: bool
    residual: float = 0.0

    def to_dict(self):
        return {
            "q_star": self.q_star.tolist(),
            "r_tilde": [x if math.isfinite(x) else None for x in self.r_tilde_star.tolist()],
            "value": self.value,
            "unique": self.unique,
            "stationary_points": [
                {"q": q.tolist(), "value": v} for q, v in zip(self.stationary_points, self.stationary_values)
            ],
        }


@dataclass
class MmseResult:
    vector_mmse: np.ndarray
    block_mmse: np.ndarray
    vector_bound_only: np.ndarray
    block_bound_only: np.ndarray

    @property
    def diag_block_mmse(self):
        return np.diag(self.block_mmse).copy()


# ---------------------------------------------------------------------------
# objective pieces
# ---------------------------------------------------------------------------


def _D(spec, gammas, order):
    return np.array([relative_entropy(p, g, order) for p, g in zip(spec.priors, gammas)])


def _Dp(spec, gammas, order):
    out = np.array([relative_entropy_deriv(p, g, order) for p, g in zip(spec.priors, gammas)])
    if not np.all(np.isfinite(out)):
        raise NumericError(f"non-finite D' at gamma={gammas}")
    return out


def objective(spec, q, r_tilde, order=DEFAULT_ORDER):
    """The bracketed function of (q, r_tilde) inside the max-inf."""
    q = np.asarray(q, dtype=np.float64)
    rt = np.asarray(r_tilde, dtype=np.float64)
    return float(spec.beta @ _D(spec, spec.r + rt, order) + 0.5 * q @ spec.lam @ q - 0.5 * rt @ q)


def _inner(prior, beta, r, q, order):
    """min_{t >= 0} beta D(r + t) - t q / 2, returned as (value, argmin)."""
    if q <= 2 * beta * relative_entropy_deriv(prior, r, order):
        return beta * relative_entropy(prior, r, order), 0.0
    if q >= beta:
        if prior.is_gaussian:
            return -math.inf, math.inf
        return 0.5 * beta * r - beta * prior.entropy, math.inf

    def g(t):
        return 2 * beta * relative_entropy_deriv(prior, r + t, order) - q

    hi = 1.0
    while g(hi) < 0:
        hi *= 2.0
        if hi > 1e12:
            return 0.5 * beta * r - beta * prior.entropy, math.inf
    t = optimize.brentq(g, 0.0, hi, xtol=1e-14, rtol=1e-14)
    return beta * relative_entropy(prior, r + t, order) - 0.5 * t * q, t


def value_function(spec, q, order=DEFAULT_ORDER):
    """inf over r_tilde of the objective at fixed q (may be -inf on the boundary)."""
    q = np.asarray(q, dtype=np.float64)
    total = 0.5 * float(q @ spec.lam @ q)
    for k in range(spec.K):
        v, _ = _inner(spec.priors[k], spec.beta[k], spec.r[k], q[k], order)
        total += v
    return total


def _fixed_map(spec, q, order):
    return np.clip(2 * spec.beta * _Dp(spec, spec.r + spec.lam_sym @ q, order), 0.0, spec.beta)


def _residual(spec, q, order):
    return float(np.max(np.abs(_fixed_map(spec, q, order) - q)))


def _iterate(spec, q0, opts):
    q = np.clip(np.asarray(q0, dtype=np.float64), 0.0, spec.beta)
    omega = opts.damping
    prev = math.inf
    res = math.inf
    for it in range(opts.max_iter):
        tq = _fixed_map(spec, q, opts.order)
        res = float(np.max(np.abs(tq - q)))
        if res <= opts.tol:
            return q, res, True
        if res > prev * (1 + 1e-12):
            omega = max(0.5 * omega, 0.05)
        prev = res
        q = (1 - omega) * q + omega * tq
        if res < 1e-6 or (it % 50 == 49 and res < 1e-2):
            polished, pres = _polish(spec, q, opts)
            if pres <= opts.tol:
                return polished, pres, True
    return q, res, False


def _polish(spec, q, opts):
    """Newton-type root polish of q - T(q) = 0 on the free coordinates."""
    tq = _fixed_map(spec, q, opts.order)
    free = ~((q <= 1e-14) & (tq <= 1e-14))
    if not free.any():
        return q, _residual(spec, q, opts.order)

    def F(z):
        full = q.copy()
        full[free] = z
        gam = np.maximum(spec.r + spec.lam_sym @ full, 0.0)
        return full[free] - 2 * spec.beta[free] * _Dp(spec, gam, opts.order)[free]

    try:
        sol = optimize.root(F, q[free], method="hybr", options={"xtol": 1e-15})
    except (ValueError, NumericError):
        return q, _residual(spec, q, opts.order)
    cand = q.copy()
    cand[free] = sol.x
    if not np.all(np.isfinite(cand)):
        return q, _residual(spec, q, opts.order)
    # a root just outside the box often means the boundary face is the answer
    cand = np.clip(cand, 0.0, spec.beta)
    res = _residual(spec, cand, opts.order)
    return (cand, res) if res < _residual(spec, q, opts.order) else (q, _residual(spec, q, opts.order))


def _starts(spec, opts):
    K = spec.K
    b = spec.beta
    if K <= 4:
        lattice = [np.array(c) * b for c in product((0.0, 0.5, 1.0), repeat=K)]
    else:
        lattice = [0 * b, 0.5 * b, b.copy()]
    rng = np.random.default_rng(opts.seed)
    rand = [rng.uniform(0, 1, K) * b for _ in range(opts.random_starts)]
    return lattice + rand


def _corners(spec, opts):
    K = spec.K
    if K <= 4:
        return [np.array(c) * spec.beta for c in product((0.0, 1.0), repeat=K)]
    rng = np.random.default_rng(opts.seed + 1)
    return [rng.integers(0, 2, K) * spec.beta for _ in range(16)]


def solve_limit(spec, opts=None):
    """Global max-inf point of the limit formula, with uniqueness diagnostics."""
    opts = opts or SolverOptions()
    found = []
    best_failed = None
    for s in _starts(spec, opts):
        q, res, ok = _iterate(spec, s, opts)
        if not ok:
            if best_failed is None or res < best_failed[1]:
                best_failed = (q, res)
            continue
        if not any(np.max(np.abs(q - f)) < 1e-9 for f in found):
            found.append(q)
    if not found:
        raise SolverError(
            f"fixed-point iteration did not converge from any start (best residual {best_failed[1]:.3e})",
            best=best_failed,
        )
    M = spec.lam_sym
    values = [objective(spec, q, M @ q, opts.order) for q in found]
    if not all(math.isfinite(v) for v in values):
        raise NumericError("non-finite objective at a stationary point")
    order = np.argsort(values)[::-1]
    found = [found[i] for i in order]
    values = [values[i] for i in order]
    q_star, value = found[0], values[0]
    r_tilde = M @ q_star
    residual = _residual(spec, q_star, opts.order)

    for c in _corners(spec, opts):
        v = value_function(spec, c, opts.order)
        if v > value + opts.objective_tol:
            q_star, value = c, v
            r_tilde = np.array(
                [_inner(spec.priors[k], spec.beta[k], spec.r[k], c[k], opts.order)[1] for k in range(spec.K)]
            )
            residual = math.nan

    unique = True
    for q, v in zip(found, values):
        if v >= value - opts.objective_tol and np.max(np.abs(q - q_star)) > opts.uniqueness_gap:
            unique = False
    return SaddlePoint(
        q_star=q_star,
        r_tilde_star=np.asarray(r_tilde, dtype=np.float64),
        value=float(value),
        stationary_points=found,
        stationary_values=[float(v) for v in values],
        unique=unique,
        residual=residual,
    )


def mmse_from_saddle(saddle, spec):
    q = np.asarray(saddle.q_star, dtype=np.float64)
    if q.shape != spec.beta.shape:
        raise UsageError("saddle point and spec have different K")
    ratio = np.clip(q / spec.beta, 0.0, 1.0)
    vec = 1.0 - ratio
    block = 1.0 - np.outer(ratio, ratio)
    vec_bound = ~((q == 0) | (spec.r > 0))
    block_bound = ~((np.outer(q, q) == 0) | (spec.lam_sym > 0))
    if not saddle.unique:
        vec_bound[:] = True
        block_bound[:] = True
    return MmseResult(vec, block, vec_bound, block_bound)


def immse_check(spec, component, h=1e-4, opts=None):
    """Finite-difference derivative of the limit vs. its I-MMSE value.

    ``component`` is ``("r", k)`` or ``("lambda", k, l)``.
    """
    if h <= 0:
        raise UsageError("step h must be positive")
    opts = opts or SolverOptions()
    kind, *idx = component
    if kind == "r":
        (k,) = idx
        if spec.r[k] - h < 0:
            raise UsageError("r component must be at least h inside the domain")

        def at(delta):
            r = spec.r.copy()
            r[k] += delta
            return spec.replace(r=r)

        sp = solve_limit(spec, opts)
        analytic = 0.5 * sp.q_star[k]
    elif kind == "lambda":
        k, l = idx
        if spec.lam[k, l] - h < 0:
            raise UsageError("lambda component must be at least h inside the domain")

        def at(delta):
            lam = spec.lam.copy()
            lam[k, l] += delta
            return spec.replace(lam=lam)

        sp = solve_limit(spec, opts)
        analytic = 0.5 * sp.q_star[k] * sp.q_star[l]
    else:
        raise UsageError(f"unknown component kind {kind!r}")
    numeric = (solve_limit(at(h), opts).value - solve_limit(at(-h), opts).value) / (2 * h)
    return numeric, analytic


# ---------------------------------------------------------------------------
# decoupled special cases (independent cross-check oracles)
# ---------------------------------------------------------------------------


def _max_on_interval(f, lo, hi, grid=2001):
    xs = np.linspace(lo, hi, grid)
    vals = np.array([f(x) for x in xs])
    i = int(np.argmax(vals))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, grid - 1)]
    if b <= a:
        return float(vals[i])
    res = optimize.minimize_scalar(lambda x: -f(x), bounds=(a, b), method="bounded", options={"xatol": 1e-13})
    return float(max(vals[i], -res.fun))


def limit_value_decoupled_wigner(spec, order=DEFAULT_ORDER):
    """Sum of independent spiked-Wigner limits; needs r = 0 and diagonal Lambda."""
    lam = spec.lam
    if np.any(spec.r != 0) or np.any(lam - np.diag(np.diag(lam)) != 0):
        raise UsageError("decoupled Wigner form needs r = 0 and diagonal Lambda")
    total = 0.0
    for k in range(spec.K):
        b, p, l = spec.beta[k], spec.priors[k], lam[k, k]
        if l == 0:
            continue
        total += _max_on_interval(lambda q: b * relative_entropy(p, 2 * l * q, order) - 0.5 * l * q * q, 0.0, b)
    return total


def _wishart_pair(bk, pk, bl, pl, lbar, order):
    def inner(qk):
        f = lambda ql: (
            bk * relative_entropy(pk, 2 * lbar * ql, order)
            + bl * relative_entropy(pl, 2 * lbar * qk, order)
            - lbar * qk * ql
        )
        res = optimize.minimize_scalar(f, bounds=(0.0, bl), method="bounded", options={"xatol": 1e-13})
        return float(min(res.fun, f(0.0), f(bl)))

    return _max_on_interval(inner, 0.0, bk, grid=401)


def limit_value_decoupled_wishart(spec, order=DEFAULT_ORDER):
    """Sum of independent spiked-Wishart limits; needs r = 0, anti-diagonal Lambda, even K."""
    K = spec.K
    lam = spec.lam
    anti = np.fliplr(np.eye(K, dtype=bool))
    if K % 2 or np.any(spec.r != 0) or np.any(lam[~anti] != 0):
        raise UsageError("decoupled Wishart form needs r = 0, even K and anti-diagonal Lambda")
    total = 0.0
    for k in range(K // 2):
        l = K - 1 - k
        lbar = 0.5 * (lam[k, l] + lam[l, k])
        if lbar == 0:
            continue
        total += _wishart_pair(spec.beta[k], spec.priors[k], spec.beta[l], spec.priors[l], lbar, order)
    return total


# ---------------------------------------------------------------------------
# weighted PCA for heteroskedastic PCA (Gaussian u and v)
# ---------------------------------------------------------------------------


@dataclass
class WpcaAnalysis:
    beta0: float
    betas: np.ndarray
    sigmas: np.ndarray
    q0: float
    above_threshold: bool
    q_ell: np.ndarray = field(default=None)

    @property
    def mse(self):
        """Asymptotic optimally-scaled MSE of u u^T."""
        return 1.0 - (self.q0 / self.beta0) ** 2


def _wpca_args(beta0, betas, sigmas):
    betas = np.atleast_1d(np.asarray(betas, dtype=np.float64))
    sigmas = np.atleast_1d(np.asarray(sigmas, dtype=np.float64))
    if betas.shape != sigmas.shape:
        raise UsageError("betas and sigmas must have equal length")
    if beta0 <= 0 or np.any(betas <= 0) or np.any(sigmas <= 0):
        raise DomainError("beta0, betas and sigmas must be positive")
    return float(beta0), betas, sigmas


def wpca_R(x, beta0, betas, sigmas):
    beta0, betas, sigmas = _wpca_args(beta0, betas, sigmas)
    s2 = sigmas**2
    return 1.0 - float(np.sum(betas * (beta0 - x) / (s2 * (s2 + x))))


def wpca_analyze(beta0, betas, sigmas):
    beta0, betas, sigmas = _wpca_args(beta0, betas, sigmas)
    above = float(np.sum(beta0 * betas / sigmas**4)) > 1.0
    q0 = 0.0
    if above:
        lo, hi = 0.0, beta0
        # R increases on (0, beta0) from R(0) < 0 to 1
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if wpca_R(mid, beta0, betas, sigmas) < 0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15 * beta0:
                break
        q0 = 0.5 * (lo + hi)
    q_ell = betas * q0 / (sigmas**2 + q0)
    return WpcaAnalysis(beta0, betas, sigmas, q0, above, q_ell)


def wpca_objective(x, beta0, betas, sigmas):
    """The univariate reduced objective F and its derivative at ``x``."""
    beta0, betas, sigmas = _wpca_args(beta0, betas, sigmas)
    if not 0 <= x < beta0:
        raise DomainError("x must satisfy 0 <= x < beta0")
    s2 = sigmas**2
    F = x - beta0 * math.log(beta0 / (beta0 - x)) + float(np.sum(betas * x / s2 - betas * np.log1p(x / s2)))
    Fp = -x / (beta0 - x) + float(np.sum(betas * x / (s2 * (s2 + x))))
    return F, Fp
