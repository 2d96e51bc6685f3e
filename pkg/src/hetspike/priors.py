"""Scalar-channel functionals of a group's source distribution.

For a prior P and the Gaussian channel ``y = sqrt(gamma) x + w`` this module
provides the relative entropy ``D(gamma) = KL(P_y || N(0, 1))``, its
derivative, and the tilted posterior mean/variance used as AMP denoisers.
"""
from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np

from . import kernels
from .errors import ConfigError, DomainError, UsageError

DEFAULT_ORDER = 201
MIN_ORDER = 8


@dataclass(frozen=True)
class Quadrature:
    """Gauss-Hermite rule integrating against the standard normal density."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int


@lru_cache(maxsize=32)
def gauss_hermite(order=DEFAULT_ORDER):
    if order < MIN_ORDER:
        raise ConfigError(f"quadrature order must be >= {MIN_ORDER}, got {order}", "order")
    nodes, weights = np.polynomial.hermite_e.hermegauss(order)
    weights = weights / math.sqrt(2.0 * math.pi)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return Quadrature(nodes, weights, order)


@dataclass(frozen=True, eq=False)
class Prior:
    """Unit-variance Gaussian or finite discrete prior.

    Build with :meth:`gaussian`, :meth:`discrete`, :meth:`rademacher` or
    :meth:`bernoulli`; instances are immutable.
    """

    kind: str
    atoms: tuple = ()
    probs: tuple = ()
    fourth_moment: float = field(default=3.0, init=False)

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.atoms or self.probs:
                raise UsageError("gaussian prior takes no atoms")
            return
        if self.kind != "discrete":
            raise UsageError(f"unknown prior kind {self.kind!r}")
        a = np.asarray(self.atoms, dtype=np.float64)
        p = np.asarray(self.probs, dtype=np.float64)
        if a.ndim != 1 or a.shape != p.shape or a.size == 0:
            raise UsageError("atoms and probs must be nonempty 1-d sequences of equal length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(p))):
            raise DomainError("atoms and probs must be finite")
        if np.any(p < 0):
            raise DomainError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise DomainError(f"probabilities sum to {p.sum()!r}, not 1")
        if np.unique(a).size != a.size:
            raise DomainError("atoms must be distinct")
        m2 = float(p @ a**2)
        if abs(m2 - 1.0) > 1e-9:
            raise DomainError(f"second moment is {m2}, expected 1 (pass unnormalized=True to rescale)")
        a.setflags(write=False)
        keep = p > 0
        logp = np.full_like(p, -np.inf)
        logp[keep] = np.log(p[keep])
        logp.setflags(write=False)
        object.__setattr__(self, "_a", a)
        object.__setattr__(self, "_p", p)
        object.__setattr__(self, "_logp", logp)
        object.__setattr__(self, "fourth_moment", float(p @ a**4))

    # -- constructors -----------------------------------------------------

    @classmethod
    def gaussian(cls):
        return cls("gaussian")

    @classmethod
    def discrete(cls, atoms, probs, unnormalized=False):
        a = np.asarray(atoms, dtype=np.float64)
        p = np.asarray(probs, dtype=np.float64)
        if unnormalized:
            m2 = float(p @ a**2)
            if not m2 > 0:
                raise DomainError("cannot rescale a prior with zero second moment")
            a = a / math.sqrt(m2)
        return cls("discrete", tuple(a.tolist()), tuple(p.tolist()))

    @classmethod
    def rademacher(cls):
        return cls.discrete([-1.0, 1.0], [0.5, 0.5])

    @classmethod
    def bernoulli(cls, p):
        """Bernoulli(p) shifted and scaled to mean zero, variance one."""
        if not 0 < p < 1:
            raise DomainError("p must lie in (0, 1)")
        sd = math.sqrt(p * (1 - p))
        return cls.discrete([(0 - p) / sd, (1 - p) / sd], [1 - p, p])

    @classmethod
    def from_dict(cls, doc):
        kind = doc.get("kind")
        if kind == "gaussian":
            return cls.gaussian()
        if kind == "discrete":
            return cls.discrete(doc["atoms"], doc["probs"], unnormalized=doc.get("unnormalized", False))
        if kind == "rademacher":
            return cls.rademacher()
        if kind == "bernoulli":
            return cls.bernoulli(float(doc["p"]))
        raise UsageError(f"unknown prior kind {kind!r}")

    def to_dict(self):
        if self.kind == "gaussian":
            return {"kind": "gaussian"}
        return {"kind": "discrete", "atoms": list(self.atoms), "probs": list(self.probs)}

    # -- basic facts ------------------------------------------------------

    @property
    def is_gaussian(self):
        return self.kind == "gaussian"

    @property
    def mean(self):
        return 0.0 if self.is_gaussian else float(self._p @ self._a)

    @property
    def variance(self):
        return 1.0 - self.mean**2

    @property
    def entropy(self):
        """Shannon entropy in nats (infinite for the Gaussian)."""
        if self.is_gaussian:
            return math.inf
        p = self._p[self._p > 0]
        return float(-(p * np.log(p)).sum())

    def sample(self, rng, size):
        if self.is_gaussian:
            return rng.standard_normal(size)
        idx = rng.choice(self._a.size, size=size, p=self._p)
        return self._a[idx]

    def __eq__(self, other):
        return isinstance(other, Prior) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self.kind, self.atoms, self.probs))

    def __repr__(self):
        if self.is_gaussian:
            return "Prior.gaussian()"
        return f"Prior.discrete(atoms={list(self.atoms)}, probs={list(self.probs)})"


def _check_gamma(gamma):
    g = float(gamma)
    if not math.isfinite(g) or g < 0:
        raise DomainError(f"gamma must be finite and >= 0, got {gamma!r}")
    return g


def relative_entropy(prior, gamma, order=DEFAULT_ORDER):
    """KL divergence between the output of ``sqrt(gamma) x + w`` and ``w``."""
    g = _check_gamma(gamma)
    quad = gauss_hermite(order)
    if g == 0.0:
        return 0.0
    if prior.is_gaussian:
        return 0.5 * (g - math.log1p(g))
    d, _ = kernels.gh_entropy_terms(math.sqrt(g), prior._a, prior._p, prior._logp, quad.nodes, quad.weights)
    return max(d, 0.0)


def relative_entropy_deriv(prior, gamma, order=DEFAULT_ORDER):
    """d/dgamma of :func:`relative_entropy`, i.e. ``E[E[x|y]^2] / 2``."""
    g = _check_gamma(gamma)
    quad = gauss_hermite(order)
    if prior.is_gaussian:
        return 0.5 * g / (1.0 + g)
    if g == 0.0:
        return 0.5 * prior.mean**2
    _, dp = kernels.gh_entropy_terms(math.sqrt(g), prior._a, prior._p, prior._logp, quad.nodes, quad.weights)
    return min(max(dp, 0.0), 0.5)


def _check_tilt(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DomainError("posterior arguments must be finite")
    return a, b


def posterior_moments(prior, a, b):
    """Mean and variance of the tilted measure ``exp(a x - b x^2/2) dP(x)``.

    Vectorised over broadcastable ``a`` and ``b``.  For the Gaussian prior
    the tilt must satisfy ``b > -1``.
    """
    a, b = _check_tilt(a, b)
    if prior.is_gaussian:
        if np.any(b <= -1.0):
            raise DomainError("gaussian tilt requires b > -1")
        var = 1.0 / (1.0 + b)
        mean = a * var
        return mean, np.broadcast_to(var, mean.shape).copy() if mean.ndim else var
    mean, var = kernels.posterior_moments(a, b, prior._a, prior._logp)
    if mean.ndim == 0:
        return float(mean), float(var)
    return mean, var


def posterior_mean(prior, a, b):
    return posterior_moments(prior, a, b)[0]


def posterior_variance(prior, a, b):
    """Derivative of :func:`posterior_mean` in ``a``: the tilted variance."""
    return posterior_moments(prior, a, b)[1]
