"""Independent reference computations used only by the tests.

None of these share code with the package: they use adaptive quadrature,
brute-force sums or closed forms, so agreement is a real cross-check.
"""
import math

import numpy as np
from scipy import integrate, optimize


def mixture_kl(atoms, probs, gamma):
    """D(P_{sqrt(g) x + w} || P_w) by adaptive quadrature on the density ratio."""
    atoms = np.asarray(atoms, dtype=float)
    probs = np.asarray(probs, dtype=float)
    s = math.sqrt(gamma)

    def log_ratio(y):
        # log f(y)/phi(y) = log sum_i p_i exp(s a_i y - g a_i^2 / 2)
        z = s * atoms * y - 0.5 * gamma * atoms**2
        m = z.max()
        return m + math.log(np.sum(probs * np.exp(z - m)))

    total = 0.0
    for a, p in zip(atoms, probs):
        if p == 0:
            continue
        c = s * a
        f = lambda w: math.exp(-0.5 * w * w) / math.sqrt(2 * math.pi) * log_ratio(c + w)  # noqa: E731
        val, _ = integrate.quad(f, -12, 12, epsabs=1e-13, epsrel=1e-12, limit=200)
        total += p * val
    return total


def tilted_moments(atoms, probs, a, b):
    """Mean and variance of exp(a x - b x^2 / 2) dP by a plain finite sum."""
    atoms = np.asarray(atoms, dtype=float)
    w = np.asarray(probs, dtype=float) * np.exp(a * atoms - 0.5 * b * atoms**2)
    w = w / w.sum()
    m = float(w @ atoms)
    return m, float(w @ atoms**2) - m * m


def wigner_limit(prior_kl, lam_eff):
    """sup_{0<=m<=1} D(lam m) - lam m^2 / 4 for the unit-size spiked Wigner model."""
    res = optimize.minimize_scalar(lambda m: -(prior_kl(lam_eff * m) - 0.25 * lam_eff * m * m),
                                   bounds=(0, 1), method="bounded", options={"xatol": 1e-12})
    return max(0.0, -res.fun)


def gaussian_kl(g):
    return 0.5 * (g - math.log1p(g))


def gaussian_two_group_mmse(lam):
    """Diagonal-block MMSE of the Gaussian two-group model with equal halves.

    Every alpha gives the same effective Wigner SNR lam, whose overlap solves
    m = lam m / (1 + lam m), i.e. m = 1 - 1/lam above threshold.
    """
    m = max(0.0, 1.0 - 1.0 / lam)
    return 1.0 - m * m
