"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Both paths are imported directly, so ``HETSPIKE_DISABLE_NUMBA`` does not
matter here.  The first numba call (compilation) is excluded from timings.
"""
import argparse
import time

import numpy as np

from hetspike import kernels
from hetspike.priors import Prior, gauss_hermite


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    prior = Prior.bernoulli(0.1)
    atoms, logp = np.asarray(prior._a), np.asarray(prior._logp)
    a = rng.standard_normal(1 << 20)
    b = rng.uniform(0.0, 5.0, a.size)
    yield "posterior_moments (1M entries, 2 atoms)", (
        lambda: kernels.posterior_moments_numpy(a, b, atoms, logp),
        lambda: kernels.posterior_moments_numba(a, b, atoms, logp),
    )

    quad = gauss_hermite(61)
    w = rng.uniform(0.1, 1.0, 4)
    four = Prior.discrete(rng.normal(size=4), w / w.sum(), unnormalized=True)
    sg = np.sqrt(np.linspace(0.0, 20.0, 2000))
    args = (np.asarray(four._a), np.asarray(four.probs), np.asarray(four._logp), quad.nodes, quad.weights)
    yield "gh_entropy_terms (2000 SNRs, 4 atoms, order 61)", (
        lambda: np.array([kernels.gh_entropy_terms_numpy(x, *args) for x in sg]).T,
        lambda: np.array([kernels.gh_entropy_terms_numba(x, *args) for x in sg]).T,
    )

    n = 16
    counts = np.full(n, 2, dtype=np.int64)
    table = np.tile([-1.0, 1.0], (n, 1))
    lp = np.full((n, 2), np.log(0.5))
    Y = rng.standard_normal((n, n))
    C, Q = np.sqrt(2.0 / n) * Y, np.full((n, n), 2.0 / n)
    h, s = np.zeros(n), np.zeros(n)
    yield "enumerate_posterior (2^16 states)", (
        lambda: kernels.enumerate_posterior_numpy(table, lp, counts, C, Q, h, s),
        lambda: kernels.enumerate_posterior_numba(table, lp, counts, C, Q, h, s),
    )


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<52}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}{'max |diff|':>13}")
    for name, (f_np, f_nb) in cases(rng):
        ref, got = f_np(), f_nb()  # also warms up the JIT
        diff = max(float(np.max(np.abs(np.asarray(x) - np.asarray(y)))) for x, y in zip(ref, got))
        t_np, t_nb = best_of(f_np, args.repeat), best_of(f_nb, args.repeat)
        print(f"{name:<52}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}{diff:>13.2e}")


if __name__ == "__main__":
    main()
