import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetspike.errors import ConfigError, DomainError, UsageError
from hetspike.priors import (
    Prior, gauss_hermite, posterior_mean, posterior_moments, posterior_variance,
    relative_entropy, relative_entropy_deriv,
)

from oracles import mixture_kl, tilted_moments

RAD = Prior.rademacher()
BERN = Prior.bernoulli(0.1)
FOUR = Prior.discrete([-2.0, -0.5, 0.3, 1.7], [0.1, 0.3, 0.4, 0.2], unnormalized=True)
GAUSS = Prior.gaussian()
ALL = [GAUSS, RAD, BERN, FOUR]
IDS = ["gaussian", "rademacher", "bernoulli", "four_atom"]


@st.composite
def discrete_priors(draw):
    k = draw(st.integers(2, 5))
    atoms = draw(st.lists(st.floats(-3, 3), min_size=k, max_size=k, unique=True))
    if len({round(a, 6) for a in atoms}) < k or max(abs(a) for a in atoms) < 0.1:
        atoms = [i - (k - 1) / 2 for i in range(k)]
    w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k)))
    return Prior.discrete(atoms, w / w.sum(), unnormalized=True)


# -- construction -----------------------------------------------------------


def test_bernoulli_atoms_are_standardised():
    assert BERN.atoms == pytest.approx((-1 / 3, 3.0), abs=1e-15)
    assert BERN.probs == pytest.approx((0.9, 0.1))
    assert BERN.mean == pytest.approx(0.0, abs=1e-15)
    assert BERN.fourth_moment == pytest.approx(0.9 / 81 + 0.1 * 81)


def test_fourth_moments():
    assert GAUSS.fourth_moment == 3.0
    assert RAD.fourth_moment == 1.0


@pytest.mark.parametrize("atoms, probs", [
    ([-1, 1], [0.5, 0.6]),
    ([-1, 1], [1.2, -0.2]),
    ([1, 1], [0.5, 0.5]),
    ([-2, 2], [0.5, 0.5]),
    ([-1, float("nan")], [0.5, 0.5]),
])
def test_invalid_discrete_rejected(atoms, probs):
    with pytest.raises((DomainError, UsageError)):
        Prior.discrete(atoms, probs)


def test_unnormalized_flag_rescales():
    p = Prior.discrete([-2, 2], [0.5, 0.5], unnormalized=True)
    assert p.atoms == (-1.0, 1.0)


def test_dict_round_trip():
    for p in ALL:
        assert Prior.from_dict(p.to_dict()) == p
    assert Prior.from_dict({"kind": "rademacher"}) == RAD
    assert Prior.from_dict({"kind": "bernoulli", "p": 0.1}) == BERN
    with pytest.raises(UsageError):
        Prior.from_dict({"kind": "laplace"})


def test_quadrature_rule():
    q = gauss_hermite()
    assert q.order == 201
    assert np.all(q.weights > 0)
    assert abs(q.weights.sum() - 1.0) < 1e-12
    assert abs(q.weights @ q.nodes**2 - 1.0) < 1e-12
    with pytest.raises(ConfigError):
        gauss_hermite(7)


def test_samples_have_prior_moments():
    rng = np.random.default_rng(3)
    x = BERN.sample(rng, 200_000)
    assert set(np.unique(x)) <= set(BERN.atoms)
    assert abs(x.mean()) < 0.02 and abs((x**2).mean() - 1) < 0.03


# -- relative entropy ---------------------------------------------------------


def test_gaussian_relative_entropy_values():
    assert relative_entropy(GAUSS, 0.0) == 0.0
    assert relative_entropy(GAUSS, 1.0) == pytest.approx(0.5 * (1 - math.log(2)), abs=1e-12)
    assert relative_entropy(GAUSS, 1.0) == pytest.approx(0.1534264, abs=1e-7)
    assert relative_entropy_deriv(GAUSS, 0.0) == 0.0
    assert relative_entropy_deriv(GAUSS, 1.0) == 0.25


@pytest.mark.parametrize("prior", [RAD, BERN, FOUR], ids=IDS[1:])
@pytest.mark.parametrize("gamma", [0.05, 0.5, 2.0, 8.0, 30.0])
def test_discrete_relative_entropy_matches_adaptive_quadrature(prior, gamma):
    ref = mixture_kl(prior.atoms, prior.probs, gamma)
    # a 61-point rule is only good to ~3e-7 on skewed priors; the default and finer rules close the gap
    assert relative_entropy(prior, gamma, order=61) == pytest.approx(ref, abs=1e-6)
    assert relative_entropy(prior, gamma) == pytest.approx(ref, abs=1e-8)
    assert relative_entropy(prior, gamma, order=301) == pytest.approx(ref, abs=1e-9)


def test_rademacher_relative_entropy_monte_carlo():
    rng = np.random.default_rng(20240601)
    g = 2.0
    x = rng.choice([-1.0, 1.0], size=1_000_000)
    y = math.sqrt(g) * x + rng.standard_normal(x.size)
    # log f(y)/phi(y) for the +-1 mixture
    vals = -0.5 * g + np.logaddexp(math.sqrt(g) * y, -math.sqrt(g) * y) - math.log(2)
    est, se = vals.mean(), vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(relative_entropy(RAD, g) - est) < 3 * se


def test_negative_gamma_rejected():
    for p in ALL:
        with pytest.raises(DomainError):
            relative_entropy(p, -0.1)
        with pytest.raises(DomainError):
            relative_entropy_deriv(p, -1e-9)


@pytest.mark.parametrize("prior", ALL, ids=IDS)
@pytest.mark.parametrize("gamma", [0.1, 0.5, 1.0, 2.0, 5.0])
def test_derivative_matches_finite_difference(prior, gamma):
    h = 1e-4
    fd = (relative_entropy(prior, gamma + h) - relative_entropy(prior, gamma - h)) / (2 * h)
    assert relative_entropy_deriv(prior, gamma) == pytest.approx(fd, abs=1e-6)


def test_rademacher_derivative_at_1_5():
    h = 1e-4
    fd = (relative_entropy(RAD, 1.5 + h) - relative_entropy(RAD, 1.5 - h)) / (2 * h)
    assert abs(relative_entropy_deriv(RAD, 1.5) - fd) < 1e-6


@pytest.mark.parametrize("prior", ALL, ids=IDS)
def test_entropy_is_zero_at_origin_nondecreasing_and_convex(prior):
    grid = np.linspace(0.0, 20.0, 401)
    d = np.array([relative_entropy(prior, g) for g in grid])
    dp = np.array([relative_entropy_deriv(prior, g) for g in grid])
    assert d[0] == 0.0
    assert np.all(np.diff(d) >= -1e-13)
    assert np.all(np.diff(dp) >= -1e-10)  # convex <=> D' nondecreasing
    assert np.all(d[:-2] + d[2:] - 2 * d[1:-1] >= -1e-11)
    assert np.all((dp >= 0) & (dp <= 0.5))


@settings(max_examples=40, deadline=None)
@given(prior=discrete_priors(), gamma=st.floats(0.05, 10.0))
def test_property_derivative_and_bounds(prior, gamma):
    h = 1e-4
    fd = (relative_entropy(prior, gamma + h) - relative_entropy(prior, gamma - h)) / (2 * h)
    d = relative_entropy_deriv(prior, gamma)
    assert abs(d - fd) < 1e-6
    assert 0.0 <= d <= 0.5
    assert relative_entropy(prior, gamma) >= 0.0


def test_quadrature_path_converges_to_gaussian_closed_form():
    """A fine discretisation of N(0,1), run through the discrete path."""
    errs = []
    for m in (3, 5, 9):
        nodes, weights = np.polynomial.hermite_e.hermegauss(m)
        p = Prior.discrete(nodes, weights / weights.sum(), unnormalized=True)
        errs.append(abs(relative_entropy(p, 1.0) - relative_entropy(GAUSS, 1.0)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-8


# -- posterior maps -----------------------------------------------------------


def test_posterior_examples():
    assert posterior_mean(GAUSS, 2.0, 1.0) == 1.0
    assert posterior_mean(RAD, 3.0, 7.0) == pytest.approx(math.tanh(3.0), abs=1e-15)
    assert posterior_mean(RAD, 3.0, 7.0) == pytest.approx(0.9950548, abs=1e-7)
    p = Prior.discrete([0.0, math.sqrt(10)], [0.9, 0.1], unnormalized=True)
    assert posterior_mean(p, 0.0, 0.0) == pytest.approx(float(np.dot(p.atoms, p.probs)), abs=1e-15)
    assert posterior_variance(GAUSS, 0.7, 0.0) == 1.0
    assert posterior_variance(RAD, 0.0, 5.0) == 1.0
    assert posterior_variance(RAD, 0.8, 0.0) == pytest.approx(1 - math.tanh(0.8) ** 2, abs=1e-15)


@pytest.mark.parametrize("prior", [RAD, BERN, FOUR], ids=IDS[1:])
def test_posterior_moments_match_direct_sum(prior):
    for a in (-3.0, -0.4, 0.0, 1.3, 4.0):
        for b in (0.0, 0.4, 2.0, 9.0):
            m, v = posterior_moments(prior, a, b)
            m0, v0 = tilted_moments(prior.atoms, prior.probs, a, b)
            assert m == pytest.approx(m0, abs=1e-12)
            assert v == pytest.approx(v0, abs=1e-12)


@pytest.mark.parametrize("prior", ALL, ids=IDS)
def test_variance_is_derivative_of_mean(prior):
    h = 1e-5
    for a in np.linspace(-3, 3, 7):
        for b in (0.0, 0.4, 1.0, 3.0):
            fd = (posterior_mean(prior, a + h, b) - posterior_mean(prior, a - h, b)) / (2 * h)
            v = posterior_variance(prior, a, b)
            assert v >= 0
            assert abs(v - fd) < 1e-6


@settings(max_examples=60, deadline=None)
@given(prior=discrete_priors(), a=st.floats(-5, 5), b=st.floats(0, 10))
def test_property_eta_prime_consistency(prior, a, b):
    h = 1e-5
    fd = (posterior_mean(prior, a + h, b) - posterior_mean(prior, a - h, b)) / (2 * h)
    v = posterior_variance(prior, a, b)
    assert v >= 0
    assert abs(v - fd) < 1e-6 * max(1.0, max(abs(x) for x in prior.atoms) ** 2)


def test_posterior_is_overflow_safe():
    m, v = posterior_moments(BERN, np.array([1e4, -1e4, 800.0]), np.array([0.0, 0.0, 1e3]))
    assert np.all(np.isfinite(m)) and np.all(np.isfinite(v))
    assert m[0] == pytest.approx(3.0) and m[1] == pytest.approx(-1 / 3)


def test_vectorised_shapes():
    a = np.linspace(-2, 2, 12).reshape(3, 4)
    for p in ALL:
        m, v = posterior_moments(p, a, 0.5)
        assert m.shape == v.shape == (3, 4)


def test_nonfinite_tilt_rejected():
    with pytest.raises(DomainError):
        posterior_mean(RAD, float("inf"), 0.0)
    with pytest.raises(DomainError):
        posterior_variance(GAUSS, 0.0, float("nan"))
