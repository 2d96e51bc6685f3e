import math

import numpy as np
import pytest

from hetspike.algorithms import (
    SCALE_FREE, EstimateSet, GdConfig, amp_general, amp_groupwise, gradient_descent, joint_pca,
    leading_eigvec, power_iteration, relaxed_bp, weight_grid, weight_grid_search, weighted_pca,
)
from hetspike.algorithms.amp import initial_means
from hetspike.algorithms.spectral import componentwise_pca
from hetspike.errors import (
    ConvergenceError, DegenerateInputError, DivergenceError, NumericError, ResourceError, UsageError,
)
from hetspike.limits import ProblemSpec
from hetspike.model import InstanceSpec, SymObservations, make_hetero_pca, make_two_group, sample_instance, symmetrize
from hetspike.priors import Prior

G = Prior.gaussian()
R = Prior.rademacher()
B = Prior.bernoulli(0.1)


def sym_instance(spec, N, seed):
    obs = sample_instance(InstanceSpec(spec, N, seed=seed))
    return obs, symmetrize(obs, spec)


def diag_mse(x, xhat):
    n = x.size
    return float(np.sum((np.outer(x, x) - np.outer(xhat, xhat)) ** 2)) / n**2


def noiseless(spec, x):
    """SymObservations holding the exact rank-one signal and no noise."""
    N = sum(v.size for v in x)
    ls = spec.lam + spec.lam.T
    blocks = {(k, l): math.sqrt(ls[k, l] / N) * np.outer(x[k], x[l])
              for k in range(spec.K) for l in range(k, spec.K)}
    return SymObservations(blocks, ls, N, [None] * spec.K, np.zeros(spec.K))


def per_entry_inputs(sym):
    """y~ and lambda~ with zero diagonal from groupwise symmetrised data."""
    n = np.asarray(sym.n)
    LS = np.repeat(np.repeat(sym.lambda_sym, n, 0), n, 1)
    Y = sym.dense()
    Yt = np.sqrt(LS) * Y
    np.fill_diagonal(Yt, 0.0)
    np.fill_diagonal(LS, 0.0)
    return Yt, LS, np.repeat(np.arange(sym.K), n)


# -- eigensolvers ----------------------------------------------------------------


def test_power_iteration_diagonal():
    v, lam = power_iteration(np.diag([3.0, 1.0]))
    assert lam == pytest.approx(3.0, abs=1e-10)
    assert abs(abs(v[0]) - 1) < 1e-10


def test_power_iteration_picks_largest_algebraic():
    v, lam = power_iteration(np.diag([1.0, -5.0, 0.5]))
    assert lam == pytest.approx(1.0, abs=1e-9)


def test_power_iteration_matches_dense_oracle():
    rng = np.random.default_rng(2)
    M = rng.standard_normal((50, 50))
    A = (M + M.T) / 2
    v, lam = power_iteration(A, tol=1e-10, max_iter=10**7)
    w, V = np.linalg.eigh(A)
    assert lam == pytest.approx(w[-1], abs=1e-9)
    assert np.linalg.norm(A @ v - lam * v) <= 1e-10
    assert abs(abs(v @ V[:, -1]) - 1) < 1e-6


def test_power_iteration_rank_one_plus_noise():
    rng = np.random.default_rng(3)
    u = rng.standard_normal(40)
    u /= np.linalg.norm(u)
    corr = []
    for eps in (0.3, 0.03, 0.003):
        E = rng.standard_normal((40, 40)) * eps
        v, _ = power_iteration(np.outer(u, u) * 5 + (E + E.T) / 2)
        corr.append(abs(v @ u))
    assert corr[0] < corr[1] < corr[2] and corr[2] > 1 - 1e-5


def test_power_iteration_errors():
    with pytest.raises(UsageError):
        power_iteration(lambda v: v, dim=3)
    with pytest.raises(UsageError):
        power_iteration(np.ones((2, 3)))
    A = np.diag([1.0, 0.999999])
    with pytest.raises(ConvergenceError) as ei:
        power_iteration(A, max_iter=3)
    assert ei.value.residual > 0


def test_power_iteration_operator_input():
    A = np.diag([2.0, 4.0, -1.0])
    v, lam = power_iteration(lambda x: A @ x, dim=3, shift=4.0)
    assert lam == pytest.approx(4.0, abs=1e-9)


@pytest.mark.parametrize("method", ["dense", "power", "lanczos"])
def test_leading_eigvec_methods_agree(method):
    rng = np.random.default_rng(4)
    M = rng.standard_normal((60, 60))
    A = (M + M.T) / 2 + 8 * np.outer(np.ones(60), np.ones(60)) / 60
    v, lam = leading_eigvec(A, method=method)
    w = np.linalg.eigvalsh(A)
    assert lam == pytest.approx(w[-1], abs=1e-8)
    with pytest.raises(UsageError):
        leading_eigvec(A, method="qr")


# -- spectral estimators ---------------------------------------------------------------


def test_joint_pca_all_ones_is_plain_pca():
    s = make_two_group(0.5, 2.0)
    _, sym = sym_instance(s, 64, 1)
    est = joint_pca(sym)
    assert est.scale == SCALE_FREE
    w, V = np.linalg.eigh(sym.dense())
    assert abs(abs(est.stacked @ V[:, -1]) - 1) < 1e-8


def test_joint_pca_zeroes_unused_blocks():
    s = make_two_group(1.0, 2.0)
    _, sym = sym_instance(s, 64, 2)
    Y = sym.dense()
    Y[:32, :32] = 0
    Y[32:, 32:] = 0
    v = np.linalg.eigh(Y)[1][:, -1]
    assert abs(abs(joint_pca(sym).stacked @ v) - 1) < 1e-8


def test_joint_pca_degenerate():
    s = ProblemSpec([0.5, 0.5], (G, G), np.zeros((2, 2)))
    _, sym = sym_instance(s, 16, 0)
    with pytest.raises(DegenerateInputError):
        joint_pca(sym)


def test_joint_pca_null_is_uncorrelated():
    s = ProblemSpec([0.5, 0.5], (G, G), np.ones((2, 2)) * 1e-12)
    n = 200
    c2 = []
    for seed in range(20):
        obs, sym = sym_instance(s, n, seed)
        x = np.concatenate(obs.truth)
        v = joint_pca(sym).stacked
        c2.append((x @ v) ** 2 / (x @ x))
    assert np.mean(c2) <= 5 / n


def test_spectral_sign_flip_invariance():
    s = make_two_group(0.3, 3.0, R)
    obs, sym = sym_instance(s, 80, 5)
    flipped = noiseless(s, [-x for x in obs.truth])
    plain = noiseless(s, obs.truth)
    a, b = joint_pca(plain).stacked, joint_pca(flipped).stacked
    assert abs(abs(a @ b) - 1) < 1e-10
    a, b = weighted_pca(plain, [0.5, 0.5], 0), weighted_pca(flipped, [0.5, 0.5], 0)
    assert abs(abs(a @ b) - 1) < 1e-10


def test_componentwise_pca_covers_each_component():
    s = make_two_group(0.0, 3.0)
    _, sym = sym_instance(s, 100, 6)
    parts = componentwise_pca(sym)
    assert all(np.linalg.norm(p) == pytest.approx(math.sqrt(50)) for p in parts)
    s = ProblemSpec([0.5, 0.5], (G, G), np.array([[2.0, 0.0], [0.0, 0.0]]))
    _, sym = sym_instance(s, 100, 6)
    parts = componentwise_pca(sym)
    assert np.all(parts[1] == 0) and np.linalg.norm(parts[0]) > 0


def test_weighted_pca_reduces_to_block_pca():
    s = make_two_group(0.3, 2.0)
    _, sym = sym_instance(s, 60, 7)
    v = weighted_pca(sym, [1.0, 0.0], 0)
    ref = np.linalg.eigh(sym.block(0, 0))[1][:, -1]
    assert abs(abs(v @ ref) - 1) < 1e-8
    v = weighted_pca(sym, [0.0, 1.0], 0)
    B01 = sym.block(0, 1)
    ref = np.linalg.eigh(B01 @ B01.T)[1][:, -1]
    assert abs(abs(v @ ref) - 1) < 1e-8


def test_weighted_pca_errors():
    _, sym = sym_instance(make_two_group(0.3, 2.0), 20, 0)
    with pytest.raises(UsageError):
        weighted_pca(sym, [0.0, 0.0], 0)
    with pytest.raises(UsageError):
        weighted_pca(sym, [1.0], 0)
    with pytest.raises(UsageError):
        weighted_pca(sym, [1.0, -1.0], 0)


@pytest.mark.slow
def test_weighted_pca_hetero_pca_overlap():
    # above threshold with beta0 = beta1 = 1, sigma^2 = 1/2: q0/beta0 = 0.5
    s = make_hetero_pca(1.0, [1.0], [math.sqrt(0.5)])
    obs, sym = sym_instance(s, 4096, 8)
    u = obs.truth[0]
    v = weighted_pca(sym, [0.0, 1.0], 0)
    c2 = (u @ v) ** 2 / (u @ u)
    assert c2 == pytest.approx(0.5, abs=0.05)


def test_weight_grid_shape():
    grid = weight_grid(2, (100, 100), resolution=5)
    assert len(grid) == 2 and len(grid[0]) == 5
    assert np.allclose(grid[0][-1], [1.0, 0.0])
    assert np.allclose(grid[0][0], [0.0, 0.1])
    assert len(weight_grid(3, (9, 9, 9), 1)[0]) == 1
    with pytest.raises(UsageError):
        weight_grid(2, (4, 4), 0)


def test_weight_grid_search_single_candidate_and_empty():
    obs, sym = sym_instance(make_two_group(0.3, 2.0), 40, 9)
    w, est = weight_grid_search(sym, obs.truth, [[np.array([0.2, 0.1])], [np.array([0.1, 0.4])]])
    assert np.allclose(w[0], [0.2, 0.1]) and np.allclose(w[1], [0.1, 0.4])
    assert est.scale == SCALE_FREE
    with pytest.raises(UsageError):
        weight_grid_search(sym, obs.truth, [[], [np.ones(2)]])


@pytest.mark.parametrize("alpha, own", [(0.0, True), (1.0, False)])
def test_weight_grid_search_prefers_informative_blocks(alpha, own):
    s = make_two_group(alpha, 4.0)
    obs, sym = sym_instance(s, 600, 10)
    grid = weight_grid(2, sym.n, resolution=9)
    w, _ = weight_grid_search(sym, obs.truth, grid)
    for k in range(2):
        wk = w[k] * np.where(np.arange(2) == k, 1.0, math.sqrt(sym.n[k]))
        share = wk[k] / wk.sum()
        assert (share >= 0.75) if own else (share <= 0.25)


# -- gradient descent -------------------------------------------------------------


def test_gd_zero_step_returns_init():
    _, sym = sym_instance(make_two_group(0.3, 2.0), 40, 11)
    init = [np.ones(20), -np.ones(20)]
    est = gradient_descent(sym, None, GdConfig(gamma=0.0, init="given", steps=10), init=init)
    np.testing.assert_array_equal(est.stacked, np.concatenate(init))


def test_gd_zero_is_fixed_point():
    _, sym = sym_instance(make_two_group(0.3, 2.0), 40, 12)
    est = gradient_descent(sym, None, GdConfig(init="given", steps=50), init=[np.zeros(20)] * 2)
    assert np.all(est.stacked == 0)


def test_gd_noiseless_truth_is_fixed_point():
    s = make_two_group(0.3, 2.0, R)
    obs, _ = sym_instance(s, 60, 13)
    sym = noiseless(s, obs.truth)
    est = gradient_descent(sym, s, GdConfig(init="given", steps=20, tol=0), init=obs.truth)
    assert np.max(np.abs(est.stacked - np.concatenate(obs.truth))) < 1e-10


def test_gd_halves_then_gives_up():
    _, sym = sym_instance(make_two_group(0.3, 2.0), 40, 14)
    init = [np.ones(20) * 5, np.ones(20) * 5]
    est = gradient_descent(sym, None, GdConfig(gamma=2.0, init="given", steps=200), init=init)
    assert est.info["gamma"] < 2.0
    with pytest.raises(DivergenceError, match="smaller gamma"):
        gradient_descent(sym, None, GdConfig(gamma=50.0, init="given", max_halvings=0), init=init)


def test_gd_config_validation():
    with pytest.raises(UsageError):
        GdConfig(schedule="cosine")
    with pytest.raises(UsageError):
        GdConfig(init="random")
    with pytest.raises(UsageError):
        GdConfig(gamma=-1.0)
    _, sym = sym_instance(make_two_group(0.3, 2.0), 40, 0)
    with pytest.raises(UsageError):
        gradient_descent(sym, None, GdConfig(init="given"))


def test_gd_decay_schedule_runs():
    s = make_two_group(0.3, 3.0)
    obs, sym = sym_instance(s, 400, 15)
    est = gradient_descent(sym, s, GdConfig(schedule="decay", gamma=0.5, steps=300))
    u = obs.truth[0]
    assert (u @ est.xhat[0]) ** 2 / (u @ u) / (est.xhat[0] @ est.xhat[0]) > 0.3


# -- AMP ------------------------------------------------------------------------


def test_amp_without_signal_stays_at_prior():
    s = ProblemSpec([0.5, 0.5], (R, B), np.zeros((2, 2)))
    _, sym = sym_instance(s, 100, 16)
    est, traj = amp_groupwise(sym, s, T=20)
    assert np.max(np.abs(est.stacked)) < 1e-12
    np.testing.assert_allclose(np.concatenate(est.info["v"]), 1.0, atol=1e-12)


def test_amp_initial_means_scale():
    m = initial_means(200_000, 0)
    assert np.std(m) == pytest.approx(1e-3, rel=0.01)
    np.testing.assert_array_equal(m, initial_means(200_000, 0))


@pytest.mark.parametrize("prior", [R, G], ids=["rademacher", "gaussian"])
def test_amp_variances_stay_below_prior_variance(prior):
    s = make_two_group(0.3, 2.0, prior)
    _, sym = sym_instance(s, 400, 17)
    _, traj = amp_groupwise(sym, s, T=40, trace=True)
    for st in traj:
        for v in st.v:
            assert np.all(v >= 0) and np.all(v <= 1 + 1e-9)


def test_amp_variances_skewed_prior_range_bound():
    # a tilted skewed prior can be more spread than the prior itself; the
    # posterior variance is only bounded by (max atom - min atom)^2 / 4
    s = make_two_group(0.3, 2.0, B)
    _, sym = sym_instance(s, 400, 17)
    _, traj = amp_groupwise(sym, s, T=40, trace=True)
    bound = (max(B.atoms) - min(B.atoms)) ** 2 / 4
    vmax = max(float(v.max()) for st in traj for v in st.v)
    assert all(np.all(v >= 0) for st in traj for v in st.v)
    assert 1.0 < vmax <= bound


@pytest.mark.parametrize("prior, target", [(G, 0.75), (R, 0.6175)])
def test_amp_two_group_near_limit(prior, target):
    s = make_two_group(0.3, 2.0, prior)
    mses = []
    for seed in range(3):
        obs, sym = sym_instance(s, 1200, seed)
        est, _ = amp_groupwise(sym, s, seed=seed)
        mses.append(diag_mse(obs.truth[0], est.xhat[0]))
    assert np.mean(mses) == pytest.approx(target, abs=0.05)


def test_amp_nonfinite_raises():
    s = make_two_group(0.3, 2.0, R)
    _, sym = sym_instance(s, 40, 18)
    m0 = np.full(40, np.nan)
    with pytest.raises(NumericError, match="iteration 0"):
        amp_groupwise(sym, s, m0=m0)


def test_amp_usage_errors():
    s = make_two_group(0.3, 2.0, R)
    _, sym = sym_instance(s, 40, 0)
    with pytest.raises(UsageError):
        amp_groupwise(sym, s, damping=1.0)
    with pytest.raises(UsageError):
        amp_groupwise(sym, make_hetero_pca(1.0, [1.0, 1.0], [1.0, 1.0]))
    with pytest.raises(UsageError):
        amp_general(np.eye(3), np.zeros((3, 3)), 3, [R], [0, 0, 0])
    with pytest.raises(UsageError):
        amp_general(np.zeros((3, 3)), np.zeros((3, 3)), 3, [R], [0, 0])


def test_amp_general_with_no_signal_keeps_prior_mean():
    m, v, _ = amp_general(np.zeros((6, 6)), np.zeros((6, 6)), 6, [B], [0] * 6, T=5)
    np.testing.assert_allclose(m, 0.0, atol=1e-15)
    np.testing.assert_allclose(v, 1.0, atol=1e-12)


@pytest.mark.parametrize("prior", [R, B, G], ids=["rademacher", "bernoulli", "gaussian"])
def test_amp_general_equals_groupwise_without_diagonal_signal(prior):
    s = make_two_group(1.0, 2.0, prior)
    _, sym = sym_instance(s, 300, 19)
    est, _ = amp_groupwise(sym, s, T=30, tol=0, zero_diagonal=True)
    Yt, Lt, g = per_entry_inputs(sym)
    m, _, _ = amp_general(Yt, Lt, sym.N, [prior, prior], g, T=30, tol=0)
    np.testing.assert_allclose(m, est.stacked, atol=1e-10)


def test_amp_general_self_term_gap_shrinks_with_n():
    # with signal on the diagonal blocks the groupwise b keeps the i = j term;
    # the gap is O(1/N) per coordinate and must shrink accordingly
    s = make_two_group(0.3, 2.0, B)
    gaps = []
    for N in (200, 800):
        _, sym = sym_instance(s, N, 1)
        est, _ = amp_groupwise(sym, s, T=30, tol=0, zero_diagonal=True)
        Yt, Lt, g = per_entry_inputs(sym)
        m, _, _ = amp_general(Yt, Lt, sym.N, [B, B], g, T=30, tol=0)
        gaps.append(float(np.sqrt(np.mean((m - est.stacked) ** 2))))
    assert gaps[1] < 0.5 * gaps[0]
    assert gaps[1] < 0.02


# -- relaxed BP ---------------------------------------------------------------------


def test_bp_without_signal_returns_priors():
    out = relaxed_bp(np.zeros((5, 5)), np.zeros((5, 5)), 5, [B], [0] * 5)
    np.testing.assert_allclose(out["mean"], 0.0, atol=1e-15)
    np.testing.assert_allclose(out["var"], 1.0, atol=1e-12)
    np.testing.assert_allclose(out["msg_m"][~np.eye(5, dtype=bool)], 0.0, atol=1e-15)


def test_bp_resource_limit():
    with pytest.raises(ResourceError):
        relaxed_bp(np.zeros((65, 65)), np.zeros((65, 65)), 65, [R], [0] * 65)


def test_bp_single_edge_matches_exact_posterior():
    # the relaxed messages are exact to second order in y~/sqrt(N)
    a = np.array(B.atoms)
    p = np.array(B.probs)
    yt, lt = 1.0, 2.0
    errs = []
    for N in (100, 1000, 10000):
        out = relaxed_bp(np.array([[0, yt], [yt, 0]]), np.array([[0, lt], [lt, 0]]), N, [B], [0, 0])
        xx = a[:, None] * a[None, :]
        W = p[:, None] * p[None, :] * np.exp(yt * xx / math.sqrt(N) - lt * xx**2 / (2 * N))
        exact = (W.sum(1) @ a) / W.sum()
        errs.append(abs(out["mean"][0] - exact))
        assert errs[-1] <= 25 * N**-1.5
        assert abs(exact) > 0.5 / N  # the check is not vacuous
    assert errs[0] > errs[1] > errs[2]


def _small_instance(n, seed, prior=R, lam=(3.0, 1.5)):
    rng = np.random.default_rng(seed)
    g = np.repeat([0, 1], n // 2)
    x = prior.sample(rng, n)
    L = np.where(g[:, None] == g[None, :], lam[0], lam[1])
    Y = np.sqrt(L / n) * np.outer(x, x) + rng.standard_normal((n, n))
    Yt = np.sqrt(L) * Y + np.sqrt(L.T) * Y.T
    Lt = 2 * L
    np.fill_diagonal(Yt, 0.0)
    np.fill_diagonal(Lt, 0.0)
    return Yt, Lt, g


def _bp_amp_gap(n, seed):
    Yt, Lt, g = _small_instance(n, seed)
    m0 = initial_means(n, seed)
    bp = relaxed_bp(Yt, Lt, n, [R, R], g, T=30, m0=m0)["mean"]
    m, _, _ = amp_general(Yt, Lt, n, [R, R], g, T=30, m0=m0)
    return min(np.sqrt(np.mean((bp - m) ** 2)), np.sqrt(np.mean((bp + m) ** 2)))


def test_bp_and_amp_agree_at_n64():
    gaps = [_bp_amp_gap(64, seed) for seed in range(8)]
    assert max(gaps) < 0.05


def test_bp_and_amp_typically_agree_at_n16():
    gaps = [_bp_amp_gap(16, seed) for seed in range(8)]
    assert np.median(gaps) < 0.05


def test_estimate_set_tag_checked():
    with pytest.raises(ValueError):
        EstimateSet([np.zeros(2)], "mystery")
