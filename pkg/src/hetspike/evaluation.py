"""Monte Carlo harness, MSE metrics and the exhaustive posterior oracle."""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import itertools
import math
import os
import time

import numpy as np

from . import __version__, kernels
from .algorithms import POSTERIOR_MEAN, SCALE_FREE, GdConfig, amp_groupwise, gradient_descent, joint_pca
from .algorithms.spectral import weight_grid, weight_grid_search
from .errors import (
    DegenerateInputError,
    ExperimentAborted,
    HetspikeError,
    ResourceError,
    UsageError,
)
from .limits import ProblemSpec, SolverOptions, mmse_from_saddle, solve_limit
from .model import (
    InstanceSpec,
    make_csbm,
    make_hetero_pca,
    make_three_group,
    make_two_group,
    derive_seed,
    sample_instance,
    support_label,
    symmetrize,
)
from .priors import Prior

# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def diag_mse_direct(u, uhat):
    """``|u u^T - uh uh^T|_F^2 / n^2`` without forming either outer product."""
    u = np.asarray(u, dtype=np.float64)
    uhat = np.asarray(uhat, dtype=np.float64)
    n = u.size
    uu, hh, uh = float(u @ u), float(uhat @ uhat), float(u @ uhat)
    return max((uu * uu + hh * hh - 2.0 * uh * uh) / n**2, 0.0)


def scaled_terms(u, uhat):
    """Per-trial pieces ``(|u|^4 / n^2, (u'uh)^2 / (n |uh|^2))`` of the scaled MSE."""
    u = np.asarray(u, dtype=np.float64)
    uhat = np.asarray(uhat, dtype=np.float64)
    n = u.size
    hh = float(uhat @ uhat)
    if not hh > 0:
        raise DegenerateInputError("scale-free estimate is identically zero")
    uu = float(u @ u)
    return uu * uu / n**2, float(u @ uhat) ** 2 / (n * hh)


def combine_scaled(first, second):
    """``mean(first) - mean(second)^2`` with a delta-method standard error."""
    a = np.asarray(first, dtype=np.float64)
    b = np.asarray(second, dtype=np.float64)
    T = a.size
    if T == 0:
        return math.nan, math.nan
    ma = math.fsum(a) / T
    mb = math.fsum(b) / T
    value = ma - mb * mb
    if T < 2:
        return value, math.nan
    va = math.fsum((a - ma) ** 2) / (T - 1)
    vb = math.fsum((b - mb) ** 2) / (T - 1)
    cab = math.fsum((a - ma) * (b - mb)) / (T - 1)
    var = (va + 4.0 * mb * mb * vb - 4.0 * mb * cab) / T
    return value, math.sqrt(max(var, 0.0))


def diag_mse_scaled(u, uhat):
    """Single-estimate version of the scaled MSE (one-trial combine)."""
    first, second = scaled_terms(u, uhat)
    return first - second * second


def overlap(u, uhat):
    uu, hh = float(u @ u), float(uhat @ uhat)
    if uu == 0 or hh == 0:
        return 0.0
    return float(u @ uhat) ** 2 / (uu * hh)


def _mean_se(values):
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return math.nan, math.nan
    m = math.fsum(v) / v.size
    if v.size < 2:
        return m, math.nan
    return m, math.sqrt(math.fsum((v - m) ** 2) / (v.size - 1) / v.size)


# ---------------------------------------------------------------------------
# exhaustive posterior
# ---------------------------------------------------------------------------

MAX_STATES = 1 << 20


@dataclass
class PosteriorOracle:
    """Exact posterior moments of one small instance."""

    mean: list
    second: list
    fourth: list
    log_z: float

    def vector_mmse(self, k):
        """Posterior expected ``|x_k - E[x_k|Y]|^2 / n_k``."""
        cov = self.second[k] - np.outer(self.mean[k], self.mean[k])
        return float(np.trace(cov)) / self.mean[k].size

    def block_mmse(self, k):
        """Posterior expected loss of ``E[x_k x_k^T | Y]``, per n_k^2."""
        n = self.mean[k].size
        return (float(self.fourth[k].sum()) - float(np.sum(self.second[k] ** 2))) / n**2

    def expected_loss(self, k, uhat):
        """Posterior expected ``|x_k x_k^T - uh uh^T|_F^2 / n_k^2``."""
        uhat = np.asarray(uhat, dtype=np.float64)
        n = uhat.size
        return (float(self.fourth[k].sum()) - 2.0 * float(uhat @ self.second[k] @ uhat) + float(uhat @ uhat) ** 2) / n**2

    def best_scaled_loss(self, k, direction):
        """Expected loss of ``rho * direction`` at the best ``rho``."""
        d = np.asarray(direction, dtype=np.float64)
        dd = float(d @ d)
        if dd == 0:
            return self.expected_loss(k, d)
        q = float(d @ self.second[k] @ d) / dd
        rho2 = max(q, 0.0) / dd
        return self.expected_loss(k, math.sqrt(rho2) * d)


def exact_posterior_oracle(obs, spec, N, max_states=MAX_STATES, use_numba=None):
    """Enumerate every latent configuration of a small all-discrete instance.

    The log-weight of ``x`` is the exact Gaussian log-likelihood of the raw
    blocks and side channels plus the log prior.
    """
    if any(p.is_gaussian for p in spec.priors):
        raise UsageError("exhaustive posterior needs discrete priors")
    n = np.asarray(obs.n)
    groups = np.repeat(np.arange(spec.K), n)
    counts = np.array([len(spec.priors[g].atoms) for g in groups], dtype=np.int64)
    log_states = float(np.sum(np.log2(counts)))
    if log_states > math.log2(max_states):
        raise ResourceError(f"state space 2^{log_states:.1f} exceeds {max_states}")
    width = int(counts.max())
    atoms = np.zeros((groups.size, width))
    logp = np.full((groups.size, width), -np.inf)
    for i, g in enumerate(groups):
        pr = spec.priors[g]
        atoms[i, : counts[i]] = pr._a
        logp[i, : counts[i]] = pr._logp
    off = np.concatenate([[0], np.cumsum(n)])
    Y = np.block([[obs.blocks[k][l] for l in range(spec.K)] for k in range(spec.K)])
    lam = spec.lam[np.ix_(groups, groups)]
    C = np.sqrt(lam / N) * Y
    Q = lam / N
    h = np.zeros(groups.size)
    s = np.zeros(groups.size)
    for k in range(spec.K):
        if spec.r[k] > 0 and obs.side[k] is not None:
            h[off[k]:off[k + 1]] = math.sqrt(spec.r[k]) * obs.side[k]
            s[off[k]:off[k + 1]] = spec.r[k]
    if use_numba is None:
        fn = kernels.enumerate_posterior
    else:
        fn = kernels.enumerate_posterior_numba if use_numba else kernels.enumerate_posterior_numpy
    log_z, mean, second, fourth = fn(atoms, logp, counts, C, Q, h, s)
    sl = [slice(off[k], off[k + 1]) for k in range(spec.K)]
    return PosteriorOracle(
        [mean[x].copy() for x in sl],
        [second[x, x].copy() for x in sl],
        [fourth[x, x].copy() for x in sl],
        float(log_z),
    )


# ---------------------------------------------------------------------------
# experiment configuration
# ---------------------------------------------------------------------------


def _prior_of(doc, default=None):
    if doc is None:
        return default if default is not None else Prior.gaussian()
    return doc if isinstance(doc, Prior) else Prior.from_dict(doc)


def build_spec(model):
    """ProblemSpec from a model template dictionary (see README)."""
    kind = model.get("kind")
    if kind == "two_group":
        pu = _prior_of(model.get("prior"))
        pv = _prior_of(model.get("prior_v"), pu)
        return make_two_group(float(model["alpha"]), float(model["lambda"]), pu, pv)
    if kind == "three_group":
        return make_three_group(
            model["support"], float(model["lambda"]), model.get("beta", (1 / 3, 1 / 3, 1 / 3)), _prior_of(model.get("prior"))
        )
    if kind == "hetero_pca":
        return make_hetero_pca(float(model["beta0"]), model["betas"], model["sigmas"], _prior_of(model.get("prior")))
    if kind == "csbm":
        return make_csbm(float(model["lambda_uu"]), float(model["lambda_uv"]), model["beta"], _prior_of(model.get("prior")))
    if kind == "explicit":
        return ProblemSpec.from_dict(model)
    raise UsageError(f"unknown model kind {kind!r}")


@dataclass
class AlgorithmSpec:
    name: str
    params: dict = field(default_factory=dict)
    scoring: str = "auto"

    def metric_kind(self):
        if self.scoring != "auto":
            return self.scoring
        # Gradient descent is scored with the optimal scaling, like the spectral
        # methods: its fixed point has the likelihood's norm, not the Bayes norm.
        return "direct" if self.name == "amp" else "scaled"


ALGORITHMS = ("amp", "gd", "joint_pca", "wpca")


@dataclass
class ExperimentConfig:
    model: dict
    N: int
    sweep_var: str
    sweep_values: list
    algorithms: list
    trials: int = 64
    base_seed: int = 0
    series_var: str = None
    series_values: list = None
    metrics: tuple = ("diag_mse",)
    trace: bool = False
    limits: bool = True

    def __post_init__(self):
        if not self.sweep_values:
            raise UsageError("sweep grid is empty")
        if self.trials < 1:
            raise UsageError("trials must be >= 1")
        self.algorithms = [a if isinstance(a, AlgorithmSpec) else AlgorithmSpec(**a) for a in self.algorithms]
        for a in self.algorithms:
            if a.name not in ALGORITHMS:
                raise UsageError(f"unknown algorithm {a.name!r}")
            if a.scoring not in ("auto", "direct", "scaled"):
                raise UsageError(f"unknown scoring {a.scoring!r}")
        names = [a.name for a in self.algorithms]
        if len(set(names)) != len(names):
            raise UsageError("each algorithm may appear once")
        if self.series_var is not None and not self.series_values:
            raise UsageError("series_var given without values")

    def series(self):
        return [None] if self.series_var is None else list(self.series_values)

    def point_model(self, series_value, sweep_value):
        m = dict(self.model)
        m[self.sweep_var] = sweep_value
        if self.series_var is not None:
            m[self.series_var] = series_value
        return m


def series_label(cfg, value):
    if cfg.series_var is None:
        return None
    if cfg.series_var == "support":
        return support_label(value)
    return f"{cfg.series_var}={value}"


@dataclass
class TrialResult:
    series: object
    sweep_value: object
    trial: int
    seed: int
    algorithm: str
    metric_kind: str
    values: list = None  # direct: per-group MSE; scaled: per-group (first, second)
    overlaps: list = None
    wall_time: float = 0.0
    ok: bool = True
    reason: str = ""
    trace: list = None


def _run_algorithm(alg, sym, spec, truth, seed, trace):
    p = dict(alg.params)
    if alg.name == "amp":
        est, traj = amp_groupwise(
            sym, spec, T=int(p.get("T", 200)), seed=seed, tol=float(p.get("tol", 1e-8)),
            damping=float(p.get("damping", 0.0)), trace=trace,
        )
        rows = None
        if trace:
            rows = [
                (st.t, k, overlap(truth[k], st.m[k]), float(np.mean(st.v[k])))
                for st in traj for k in range(spec.K)
            ]
        return est, rows
    if alg.name == "gd":
        cfg = GdConfig(**{k: p[k] for k in ("steps", "gamma", "schedule", "tol", "max_halvings") if k in p})
        est = gradient_descent(sym, spec, cfg, seed=seed, trace=trace)
        rows = None
        if trace:
            rows = [(t, k, math.nan, float(norms[k]) / sym.n[k]) for t, norms in est.info.get("trace", []) for k in range(spec.K)]
        return est, rows
    if alg.name == "joint_pca":
        return joint_pca(sym, seed=seed), None
    if alg.name == "wpca":
        grid = weight_grid(spec.K, sym.n, int(p.get("resolution", 17)))
        _, est = weight_grid_search(sym, truth, grid, seed=seed)
        return est, None
    raise UsageError(f"unknown algorithm {alg.name!r}")


def run_trial(cfg, series_value, sweep_value, trial):
    """Sample one instance and run every configured algorithm on it."""
    seed = derive_seed(cfg.base_seed, series_value, sweep_value, trial)
    spec = build_spec(cfg.point_model(series_value, sweep_value))
    obs = sample_instance(InstanceSpec(spec, cfg.N, seed=seed))
    truth = obs.truth
    sym = symmetrize(obs.redacted(), spec)
    out = []
    for alg in cfg.algorithms:
        kind = alg.metric_kind()
        t0 = time.perf_counter()
        res = TrialResult(series_value, sweep_value, trial, seed, alg.name, kind)
        try:
            est, rows = _run_algorithm(alg, sym, spec, truth, seed, cfg.trace and trial == 0)
            if kind == "direct":
                res.values = [diag_mse_direct(truth[k], est.xhat[k]) for k in range(spec.K)]
            else:
                res.values = []
                for k in range(spec.K):
                    if not np.any(est.xhat[k]):
                        # no direction at all: the best sphere radius is zero
                        n = truth[k].size
                        res.values.append((float(truth[k] @ truth[k]) ** 2 / n**2, 0.0))
                        res.reason = f"group {k + 1} estimate is zero; scored at radius 0"
                    else:
                        res.values.append(scaled_terms(truth[k], est.xhat[k]))
            res.overlaps = [overlap(truth[k], est.xhat[k]) for k in range(spec.K)]
            res.trace = rows
        except (HetspikeError, ArithmeticError, np.linalg.LinAlgError) as exc:
            if isinstance(exc, ResourceError):
                raise
            res.ok = False
            res.reason = f"{type(exc).__name__}: {exc}"
        res.wall_time = time.perf_counter() - t0
        out.append(res)
    return out


def _task(args):
    cfg, s, v, t = args
    return run_trial(cfg, s, v, t)


@dataclass
class ExperimentResult:
    trials: list
    rows: list
    mmse_rows: list
    failures: list
    config: ExperimentConfig


def aggregate(cfg, results):
    """Mean and standard error per (series, point, algorithm, group)."""
    rows = []
    K_of = {}
    keyed = {}
    for r in results:
        keyed.setdefault((r.series, r.sweep_value, r.algorithm), []).append(r)
    for s in cfg.series():
        for v in cfg.sweep_values:
            for alg in cfg.algorithms:
                rs = sorted(keyed.get((s, v, alg.name), []), key=lambda r: r.trial)
                done = [r for r in rs if r.ok]
                label = alg.name if s is None else f"{alg.name}@{series_label(cfg, s)}"
                base = {"sweep_var": cfg.sweep_var, "sweep_value": v, "algorithm": label,
                        "trials": len(rs), "completed": len(done)}
                if not done:
                    rows.append({**base, "group": "avg", "metric": "diag_mse", "mean": math.nan, "stderr": math.nan})
                    continue
                K = len(done[0].values)
                K_of[s] = K
                means, ses = [], []
                for k in range(K):
                    if done[0].metric_kind == "direct":
                        m, se = _mean_se([r.values[k] for r in done])
                    else:
                        m, se = combine_scaled([r.values[k][0] for r in done], [r.values[k][1] for r in done])
                    means.append(m)
                    ses.append(se)
                    if "diag_mse" in cfg.metrics:
                        rows.append({**base, "group": str(k + 1), "metric": "diag_mse", "mean": m, "stderr": se})
                    if "overlap" in cfg.metrics:
                        om, ose = _mean_se([r.overlaps[k] for r in done])
                        rows.append({**base, "group": str(k + 1), "metric": "overlap", "mean": om, "stderr": ose})
                if "diag_mse" in cfg.metrics:
                    avg = math.fsum(means) / K
                    se = math.sqrt(math.fsum(x * x for x in ses)) / K if all(math.isfinite(x) for x in ses) else math.nan
                    rows.append({**base, "group": "avg", "metric": "diag_mse", "mean": avg, "stderr": se})
    return rows


def limit_rows(cfg, opts=None):
    """Asymptotic MMSE for every (series, point) in the sweep."""
    out = []
    for s in cfg.series():
        prefix = "" if s is None else f"{series_label(cfg, s)}:"
        for v in cfg.sweep_values:
            spec = build_spec(cfg.point_model(s, v))
            sp = solve_limit(spec, opts)
            mm = mmse_from_saddle(sp, spec)
            for k in range(spec.K):
                out.append({"sweep_value": v, "group_or_block": f"{prefix}{k + 1}", "mmse": float(mm.vector_mmse[k]),
                            "unique_flag": bool(sp.unique)})
            for k, l in itertools.product(range(spec.K), repeat=2):
                out.append({"sweep_value": v, "group_or_block": f"{prefix}{k + 1}{l + 1}",
                            "mmse": float(mm.block_mmse[k, l]), "unique_flag": bool(sp.unique)})
    return out


def run_experiment(cfg, workers=1, progress=None, solver_opts=None):
    """Paired-design Monte Carlo sweep; returns trial results and aggregates.

    Trials are a pure map over ``(series, point, trial)``; the reduce sorts by
    that key and sums with ``math.fsum``, so the worker count never changes
    the output.
    """
    tasks = [(cfg, s, v, t) for s in cfg.series() for v in cfg.sweep_values for t in range(cfg.trials)]
    results = []
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for i, batch in enumerate(ex.map(_task, tasks, chunksize=1)):
                results.extend(batch)
                if progress:
                    progress(i + 1, len(tasks))
    else:
        for i, task in enumerate(tasks):
            results.extend(_task(task))
            if progress:
                progress(i + 1, len(tasks))
    order = {v: i for i, v in enumerate(cfg.sweep_values)}
    sorder = {repr(s): i for i, s in enumerate(cfg.series())}
    results.sort(key=lambda r: (sorder[repr(r.series)], order[r.sweep_value], r.trial, r.algorithm))
    failures = [r for r in results if not r.ok]
    for alg in cfg.algorithms:
        mine = [r for r in results if r.algorithm == alg.name]
        bad = sum(not r.ok for r in mine)
        if mine and bad > 0.5 * len(mine):
            raise ExperimentAborted(f"{alg.name}: {bad} of {len(mine)} trials failed; first: {next(r.reason for r in mine if not r.ok)}")
    rows = aggregate(cfg, results)
    mrows = limit_rows(cfg, solver_opts) if cfg.limits else []
    return ExperimentResult(results, rows, mrows, failures, cfg)


def default_workers():
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1))


def manifest(cfg, extra=None):
    doc = {
        "version": __version__,
        "base_seed": cfg.base_seed,
        "trials": cfg.trials,
        "seed_rule": "blake2b-64(base_seed, series, sweep_value, trial) -> Philox(seed, tag, k, l)",
    }
    if extra:
        doc.update(extra)
    return doc


__all__ = [
    "diag_mse_direct", "diag_mse_scaled", "scaled_terms", "combine_scaled", "overlap",
    "PosteriorOracle", "exact_posterior_oracle",
    "AlgorithmSpec", "ExperimentConfig", "TrialResult", "ExperimentResult",
    "build_spec", "run_trial", "run_experiment", "aggregate", "limit_rows", "manifest",
    "POSTERIOR_MEAN", "SCALE_FREE",
]
