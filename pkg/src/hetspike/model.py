"""Problem builders, finite-N sampling and symmetrisation.

Every random draw comes from a Philox stream keyed by ``(seed, tag, k, l)``
so one block can be regenerated without touching any other.  Tags:
0 for latent vectors, 1 for block noise, 2 for side-channel noise.
"""
from dataclasses import dataclass, field
import hashlib
import io
import itertools
import json
import math

import numpy as np

from .errors import DomainError, ResourceError, UsageError
from .limits import ProblemSpec
from .priors import Prior

TAG_PRIOR = 0
TAG_BLOCK = 1
TAG_SIDE = 2
TAG_ALGO = 3

DEFAULT_MEMORY_BUDGET = 2 << 30


def substream(seed, *key):
    """Independent generator for a labelled sub-stream of ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(base_seed, *labels):
    """Stable 64-bit seed from a base seed and arbitrary printable labels."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(base_seed)).encode())
    for lab in labels:
        h.update(b"\x1f")
        h.update(repr(lab).encode())
    return int.from_bytes(h.digest(), "little")


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def _prior(p):
    return Prior.gaussian() if p is None else p


def make_two_group(alpha, lam, prior=None, prior_v=None):
    """``Lam = lam [[1-a, a], [a, 1-a]]`` with two equal-size groups.

    Sampling with ``N = 2n`` gives ``n`` coordinates per group.
    """
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    if lam < 0:
        raise DomainError("lambda must be nonnegative")
    pu = _prior(prior)
    pv = pu if prior_v is None else prior_v
    L = lam * np.array([[1.0 - alpha, alpha], [alpha, 1.0 - alpha]])
    return ProblemSpec(beta=[0.5, 0.5], priors=(pu, pv), lam=L)


def parse_support(support):
    """Turn ``"(11,23)"``, ``["11", "23"]`` or ``[(1, 1), (2, 3)]`` into 0-based pairs."""
    if isinstance(support, str):
        support = [t for t in support.strip().strip("()").split(",") if t.strip()]
    pairs = []
    for item in support:
        if isinstance(item, str):
            s = item.strip()
            if len(s) != 2 or not s.isdigit():
                raise UsageError(f"bad support label {item!r}")
            k, l = int(s[0]), int(s[1])
        else:
            k, l = item
        pairs.append((int(k) - 1, int(l) - 1))
    return pairs


def support_label(support):
    return "(" + ",".join(f"{k + 1}{l + 1}" for k, l in parse_support(support)) + ")"


def make_three_group(support, lam, beta=(1 / 3, 1 / 3, 1 / 3), prior=None):
    """Equal SNR on each support entry, normalised so ``beta' Lam beta = lam``."""
    pairs = parse_support(support)
    if not pairs:
        raise UsageError("support must name at least one entry")
    beta = np.asarray(beta, dtype=np.float64)
    K = beta.size
    mask = np.zeros((K, K))
    for k, l in pairs:
        if not (0 <= k < K and 0 <= l < K):
            raise UsageError(f"support entry {(k + 1, l + 1)} out of range for K={K}")
        mask[k, l] = 1.0
    norm = float(beta @ mask @ beta)
    if norm <= 0:
        raise UsageError("support has zero normaliser")
    p = _prior(prior)
    return ProblemSpec(beta=beta, priors=(p,) * K, lam=mask * (lam / norm))


def make_hetero_pca(beta0, betas, sigmas, prior=None):
    """Groups ``0..L``: ``u`` then the Gaussian ``v_l``; ``Lam[0, l] = sigma_l^-2``."""
    betas = np.atleast_1d(np.asarray(betas, dtype=np.float64))
    sigmas = np.atleast_1d(np.asarray(sigmas, dtype=np.float64))
    if betas.shape != sigmas.shape:
        raise UsageError("betas and sigmas must have equal length")
    if np.any(sigmas <= 0):
        raise DomainError("noise levels sigma_l must be positive")
    L = betas.size
    lam = np.zeros((L + 1, L + 1))
    lam[0, 1:] = sigmas**-2.0
    priors = (_prior(prior),) + (Prior.gaussian(),) * L
    return ProblemSpec(beta=np.concatenate([[beta0], betas]), priors=priors, lam=lam)


def make_csbm(lambda_uu, lambda_uv, beta, u_prior):
    """Contextual block model: ``u`` self-interactions plus ``u``-``v`` links."""
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (2,):
        raise UsageError("csbm needs two group sizes")
    lam = np.array([[lambda_uu, lambda_uv], [0.0, 0.0]], dtype=np.float64)
    return ProblemSpec(beta=beta, priors=(u_prior, Prior.gaussian()), lam=lam)


# ---------------------------------------------------------------------------
# instances
# ---------------------------------------------------------------------------


def group_sizes(beta, N):
    """Largest-remainder rounding of ``beta * N`` with every group nonempty."""
    raw = np.asarray(beta, dtype=np.float64) * N
    n = np.floor(raw).astype(np.int64)
    target = int(round(raw.sum()))
    short = target - int(n.sum())
    if short > 0:
        order = np.argsort(-(raw - n), kind="stable")
        n[order[:short]] += 1
    return np.maximum(n, 1)


@dataclass(frozen=True, eq=False)
class InstanceSpec:
    spec: ProblemSpec
    N: int
    seed: int = 0
    n: tuple = field(default=None)

    def __post_init__(self):
        if int(self.N) < 1:
            raise UsageError("N must be a positive integer")
        n = group_sizes(self.spec.beta, self.N) if self.n is None else np.asarray(self.n, dtype=np.int64)
        if n.shape != (self.spec.K,) or np.any(n < 1):
            raise UsageError("every group needs at least one coordinate")
        if not 0 <= int(self.seed) < 2**64:
            raise UsageError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "n", tuple(int(v) for v in n))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.n)])

    def nbytes(self):
        n = np.asarray(self.n, dtype=np.float64)
        return 8.0 * float(n.sum()) ** 2 + 8.0 * float(n.sum())


@dataclass(eq=False)
class Observations:
    """Raw blocks ``Y[k][l]``, side channels and (for evaluation) the truth."""

    blocks: list
    side: list
    truth: list = None
    N: int = None

    @property
    def K(self):
        return len(self.blocks)

    @property
    def n(self):
        return tuple(self.blocks[k][0].shape[0] for k in range(self.K))

    def redacted(self):
        """Copy-free view without the ground truth, for estimators."""
        return Observations(self.blocks, self.side, None, self.N)

    def same_as(self, other):
        if self.K != other.K:
            return False
        for k, l in itertools.product(range(self.K), repeat=2):
            if not np.array_equal(self.blocks[k][l], other.blocks[k][l]):
                return False
        for a, b in zip(self.side, other.side):
            if (a is None) != (b is None) or (a is not None and not np.array_equal(a, b)):
                return False
        if (self.truth is None) != (other.truth is None):
            return False
        return self.truth is None or all(np.array_equal(a, b) for a, b in zip(self.truth, other.truth))


def sample_instance(ispec, memory_budget=DEFAULT_MEMORY_BUDGET):
    spec = ispec.spec
    if ispec.nbytes() > memory_budget:
        raise ResourceError(f"instance needs ~{ispec.nbytes() / 2**20:.0f} MiB, budget is {memory_budget / 2**20:.0f} MiB")
    K, N, seed = spec.K, ispec.N, ispec.seed
    x = [spec.priors[k].sample(substream(seed, TAG_PRIOR, k), ispec.n[k]) for k in range(K)]
    blocks = [[None] * K for _ in range(K)]
    for k, l in itertools.product(range(K), repeat=2):
        noise = substream(seed, TAG_BLOCK, k, l).standard_normal((ispec.n[k], ispec.n[l]))
        lam = spec.lam[k, l]
        if lam > 0:
            noise += math.sqrt(lam / N) * np.outer(x[k], x[l])
        blocks[k][l] = noise
    side = []
    for k in range(K):
        r = spec.r[k]
        if r > 0:
            side.append(math.sqrt(r) * x[k] + substream(seed, TAG_SIDE, k).standard_normal(ispec.n[k]))
        else:
            side.append(None)
    return Observations(blocks, side, x, N)


@dataclass(eq=False)
class SymObservations:
    """Upper-triangular symmetrised blocks and ``lam_sym = Lam + Lam^T``.

    Signal in every block is ``sqrt(lam_sym[k, l] / N) x_k x_l^T``; noise is
    unit variance off the diagonal and GOE-like inside diagonal blocks.
    """

    sym_blocks: dict
    lambda_sym: np.ndarray
    N: int
    side: list
    r: np.ndarray

    @property
    def K(self):
        return self.lambda_sym.shape[0]

    @property
    def n(self):
        return tuple(self.sym_blocks[(k, k)].shape[0] for k in range(self.K))

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.n)])

    def block(self, k, l):
        return self.sym_blocks[(k, l)] if k <= l else self.sym_blocks[(l, k)].T

    def dense(self, zero_unused=False):
        """Assemble the full symmetric matrix of all ``Y^sym`` blocks."""
        off = self.offsets
        out = np.empty((off[-1], off[-1]))
        for k, l in itertools.product(range(self.K), repeat=2):
            blk = out[off[k]:off[k + 1], off[l]:off[l + 1]]
            if zero_unused and self.lambda_sym[k, l] == 0:
                blk[...] = 0.0
            else:
                blk[...] = self.block(k, l)
        return out

    def scale_matrix(self):
        """Full ``sqrt(lam_sym / N)`` pattern, block constant."""
        g = np.sqrt(self.lambda_sym / self.N)
        return np.repeat(np.repeat(g, self.n, axis=0), self.n, axis=1)


def symmetrize(obs, spec):
    K = spec.K
    lam = spec.lam
    ls = spec.lam_sym
    out = {}
    for k in range(K):
        for l in range(k, K):
            if ls[k, l] > 0:
                wa, wb = math.sqrt(lam[k, l] / ls[k, l]), math.sqrt(lam[l, k] / ls[k, l])
            else:
                wa = wb = math.sqrt(0.5)
            out[(k, l)] = wa * obs.blocks[k][l] + wb * obs.blocks[l][k].T
    side = [None if s is None else s.copy() for s in obs.side]
    N = obs.N if obs.N is not None else int(round(sum(obs.n) / spec.beta.sum()))
    return SymObservations(out, np.array(ls), N, side, np.array(spec.r))


def log_likelihood(x, obs, spec, N):
    """Gaussian log-likelihood of stacked ``x`` under the raw observations."""
    off = np.concatenate([[0], np.cumsum(obs.n)])
    xs = [x[off[k]:off[k + 1]] for k in range(spec.K)]
    ll = 0.0
    for k, l in itertools.product(range(spec.K), repeat=2):
        resid = obs.blocks[k][l] - math.sqrt(spec.lam[k, l] / N) * np.outer(xs[k], xs[l])
        ll -= 0.5 * float(np.sum(resid**2))
    for k in range(spec.K):
        if obs.side[k] is not None:
            ll -= 0.5 * float(np.sum((obs.side[k] - math.sqrt(spec.r[k]) * xs[k]) ** 2))
    return ll


def sym_log_likelihood(x, sym):
    """Log-likelihood of ``x`` given only the symmetrised statistics.

    Off-diagonal blocks contribute every entry; a diagonal block contributes
    its strict upper triangle at unit variance and its diagonal at variance 2.
    """
    off = sym.offsets
    xs = [x[off[k]:off[k + 1]] for k in range(sym.K)]
    ll = 0.0
    for (k, l), Y in sym.sym_blocks.items():
        s = math.sqrt(sym.lambda_sym[k, l] / sym.N)
        resid = Y - s * np.outer(xs[k], xs[l])
        if k == l:
            iu = np.triu_indices(Y.shape[0], 1)
            ll -= 0.5 * float(np.sum(resid[iu] ** 2)) + 0.25 * float(np.sum(np.diag(resid) ** 2))
        else:
            ll -= 0.5 * float(np.sum(resid**2))
    for k in range(sym.K):
        if sym.side[k] is not None:
            ll -= 0.5 * float(np.sum((sym.side[k] - math.sqrt(sym.r[k]) * xs[k]) ** 2))
    return ll


# ---------------------------------------------------------------------------
# dumps
# ---------------------------------------------------------------------------

_MAGIC = b"HSPK1\n"


def _named_arrays(obs, with_truth):
    K = obs.K
    for k, l in itertools.product(range(K), repeat=2):
        yield f"Y{k + 1}{l + 1}" if K < 10 else f"Y{k + 1}_{l + 1}", obs.blocks[k][l]
    for k in range(K):
        if obs.side[k] is not None:
            yield f"side{k + 1}", obs.side[k]
    if with_truth and obs.truth is not None:
        for k in range(K):
            yield f"x{k + 1}", obs.truth[k]


def dump_instance(obs, path, fmt="bin", with_truth=True, meta=None):
    """Write raw float64 arrays (``bin``) or a labelled CSV dump."""
    arrays = list(_named_arrays(obs, with_truth))
    if fmt == "bin":
        header = {
            "K": obs.K,
            "n": list(obs.n),
            "N": obs.N,
            "arrays": [{"name": name, "shape": list(a.shape)} for name, a in arrays],
            "dtype": "<f8",
            "order": "C",
            "meta": meta or {},
        }
        hb = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(len(hb).to_bytes(8, "little"))
            fh.write(hb)
            for _, a in arrays:
                fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    elif fmt == "csv":
        with open(path, "w") as fh:
            for name, a in arrays:
                a2 = np.atleast_2d(a)
                fh.write(f"# {name} {a2.shape[0]} {a2.shape[1]}\n")
                np.savetxt(fh, a2, delimiter=",", fmt="%.17g")
    else:
        raise UsageError(f"unknown dump format {fmt!r}")


def load_instance(path):
    """Inverse of :func:`dump_instance` for either format."""
    with open(path, "rb") as fh:
        head = fh.read(len(_MAGIC))
        if head == _MAGIC:
            hlen = int.from_bytes(fh.read(8), "little")
            header = json.loads(fh.read(hlen))
            arrays = {}
            for item in header["arrays"]:
                shape = tuple(item["shape"])
                count = int(np.prod(shape))
                arrays[item["name"]] = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape).copy()
            return _assemble(header["K"], arrays, header.get("N"))
    arrays = {}
    with open(path) as fh:
        text = fh.read()
    for chunk in text.split("# ")[1:]:
        line, _, body = chunk.partition("\n")
        name, r, c = line.split()
        a = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2).reshape(int(r), int(c))
        arrays[name] = a
    K = int(round(math.sqrt(sum(1 for k in arrays if k.startswith("Y")))))
    return _assemble(K, {k: (v.ravel() if not k.startswith("Y") else v) for k, v in arrays.items()})


def _assemble(K, arrays, N=None):
    def yname(k, l):
        return f"Y{k + 1}{l + 1}" if K < 10 else f"Y{k + 1}_{l + 1}"

    blocks = [[arrays[yname(k, l)] for l in range(K)] for k in range(K)]
    side = [arrays.get(f"side{k + 1}") for k in range(K)]
    side = [None if s is None else s.ravel() for s in side]
    truth = [arrays.get(f"x{k + 1}") for k in range(K)]
    truth = None if any(t is None for t in truth) else [t.ravel() for t in truth]
    return Observations(blocks, side, truth, N)
