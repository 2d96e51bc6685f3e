"""Leading eigenvectors of symmetric matrices and operators."""
import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from ..errors import ConvergenceError, DegenerateInputError, UsageError

DENSE_LIMIT = 256


def power_iteration(matrix, dim=None, tol=1e-10, max_iter=1_000_000, seed=0, shift=None):
    """Leading (largest algebraic) eigenpair by shifted power iteration.

    ``matrix`` is a dense symmetric array or a callable ``v -> A v``.  For
    arrays the shift is the Gershgorin bound ``max_i sum_j |A_ij|``, which
    makes ``A + shift I`` positive semidefinite so the iteration locks onto
    the top of the spectrum rather than the largest magnitude.  Callables
    need ``shift`` (any upper bound on the spectral radius).

    Returns ``(v, lam)`` with ``||A v - lam v|| <= tol``.
    """
    if callable(matrix):
        if dim is None or shift is None:
            raise UsageError("operator input needs dim and shift")
        apply = matrix
    else:
        A = np.asarray(matrix, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise UsageError("matrix must be square")
        dim = A.shape[0]
        apply = lambda v: A @ v  # noqa: E731
        if shift is None:
            shift = float(np.abs(A).sum(axis=1).max())
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    res = np.inf
    for _ in range(max_iter):
        Av = apply(v)
        lam = float(v @ Av)
        res = float(np.linalg.norm(Av - lam * v))
        if res <= tol:
            return v, lam
        w = Av + shift * v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            raise DegenerateInputError("iterate collapsed to zero")
        v = w / nw
    raise ConvergenceError(f"power iteration stopped after {max_iter} steps, residual {res:.3g}", residual=res)


def leading_eigvec(matrix, method="auto", seed=0, tol=1e-10):
    """Unit leading eigenvector; dense ``eigh`` for small inputs, Lanczos otherwise."""
    A = matrix
    dim = A.shape[0]
    if method == "auto":
        method = "dense" if dim <= DENSE_LIMIT and not isinstance(A, LinearOperator) else "lanczos"
    if method == "dense":
        w, V = np.linalg.eigh(np.asarray(A))
        return V[:, -1], float(w[-1])
    if method == "power":
        return power_iteration(A, tol=tol, seed=seed)
    if method != "lanczos":
        raise UsageError(f"unknown eigen method {method!r}")
    v0 = np.random.default_rng(seed).standard_normal(dim)
    try:
        w, V = eigsh(A, k=1, which="LA", v0=v0, tol=tol, maxiter=20 * dim)
    except ArpackNoConvergence as exc:
        raise ConvergenceError("Lanczos did not converge") from exc
    return V[:, 0], float(w[0])
