"""Dense kernels: one-sided Jacobi thin SVD, QR orthonormalization, guarded solves.

The SVD is Hestenes' one-sided Jacobi method with cyclic pair ordering,
compiled with numba. Small singular values come out accurate relative to
themselves. Inputs that are much taller than wide are first reduced by a
Householder QR and the rotations run on the transposed triangular factor,
which cuts the cost from O(m n^2) per sweep to O(n^3) and lowers the sweep
count.
"""

import contextlib
import contextvars
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConvergenceError, IllConditionedError, RankDeficiencyError

__all__ = [
    "ThinSvd",
    "thin_svd",
    "qr_orthonormalize",
    "solve_square",
    "svd_trace",
    "polar_factors",
    "as_matrix",
]

EPS = np.finfo(float).eps
SOLVE_MAX_CONDITION = 1e12

_svd_log = contextvars.ContextVar("svd_log", default=None)


@dataclass(frozen=True)
class ThinSvd:
    """Factors of ``a = u @ diag(sigma) @ v.T`` with ``k = min(a.shape)``."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def __iter__(self):
        return iter((self.u, self.sigma, self.v))

    def matrix(self):
        return (self.u * self.sigma) @ self.v.T


@contextlib.contextmanager
def svd_trace():
    """Record the shape and label of every `thin_svd` call made inside the block.

    Yields a list that is filled with ``(shape, label)`` tuples.

    >>> with svd_trace() as calls:
    ...     _ = thin_svd(np.eye(3))
    >>> calls
    [((3, 3), None)]
    """
    calls = []
    token = _svd_log.set(calls)
    try:
        yield calls
    finally:
        _svd_log.reset(token)


def as_matrix(a, name="matrix"):
    """Validate and return ``a`` as a finite, non-empty 2-D float array."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


@numba.njit(cache=True)
def _hestenes(a, v, tol, max_sweeps):
    """Cyclic one-sided Jacobi on the columns of Fortran-ordered ``a``.

    Squared column norms are updated through each rotation, recomputed when
    the update cancels, and refreshed once per sweep. Columns whose norm is
    below ``tol`` times the largest column norm carry only round-off; they
    are zeroed and take no part in further rotations. Returns the number of
    sweeps used (``max_sweeps + 1`` if not converged) and the largest
    relative column coupling seen in the last sweep.
    """
    m, n = a.shape
    norms = np.empty(n)
    off = 0.0
    for sweep in range(max_sweeps):
        top = 0.0
        for j in range(n):
            acc = 0.0
            for i in range(m):
                acc += a[i, j] * a[i, j]
            norms[j] = acc
            if acc > top:
                top = acc
        floor = top * tol * tol
        for j in range(n):
            if norms[j] <= floor and norms[j] > 0.0:
                norms[j] = 0.0
                for i in range(m):
                    a[i, j] = 0.0
        off = 0.0
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = norms[p]
                beta = norms[q]
                if alpha == 0.0 or beta == 0.0:
                    continue
                gamma = 0.0
                for i in range(m):
                    gamma += a[i, p] * a[i, q]
                rel = abs(gamma) / np.sqrt(alpha * beta)
                if rel <= tol:
                    continue
                if rel > off:
                    off = rel
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                sgn = 1.0 if zeta >= 0.0 else -1.0
                t = sgn / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                for i in range(m):
                    x = a[i, p]
                    y = a[i, q]
                    a[i, p] = c * x - s * y
                    a[i, q] = s * x + c * y
                for i in range(n):
                    x = v[i, p]
                    y = v[i, q]
                    v[i, p] = c * x - s * y
                    v[i, q] = s * x + c * y
                new_p = alpha - t * gamma
                new_q = beta + t * gamma
                for j, val, old in ((p, new_p, alpha), (q, new_q, beta)):
                    if val < 0.01 * old:
                        acc = 0.0
                        for i in range(m):
                            acc += a[i, j] * a[i, j]
                        val = acc
                    norms[j] = val if val > floor else 0.0
        if not rotated:
            return sweep + 1, off
    return max_sweeps + 1, off


@numba.njit(cache=True)
def _fix_signs(u, v):
    """Flip column pairs so the largest-magnitude entry of each ``u`` column is >= 0."""
    m, k = u.shape
    for j in range(k):
        best = 0.0
        val = 0.0
        for i in range(m):
            if abs(u[i, j]) > best:
                best = abs(u[i, j])
                val = u[i, j]
        if val < 0.0:
            for i in range(m):
                u[i, j] = -u[i, j]
            for i in range(v.shape[0]):
                v[i, j] = -v[i, j]


@numba.njit(cache=True)
def _jacobi_svd(a, max_sweeps, tol):
    """Jacobi-orthogonalize a copy of ``a`` and split it into sorted factors.

    Returns ``x, sigma, w, sweeps, off`` with ``a = x diag(sigma) w.T``;
    columns of ``x`` belonging to zero singular values are left at zero.
    """
    m, n = a.shape
    work = np.asfortranarray(a.copy())
    w = np.asfortranarray(np.eye(n))
    sweeps, off = _hestenes(work, w, tol, max_sweeps)
    sigma = np.empty(n)
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += work[i, j] * work[i, j]
        sigma[j] = np.sqrt(acc)
    order = np.argsort(-sigma, kind="mergesort")
    x = np.zeros((m, n))
    w_sorted = np.empty((n, n))
    s_sorted = np.empty(n)
    for jj in range(n):
        j = order[jj]
        s_sorted[jj] = sigma[j]
        for i in range(n):
            w_sorted[i, jj] = w[i, j]
        if sigma[j] > 0.0:
            for i in range(m):
                x[i, jj] = work[i, j] / sigma[j]
    return x, s_sorted, w_sorted, sweeps, off


@numba.njit(cache=True)
def _polar_stack(ms, max_sweeps, tol):
    """``U V^T`` for each square ``ms[k] = U S V^T``; ``ok[k]`` is False when
    the kernel did not converge or ``ms[k]`` is singular."""
    count, n, _ = ms.shape
    out = np.empty_like(ms)
    ok = np.ones(count, dtype=np.bool_)
    for k in range(count):
        x, sigma, w, sweeps, _ = _jacobi_svd(ms[k], max_sweeps, tol)
        if sweeps > max_sweeps or sigma[n - 1] == 0.0:
            ok[k] = False
        out[k] = x @ w.T
    return out, ok


def _complete_columns(u, keep):
    """Replace the columns of ``u`` not flagged in ``keep`` by an orthonormal completion."""
    m = u.shape[0]
    good = [u[:, j] for j in range(u.shape[1]) if keep[j]]
    basis = np.array(good).T if good else np.zeros((m, 0))
    for j in range(u.shape[1]):
        if keep[j]:
            continue
        # standard basis vector with the largest component outside span(basis)
        leverage = np.einsum("ij,ij->i", basis, basis)
        i = int(np.argmin(leverage))
        w = np.zeros(m)
        w[i] = 1.0
        for _ in range(2):
            w -= basis @ (basis.T @ w)
        w /= np.linalg.norm(w)
        u[:, j] = w
        basis = np.column_stack([basis, w])
    return u


def _one_sided(a, max_sweeps):
    """Jacobi SVD of ``a`` (m >= n): ``a = x diag(sigma) w.T``, sorted."""
    m, n = a.shape
    tol = max(m, n) * EPS
    x, sigma, w, sweeps, off = _jacobi_svd(a, max_sweeps, tol)
    if sweeps > max_sweeps:
        raise ConvergenceError(
            f"one-sided Jacobi did not converge in {max_sweeps} sweeps", residual=off
        )
    keep = sigma > np.finfo(float).tiny
    if not keep.all():
        sigma[~keep] = 0.0
        x = _complete_columns(x, keep)
    return x, sigma, w


def _svd_tall(a, max_sweeps):
    m, n = a.shape
    if m <= 2 * n or m * n <= 1024:
        return _one_sided(a, max_sweeps)
    q, r = np.linalg.qr(a)
    # r.T = x diag(s) w.T  ->  a = (q w) diag(s) x.T
    x, sigma, w = _one_sided(r.T, max_sweeps)
    return q @ w, sigma, x


def thin_svd(a, *, max_sweeps=None, label=None):
    """Thin singular value decomposition.

    Parameters
    ----------
    a : (m, n) array_like
        Finite, non-empty matrix.
    max_sweeps : int, optional
        Iteration cap; defaults to ``100 * min(m, n)``.
    label : str, optional
        Tag recorded by `svd_trace`.

    Returns
    -------
    ThinSvd
        ``u`` is (m, k), ``sigma`` is (k,) non-increasing, ``v`` is (n, k).
        Each column of ``u`` has its largest-magnitude entry non-negative
        (first such row on ties); ``v`` is flipped along with it.

    Raises
    ------
    ConvergenceError
        If the rotations do not settle within ``max_sweeps``.
    """
    a = as_matrix(a)
    log_svd(a.shape, label)
    u, sigma, v = svd_factors(a, max_sweeps)
    return ThinSvd(u, sigma, v)


def log_svd(shape, label=None):
    """Record one SVD in the active `svd_trace`, if any."""
    log = _svd_log.get()
    if log is not None:
        log.append((tuple(shape), label))


def svd_factors(a, max_sweeps=None):
    """Unchecked core of `thin_svd` for a finite 2-D float array; returns a tuple."""
    m, n = a.shape
    if max_sweeps is None:
        max_sweeps = 100 * min(m, n)
    if m >= n:
        u, sigma, v = _svd_tall(a, max_sweeps)
    else:
        v, sigma, u = _svd_tall(a.T, max_sweeps)
    u = np.ascontiguousarray(u)
    v = np.ascontiguousarray(v)
    _fix_signs(u, v)
    return u, sigma, v


def polar_factors(ms, *, label=None):
    """Orthogonal polar factor ``U V^T`` of each square matrix in a stack.

    Equivalent to calling `thin_svd` on every ``ms[k]`` (same kernel), with
    one dispatch for the whole stack.
    """
    ms = np.ascontiguousarray(ms, dtype=float)
    if ms.ndim != 3 or ms.shape[1] != ms.shape[2]:
        raise ValueError(f"expected a stack of square matrices, got shape {ms.shape}")
    if not np.all(np.isfinite(ms)):
        raise ValueError("matrix stack has non-finite entries")
    count, n, _ = ms.shape
    log = _svd_log.get()
    if log is not None:
        log.extend([((n, n), label)] * count)
    out, ok = _polar_stack(ms, 100 * n, n * EPS)
    for k in np.flatnonzero(~ok):
        u, _, v = thin_svd(ms[k])
        out[k] = u @ v.T
    return out


@numba.njit(cache=True)
def _cgs2(a, rtol):
    """Gram-Schmidt with one full reorthogonalization pass per column.

    Returns ``q`` and the index of the first column whose remaining norm
    falls below ``rtol`` times the largest column norm (-1 if none).
    """
    n, k = a.shape
    q = np.zeros((n, k))
    scale = 0.0
    for j in range(k):
        acc = 0.0
        for i in range(n):
            acc += a[i, j] * a[i, j]
        scale = max(scale, np.sqrt(acc))
    if scale == 0.0:
        return q, 0
    col = np.empty(n)
    for j in range(k):
        for i in range(n):
            col[i] = a[i, j]
        for _ in range(2):
            for p in range(j):
                dot = 0.0
                for i in range(n):
                    dot += q[i, p] * col[i]
                for i in range(n):
                    col[i] -= dot * q[i, p]
        acc = 0.0
        for i in range(n):
            acc += col[i] * col[i]
        norm = np.sqrt(acc)
        if norm <= rtol * scale:
            return q, j
        for i in range(n):
            q[i, j] = col[i] / norm
    return q, -1


def qr_orthonormalize(a, *, rtol=1e-12):
    """Orthonormal basis of the column span of a tall full-rank matrix.

    This is the Q factor of the QR decomposition with positive diagonal in
    R, so the result is unique. It is computed by Gram-Schmidt with
    reorthogonalization, which keeps ``||Q^T Q - I||`` at round-off level for
    numerically full-rank input.

    Raises
    ------
    RankDeficiencyError
        If column ``j`` is, to relative tolerance ``rtol``, in the span of
        the previous ones; ``column`` holds ``j``.
    """
    a = as_matrix(a)
    n, k = a.shape
    if n < k:
        raise ValueError(f"need rows >= cols to orthonormalize, got shape {a.shape}")
    q, bad = _cgs2(a, rtol)
    if bad >= 0:
        raise RankDeficiencyError(
            f"matrix is numerically rank deficient at column {bad}", column=int(bad)
        )
    return q


def solve_square(a, b, *, max_condition=SOLVE_MAX_CONDITION):
    """Solve ``a @ x = b`` for square ``a`` after a 2-norm condition check.

    Raises
    ------
    IllConditionedError
        If ``cond(a) >= max_condition``; carries the estimate as ``condition``.
    """
    a = as_matrix(a, "a")
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"a must be square, got shape {a.shape}")
    b = np.asarray(b, dtype=float)
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"incompatible shapes {a.shape} and {b.shape}")
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond >= max_condition:
        raise IllConditionedError(
            f"matrix is singular or ill-conditioned (condition {cond:.3e})", condition=cond
        )
    return np.linalg.solve(a, b)
