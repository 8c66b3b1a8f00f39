"""Proper orthogonal decomposition of snapshot matrices."""

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, thin_svd

__all__ = ["Rank", "Energy", "PodResult", "compute_pod", "ZERO_MODE_RTOL"]

# modes whose singular value is below this fraction of the largest are never kept
ZERO_MODE_RTOL = 1e-13


@dataclass(frozen=True)
class Rank:
    q: int

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"rank must be a positive integer, got {self.q}")


@dataclass(frozen=True)
class Energy:
    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"energy threshold must lie in (0, 1], got {self.epsilon}")


@dataclass(frozen=True, eq=False)
class PodResult:
    """Truncated POD of a snapshot matrix ``S ~ modes @ diag(singular_values) @ temporal.T``.

    Attributes
    ----------
    modes : (N, q) ndarray
        Orthonormal spatial modes.
    singular_values : (q,) ndarray
        Retained singular values, non-increasing.
    temporal : (N_t, q) ndarray
        Orthonormal right singular vectors.
    energy_fraction : float
        Share of the total squared singular values captured by the retained modes.
    spectrum : ndarray
        All singular values of the (centered) snapshot matrix.
    mean : (N,) ndarray or None
        Subtracted column mean when centering was requested.
    """

    modes: np.ndarray
    singular_values: np.ndarray
    temporal: np.ndarray
    energy_fraction: float
    spectrum: np.ndarray
    mean: np.ndarray = None

    @property
    def rank(self):
        return self.modes.shape[1]

    def reconstruct(self):
        field = (self.modes * self.singular_values) @ self.temporal.T
        if self.mean is not None:
            field = field + self.mean[:, None]
        return field


def _energy_rank(spectrum, epsilon):
    energy = np.cumsum(spectrum**2)
    frac = energy / energy[-1]
    # tolerate round-off on thresholds met exactly, e.g. 9/10 >= 0.9
    return int(np.argmax(frac >= epsilon - 1e-12)) + 1


def _svd_snapshots(s):
    """Method of snapshots: eigenvectors of the N_t x N_t correlation matrix."""
    corr = s.T @ s
    _, lam, w = thin_svd(corr, label="pod-snapshots")
    sigma = np.sqrt(np.maximum(lam, 0.0))
    u = np.zeros((s.shape[0], len(sigma)))
    nz = sigma > 0
    u[:, nz] = (s @ w[:, nz]) / sigma[nz]
    return u, sigma, w


def compute_pod(snapshots, rule, *, center=False, method="svd"):
    """POD modes of ``snapshots`` (N x N_t, one snapshot per column).

    Parameters
    ----------
    snapshots : (N, N_t) array_like
    rule : Rank or Energy
        ``Rank(q)`` keeps q modes; ``Energy(eps)`` keeps the fewest modes
        whose energy fraction reaches ``eps``.
    center : bool
        Subtract the temporal mean before decomposing.
    method : {"svd", "snapshots"}
        ``"svd"`` factors the snapshot matrix directly (QR-reduced Jacobi,
        so the cost is already O(N N_t^2)); ``"snapshots"`` diagonalizes the
        N_t x N_t correlation matrix, which squares the condition number.

    Modes with singular value below ``ZERO_MODE_RTOL`` times the largest are
    dropped even when ``Rank`` asks for them; check ``result.rank``.
    """
    s = as_matrix(snapshots, "snapshots")
    n, nt = s.shape
    if isinstance(rule, Rank) and rule.q > min(n, nt):
        raise ValueError(f"requested rank {rule.q} exceeds min(N, N_t) = {min(n, nt)}")
    mean = None
    if center:
        mean = s.mean(axis=1)
        s = s - mean[:, None]
    if not np.any(s):
        raise ValueError("snapshot matrix is identically zero")

    if method == "svd":
        u, sigma, v = thin_svd(s, label="pod")
    elif method == "snapshots":
        u, sigma, v = _svd_snapshots(s)
    else:
        raise ValueError(f"unknown POD method {method!r}")

    if isinstance(rule, Rank):
        q = rule.q
    elif isinstance(rule, Energy):
        q = _energy_rank(sigma, rule.epsilon)
    else:
        raise TypeError(f"expected Rank or Energy, got {type(rule).__name__}")
    q = min(q, int(np.count_nonzero(sigma >= ZERO_MODE_RTOL * sigma[0])))

    total = np.sum(sigma**2)
    return PodResult(
        modes=u[:, :q].copy(),
        singular_values=sigma[:q].copy(),
        temporal=v[:, :q].copy(),
        energy_fraction=float(min(1.0, np.sum(sigma[:q] ** 2) / total)),
        spectrum=sigma,
        mean=mean,
    )
