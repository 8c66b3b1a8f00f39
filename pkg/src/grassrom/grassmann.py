"""Geometry of the Grassmann manifold of q-planes in R^N.

A point is represented by any N x q matrix with orthonormal columns; two
representatives ``phi`` and ``phi @ Q`` (``Q`` orthogonal) are the same
point. Tangent vectors at ``phi`` are N x q matrices ``delta`` with
``phi.T @ delta = 0``.
"""

from dataclasses import dataclass

import numba
import numpy as np

from .errors import LogMapDomainError, RankDeficiencyError
from .linalg import SOLVE_MAX_CONDITION, _cgs2, as_matrix, log_svd, svd_factors, thin_svd

__all__ = [
    "TangentVector",
    "check_orthonormal",
    "principal_angles",
    "geodesic_distance",
    "log_map",
    "exp_map",
]

ORTHONORMAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        if self.base.shape != self.delta.shape:
            raise ValueError(
                f"tangent vector shape {self.delta.shape} != base shape {self.base.shape}"
            )

    @property
    def norm(self):
        return float(np.linalg.norm(self.delta))

    def scaled(self, t):
        return TangentVector(self.base, t * self.delta)

    def horizontality(self):
        """Relative size of the component along the base subspace."""
        return float(np.linalg.norm(self.base.T @ self.delta) / max(1.0, self.norm))


def check_orthonormal(phi, name="basis", tol=ORTHONORMAL_TOL):
    phi = as_matrix(phi, name)
    n, q = phi.shape
    if n < q:
        raise ValueError(f"{name} must be tall (N >= q), got shape {phi.shape}")
    err = np.linalg.norm(phi.T @ phi - np.eye(q))
    if err > tol:
        raise ValueError(f"{name} columns are not orthonormal (||B^T B - I||_F = {err:.2e})")
    return phi


def _same_shape(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or x.shape != y.shape:
        raise ValueError(f"subspace shapes differ: {x.shape} vs {y.shape}")
    return x, y


def principal_angles(x, y):
    """Principal angles between span(x) and span(y), ascending, in [0, pi/2].

    Cosines come from the singular values of ``x.T @ y`` and sines from those
    of ``y - x @ (x.T @ y)``. Angles below pi/4 are taken from the sines,
    where arccos would lose half the significant digits. Identical
    representatives give exact zeros.
    """
    x, y = _same_shape(x, y)
    if y is x or np.array_equal(x, y):
        return np.zeros(x.shape[1])
    m = x.T @ y
    cos = np.clip(thin_svd(m, label="angles").sigma, 0.0, 1.0)
    sin = np.clip(np.sort(thin_svd(y - x @ m, label="angles").sigma), 0.0, 1.0)
    small = cos * cos >= 0.5
    theta = np.where(small, np.arcsin(sin), np.arccos(cos))
    return np.maximum.accumulate(theta)


def geodesic_distance(x, y):
    """Root of the sum of squared principal angles."""
    theta = principal_angles(x, y)
    return float(np.sqrt(np.sum(theta * theta)))


def log_map(base, target):
    """Initial velocity of the geodesic from span(base) to span(target).

    Raises
    ------
    LogMapDomainError
        When ``base.T @ target`` is singular or ill-conditioned, i.e. some
        principal angle is (numerically) pi/2.
    """
    base, target = _same_shape(base, target)
    if target is base or np.array_equal(target, base):
        return TangentVector(base, np.zeros_like(base))
    # principal vectors from base^T target = a diag(cos) b^T; the residual columns
    # then carry the sines, and atan2 keeps angles near pi/2 well conditioned
    # (the textbook residual @ inv(base^T target) form loses 1/cos of them)
    a, c, b = thin_svd(base.T @ target, label="log")
    condition = c[0] / c[-1] if c[-1] > 0 else np.inf
    if condition >= SOLVE_MAX_CONDITION:
        raise LogMapDomainError(
            "target subspace is outside the logarithm neighborhood of the base "
            f"(condition of base^T target = {condition:.3e})",
            condition=condition,
        )
    residual = target @ b - (base @ a) * c
    s = np.linalg.norm(residual, axis=0)
    theta = np.arctan2(s, c)
    scale = np.divide(theta, s, out=np.ones_like(s), where=s > 0)
    delta = (residual * scale) @ a.T
    return TangentVector(base, delta)


@numba.njit(cache=True)
def _geodesic_point(base, u, s, v, rtol):
    """Orthonormalized ``base v cos(s) + u sin(s)``, plus the `_cgs2` status."""
    y = base @ v
    for j in range(y.shape[1]):
        c = np.cos(s[j])
        sn = np.sin(s[j])
        for i in range(y.shape[0]):
            y[i, j] = y[i, j] * c + u[i, j] * sn
    return _cgs2(y, rtol)


def exp_map(base, velocity):
    """Endpoint of the geodesic leaving span(base) with the given velocity.

    ``velocity`` is a `TangentVector` attached to ``base`` or a bare N x q
    array. The result is re-orthonormalized; a zero velocity returns a copy
    of ``base``.
    """
    base = np.asarray(base, dtype=float)
    if isinstance(velocity, TangentVector):
        vb = velocity.base
        if vb is not base and (vb.shape != base.shape or np.max(np.abs(vb - base)) > 1e-12):
            raise ValueError("velocity is attached to a different base point")
        delta = velocity.delta
    else:
        delta = np.asarray(velocity, dtype=float)
    _same_shape(base, delta)
    if not np.any(delta):
        return base.copy()
    if not np.isfinite(delta).all():
        raise ValueError("velocity has non-finite entries")
    log_svd(delta.shape, "exp")
    u, s, v = svd_factors(delta)
    # columns of u for zero singular values are multiplied by sin(0) = 0
    q, bad = _geodesic_point(np.ascontiguousarray(base), u, s, v, 1e-12)
    if bad >= 0:
        raise RankDeficiencyError(
            f"geodesic endpoint lost rank at column {bad}; is the base orthonormal?",
            column=int(bad),
        )
    return q
