"""Subspace interpolation through the tangent space of the Grassmann manifold.

Trained bases ``U_i`` at parameters ``gamma_i`` are mapped by the log map to
initial velocities at a reference basis ``U_ref``. The velocities live in a
flat space, so any scalar interpolant can be applied entry by entry; the
interpolated velocity is mapped back with the exp map.

All interpolators used here are linear in the data, so "entrywise scalar
interpolation" reduces to one weight per sample: ``X(gamma) = sum_i w_i X_i``.
Sample indices are 0-based.
"""

from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedError, LogMapDomainError
from .grassmann import TangentVector, check_orthonormal, exp_map, log_map
from .linalg import SOLVE_MAX_CONDITION, solve_square

__all__ = [
    "SampleSet",
    "TangentCache",
    "Lagrange",
    "Rbf",
    "Idw",
    "default_interpolator",
    "nearest_index",
    "build_tangent_cache",
    "itsgm_offline",
    "interpolate_tangent",
    "itsgm_interpolate",
]

EXACT_MATCH_TOL = 1e-14


def as_params(params):
    p = np.asarray(params, dtype=float)
    if p.ndim == 0:
        p = p.reshape(1, 1)
    elif p.ndim == 1:
        p = p[:, None]
    if p.ndim != 2:
        raise ValueError(f"parameters must be a (N_p, d) array, got shape {p.shape}")
    return p


def as_query(gamma, d):
    g = np.atleast_1d(np.asarray(gamma, dtype=float)).ravel()
    if g.shape != (d,):
        raise ValueError(f"query has {g.size} components, samples have {d}")
    return g


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Trained parameters with their rank-q SVD triples.

    Attributes
    ----------
    params : (N_p, d) ndarray
    u : (N_p, N, q) ndarray
        Orthonormal spatial bases.
    sigma : (N_p, q) ndarray or None
        Singular values; optional for basis-only interpolation.
    v : (N_p, N_t, q) ndarray or None
        Orthonormal temporal bases; optional for basis-only interpolation.
    """

    params: np.ndarray
    u: np.ndarray
    sigma: np.ndarray = None
    v: np.ndarray = None

    def __post_init__(self):
        params = as_params(self.params)
        object.__setattr__(self, "params", params)
        n_p = params.shape[0]
        if n_p < 2:
            raise ValueError(f"need at least 2 samples, got {n_p}")
        for i in range(n_p):
            for j in range(i + 1, n_p):
                if np.array_equal(params[i], params[j]):
                    raise ValueError(f"samples {i} and {j} share the parameter {params[i]}")
        object.__setattr__(self, "u", self._stack(self.u, "u"))
        q = self.u.shape[2]
        if (self.sigma is None) != (self.v is None):
            raise ValueError("sigma and v must be given together")
        if self.sigma is not None:
            sigma = np.asarray(self.sigma, dtype=float)
            if sigma.shape != (n_p, q):
                raise ValueError(f"sigma must have shape {(n_p, q)}, got {sigma.shape}")
            if np.any(sigma < 0):
                raise ValueError("singular values must be non-negative")
            object.__setattr__(self, "sigma", sigma)
            v = self._stack(self.v, "v")
            if v.shape[2] != q:
                raise ValueError(f"temporal bases have {v.shape[2]} columns, spatial have {q}")
            object.__setattr__(self, "v", v)

    def _stack(self, bases, name):
        try:
            arr = np.array([np.asarray(b, dtype=float) for b in bases])
        except ValueError:
            raise ValueError(f"all {name} bases must share one shape") from None
        if arr.ndim != 3 or arr.shape[0] != len(self.params):
            raise ValueError(f"expected {len(self.params)} {name} bases of equal shape")
        for i, b in enumerate(arr):
            check_orthonormal(b, f"{name}[{i}]")
        return arr

    @classmethod
    def from_pods(cls, params, pods):
        """Assemble from a sequence of `PodResult` sharing one rank."""
        ranks = {p.rank for p in pods}
        if len(ranks) != 1:
            raise ValueError(f"POD ranks differ across samples: {sorted(ranks)}")
        return cls(
            params,
            [p.modes for p in pods],
            np.array([p.singular_values for p in pods]),
            [p.temporal for p in pods],
        )

    @property
    def n_samples(self):
        return self.params.shape[0]

    @property
    def dim(self):
        return self.params.shape[1]

    @property
    def has_triples(self):
        return self.sigma is not None

    def field(self, i):
        """Rank-q snapshot field of sample ``i``."""
        return (self.u[i] * self.sigma[i]) @ self.v[i].T


def nearest_index(params, gamma):
    """Index of the trained parameter closest to ``gamma`` (lowest index on ties)."""
    params = as_params(params)
    g = as_query(gamma, params.shape[1])
    return int(np.argmin(np.linalg.norm(params - g, axis=1)))


def _pairwise(a, b):
    return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)


@dataclass(frozen=True)
class Lagrange:
    """Polynomial interpolation through all samples; scalar parameters only."""

    def weights(self, params, gamma):
        params = as_params(params)
        if params.shape[1] != 1:
            raise ValueError(f"Lagrange interpolation needs d = 1, got d = {params.shape[1]}")
        g = as_query(gamma, 1)[0]
        x = params[:, 0]
        diff = g - x
        hit = np.flatnonzero(diff == 0.0)
        if hit.size:
            w = np.zeros(len(x))
            w[hit[0]] = 1.0
            return w
        # w_i = prod_{k != i} (g - x_k) / (x_i - x_k)
        den = x[:, None] - x[None, :]
        np.fill_diagonal(den, 1.0)
        return np.prod(diff) / (diff * np.prod(den, axis=1))


_KERNELS = {
    "gaussian": lambda r: np.exp(-(r * r)),
    "multiquadric": lambda r: np.sqrt(1.0 + r * r),
}


def _thin_plate(r):
    out = np.zeros_like(r)
    nz = r > 0
    out[nz] = r[nz] ** 2 * np.log(r[nz])
    return out


@dataclass(frozen=True)
class Rbf:
    """Radial basis function interpolation.

    ``shape`` scales distances for the gaussian and multiquadric kernels and
    defaults to the mean pairwise parameter distance. The thin-plate kernel
    is scale-free; it is augmented with a degree-1 polynomial and ignores
    ``shape``.
    """

    kernel: str = "gaussian"
    shape: float = None

    def __post_init__(self):
        if self.kernel not in ("gaussian", "multiquadric", "thin-plate"):
            raise ValueError(f"unknown RBF kernel {self.kernel!r}")
        if self.shape is not None and not self.shape > 0:
            raise ValueError(f"RBF shape must be positive, got {self.shape}")

    def resolved_shape(self, params):
        if self.shape is not None:
            return float(self.shape)
        d = _pairwise(params, params)
        n = len(params)
        return float(d.sum() / (n * (n - 1)))

    def weights(self, params, gamma):
        params = as_params(params)
        g = as_query(gamma, params.shape[1])
        n, dim = params.shape
        if self.kernel == "thin-plate":
            k = _thin_plate(_pairwise(params, params))
            poly = np.hstack([np.ones((n, 1)), params])
            m = poly.shape[1]
            lhs = np.block([[k, poly], [poly.T, np.zeros((m, m))]])
            rhs = np.concatenate([_thin_plate(np.linalg.norm(params - g, axis=1)), [1.0], g])
        else:
            eps = self.resolved_shape(params)
            phi = _KERNELS[self.kernel]
            lhs = phi(_pairwise(params, params) / eps)
            rhs = phi(np.linalg.norm(params - g, axis=1) / eps)
        try:
            # cardinal weights: lhs is symmetric
            w = solve_square(lhs, rhs, max_condition=SOLVE_MAX_CONDITION)
        except IllConditionedError as exc:
            raise IllConditionedError(
                f"RBF kernel matrix is singular or ill-conditioned ({exc.condition:.3e})",
                condition=exc.condition,
            ) from None
        return w[:n]


@dataclass(frozen=True)
class Idw:
    """Inverse distance weighting, ``w_i ~ |gamma - gamma_i|^-power``."""

    power: float = 2.0

    def __post_init__(self):
        if not self.power > 0:
            raise ValueError(f"IDW power must be positive, got {self.power}")

    def weights(self, params, gamma):
        params = as_params(params)
        g = as_query(gamma, params.shape[1])
        dist = np.linalg.norm(params - g, axis=1)
        w = np.zeros(len(dist))
        j = int(np.argmin(dist))
        if dist[j] <= EXACT_MATCH_TOL:
            w[j] = 1.0
            return w
        w = dist ** (-self.power)
        return w / w.sum()


def default_interpolator(dim):
    return Lagrange() if dim == 1 else Rbf()


@dataclass(frozen=True, eq=False)
class TangentCache:
    """Log-mapped samples at one reference basis.

    Attributes
    ----------
    ref_index : int
    base : (N, q) ndarray
        The reference basis.
    velocities : (N_p, N, q) ndarray
        ``velocities[i] = log_map(base, bases[i]).delta``; the reference row is zero.
    """

    ref_index: int
    base: np.ndarray
    velocities: np.ndarray

    def velocity(self, i):
        return TangentVector(self.base, self.velocities[i])

    def combine(self, weights):
        vel = self.velocities
        flat = np.asarray(weights, dtype=float) @ vel.reshape(vel.shape[0], -1)
        return TangentVector(self.base, flat.reshape(vel.shape[1:]))


def build_tangent_cache(bases, ref_index):
    """Log-map every basis in ``bases`` to the tangent space at ``bases[ref_index]``."""
    bases = np.asarray(bases, dtype=float)
    n_p = bases.shape[0]
    if not 0 <= ref_index < n_p:
        raise IndexError(f"reference index {ref_index} out of range for {n_p} samples")
    base = bases[ref_index]
    velocities = np.zeros_like(bases)
    for i in range(n_p):
        if i == ref_index:
            continue
        try:
            velocities[i] = log_map(base, bases[i]).delta
        except LogMapDomainError as exc:
            smin = np.linalg.svd(base.T @ bases[i], compute_uv=False).min()
            raise LogMapDomainError(
                f"sample {i} is outside the log neighborhood of reference {ref_index} "
                f"(smallest singular value of U_ref^T U_i = {smin:.3e})",
                condition=exc.condition,
            ) from None
    return TangentCache(ref_index, base, velocities)


def itsgm_offline(samples, ref_index):
    """Tangent-space images of the spatial bases of ``samples``."""
    return build_tangent_cache(samples.u, ref_index)


def interpolate_tangent(cache, samples, gamma, method):
    """Interpolated velocity at ``gamma`` from a tangent cache."""
    w = method.weights(samples.params, gamma)
    return cache.combine(w)


def itsgm_interpolate(samples, gamma, ref_index=None, method=None, cache=None):
    """Interpolated spatial subspace at an untrained parameter.

    Parameters
    ----------
    samples : SampleSet
    gamma : float or (d,) array_like
    ref_index : int, optional
        Reference sample; defaults to the trained parameter nearest ``gamma``.
        Ignored when ``cache`` is given.
    method : Lagrange, Rbf or Idw, optional
        Defaults to Lagrange for scalar parameters and a gaussian RBF otherwise.
    cache : TangentCache, optional
        Reuse a precomputed offline stage.

    Returns
    -------
    (N, q) ndarray
        Orthonormal representative of the interpolated subspace.
    """
    if method is None:
        method = default_interpolator(samples.dim)
    if cache is None:
        if ref_index is None:
            ref_index = nearest_index(samples.params, gamma)
        cache = itsgm_offline(samples, ref_index)
    return exp_map(cache.base, interpolate_tangent(cache, samples, gamma, method))
