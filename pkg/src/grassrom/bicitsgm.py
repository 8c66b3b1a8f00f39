"""Bi-calibrated reconstruction of snapshot fields at untrained parameters.

Each trained snapshot matrix is summarized by a rank-q SVD triple
``(U_i, sigma_i, V_i)``. At a query parameter the spatial and temporal
subspaces are interpolated separately on their Grassmann manifolds. The
interpolated bases ``U, V`` are only defined up to a rotation, so the core
matrix that joins them has to be calibrated. Two policies are offered:

``"blend"`` (default)
    Every sample is rotated onto the interpolated frame by orthogonal
    Procrustes, ``R_i = procrustes_align(U, U_i)`` and
    ``P_i = procrustes_align(V, V_i)``, and the calibrated cores
    ``R_i diag(sigma_i) P_i^T`` are blended with the interpolation weights.
    The result does not depend on which representatives were interpolated.
``"anchor"``
    ``U`` and ``V`` are aligned to the nearest (or a fixed) trained sample and
    the singular values are interpolated entrywise, giving a diagonal core.

Either way the field estimate is returned in its own singular frame.

The offline stage (`bi_build`) does everything that depends on the full
dimensions N and N_t once:

* an orthonormal basis ``W`` of ``span{U_1, ..., U_Np}`` (and ``Z`` for the
  temporal bases), of dimension at most ``N_p * q``;
* the sample bases in those coordinates, ``C_i = W^T U_i``;
* the log maps of all samples at every admissible reference, in the same
  coordinates.

Every log-map velocity at ``U_ref`` lies in ``span{U_ref, U_i}``, so the
interpolation, exp map and calibration all run on (N_p q) x q or q x q
matrices. The online query (`bi_query`) touches N and N_t only to lift the
result.
"""

import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, LogMapDomainError
from .grassmann import check_orthonormal, exp_map
from .itsgm import (
    SampleSet,
    TangentCache,
    as_query,
    build_tangent_cache,
    default_interpolator,
    nearest_index,
)
from .linalg import polar_factors, thin_svd
from .matrix_io import read_matrix, read_samples, write_manifest, write_matrix

__all__ = [
    "BiConfig",
    "BiRomModel",
    "Reconstruction",
    "CostReport",
    "procrustes_align",
    "bi_build",
    "bi_query",
    "bi_query_coords",
    "bi_query_monolithic",
    "online_cost_report",
    "save_model",
    "load_model",
]


def procrustes_align(moving, target):
    """Orthogonal ``Q`` minimizing ``||moving @ Q - target||_F``.

    ``Q = U V^T`` where ``U S V^T`` is the SVD of ``moving.T @ target``.
    ``target`` may also be a stack of matrices shaped like ``moving``, in
    which case one rotation per target is returned.
    """
    moving = np.asarray(moving, dtype=float)
    target = np.asarray(target, dtype=float)
    if moving.ndim != 2 or target.shape[-2:] != moving.shape or target.ndim not in (2, 3):
        raise ValueError(f"shape mismatch: {moving.shape} vs {target.shape}")
    if target.ndim == 3:
        return polar_factors(moving.T @ target, label="procrustes")
    u, _, v = thin_svd(moving.T @ target, label="procrustes")
    return u @ v.T


CALIBRATIONS = ("blend", "anchor")


@dataclass(frozen=True)
class BiConfig:
    """Reference, calibration and anchor policies.

    For ``ref_index`` and ``anchor_index``, ``None`` selects the trained
    sample nearest to each query and an integer pins that sample.
    ``anchor_index`` is only used by the ``"anchor"`` calibration.
    """

    ref_index: int = None
    anchor_index: int = None
    calibration: str = "blend"

    def __post_init__(self):
        if self.calibration not in CALIBRATIONS:
            raise ValueError(f"calibration must be one of {CALIBRATIONS}, got {self.calibration!r}")

    def policy_string(self, which):
        value = getattr(self, which)
        return "nearest" if value is None else str(value)


@dataclass(frozen=True, eq=False)
class _Side:
    """Offline data for one family of bases (spatial or temporal)."""

    name: str
    lift: np.ndarray  # (n, r) orthonormal
    coords: np.ndarray  # (N_p, r, q), coords[i] = lift.T @ bases[i]
    caches: dict  # reference index -> TangentCache in reduced coordinates

    @property
    def reduced_dim(self):
        return self.lift.shape[1]


def _build_side(name, bases, refs):
    n_p, n, q = bases.shape
    concat = np.concatenate(list(bases), axis=1)
    lift = thin_svd(concat, label=f"lift-{name}").u
    coords = np.einsum("nr,pnq->prq", lift, bases)
    caches = {}
    for r in refs:
        # log maps in full dimension, as the from-scratch path computes them: near
        # the cut locus they amplify roundoff, so both paths must see the same inputs
        try:
            full = build_tangent_cache(bases, r)
        except LogMapDomainError as exc:
            raise LogMapDomainError(f"{name}: {exc}", condition=exc.condition) from None
        # the velocities lie in span(lift), so projecting them loses nothing
        caches[r] = TangentCache(r, coords[r], np.einsum("nr,pnq->prq", lift, full.velocities))
    return _Side(name, lift, coords, caches)


@dataclass(frozen=True, eq=False)
class BiRomModel:
    samples: SampleSet
    config: BiConfig
    spatial: _Side
    temporal: _Side

    @property
    def sigma_table(self):
        return self.samples.sigma

    @property
    def spatial_cache(self):
        return self.spatial.caches

    @property
    def temporal_cache(self):
        return self.temporal.caches

    @property
    def shape(self):
        """(N, N_t, q, N_p, d)."""
        s = self.samples
        return (s.u.shape[1], s.v.shape[1], s.u.shape[2], s.n_samples, s.dim)


@dataclass(frozen=True, eq=False)
class Reconstruction:
    field: np.ndarray
    spatial: np.ndarray
    temporal: np.ndarray
    sigma: np.ndarray
    ref_index: int = None
    anchor_index: int = None


@dataclass(frozen=True)
class CostReport:
    n_queries: int
    online_seconds: float
    scratch_seconds: float
    online_flops: float
    scratch_flops: float
    dims: tuple = field(default=())

    @property
    def speedup(self):
        return self.scratch_seconds / self.online_seconds

    def table(self):
        n, nt, q, n_p, d = self.dims
        rows = [
            f"N={n} N_t={nt} q={q} N_p={n_p} d={d} queries={self.n_queries}",
            f"{'stage':<14}{'median s/query':>16}{'flops/query':>16}",
            f"{'online':<14}{self.online_seconds:>16.3e}{self.online_flops:>16.3e}",
            f"{'from-scratch':<14}{self.scratch_seconds:>16.3e}{self.scratch_flops:>16.3e}",
            f"speedup={self.speedup:.2f}",
        ]
        return "\n".join(rows)


def bi_build(samples, config=BiConfig()):
    """Offline stage: reduced coordinates and tangent caches for both families."""
    if not samples.has_triples:
        raise ValueError("bi-calibrated models need full (U, sigma, V) triples")
    n_p = samples.n_samples
    for which in ("ref_index", "anchor_index"):
        idx = getattr(config, which)
        if idx is not None and not 0 <= idx < n_p:
            raise IndexError(f"{which}={idx} out of range for {n_p} samples")
    refs = range(n_p) if config.ref_index is None else [config.ref_index]
    spatial = _build_side("spatial", samples.u, refs)
    temporal = _build_side("temporal", samples.v, refs)
    return BiRomModel(samples, config, spatial, temporal)


def _interp_sigma(weights, table):
    sigma = weights @ table
    if np.any(sigma < 0):
        warnings.warn(
            f"interpolated singular values went negative (min {sigma.min():.3e}); clamping",
            RuntimeWarning,
            stacklevel=3,
        )
        sigma = np.maximum(sigma, 0.0)
    return sigma


def _indices(samples, config, g):
    near = None
    if config.ref_index is None or config.anchor_index is None:
        near = nearest_index(samples.params, g)
    ref = near if config.ref_index is None else config.ref_index
    anchor = near if config.anchor_index is None else config.anchor_index
    return ref, anchor


def _calibrate(bases, weights, coords, sigma_table, config, anchor):
    """Core matrix joining the interpolated bases, and the (possibly rotated) bases.

    ``coords`` holds the trained spatial and temporal bases in the same
    coordinates as ``bases``.
    """
    u, v = bases
    us, vs = coords
    if config.calibration == "anchor":
        u = u @ procrustes_align(u, us[anchor])
        v = v @ procrustes_align(v, vs[anchor])
        return u, np.diag(_interp_sigma(weights, sigma_table)), v
    used = np.flatnonzero(weights)
    k = len(used)
    # R_k = procrustes_align(u, us[k]) and P_k = procrustes_align(v, vs[k]), one stack
    rp = polar_factors(np.concatenate([u.T @ us[used], v.T @ vs[used]]), label="procrustes")
    r, p = rp[:k], rp[k:]
    # sum_k w_k R_k diag(sigma_k) P_k^T
    scaled = r * (weights[used, None] * sigma_table[used])[:, None, :]
    core = np.matmul(scaled, p.transpose(0, 2, 1)).sum(axis=0)
    return u, core, v


def _reconstruct(u, core, v, config):
    if config.calibration == "anchor":
        return u, np.diag(core).copy(), v
    a, s, b = thin_svd(core, label="core")
    return u @ a, s, v @ b


def _query_reduced(model, gamma, method):
    """Calibrated bases in reduced coordinates plus singular values."""
    samples = model.samples
    g = as_query(gamma, samples.dim)
    if method is None:
        method = default_interpolator(samples.dim)
    w = method.weights(samples.params, g)
    ref, anchor = _indices(samples, model.config, g)
    bases = []
    for side in (model.spatial, model.temporal):
        cache = side.caches[ref]
        bases.append(exp_map(cache.base, cache.combine(w)))
    coords = (model.spatial.coords, model.temporal.coords)
    u, core, v = _calibrate(bases, w, coords, samples.sigma, model.config, anchor)
    u, sigma, v = _reconstruct(u, core, v, model.config)
    return u, sigma, v, ref, anchor


def bi_query(model, gamma, method=None):
    """Online stage: reconstructed field at ``gamma``.

    Parameters
    ----------
    model : BiRomModel
    gamma : float or (d,) array_like
    method : Lagrange, Rbf or Idw, optional
        Scalar interpolant shared by the tangent coordinates and the
        calibrated cores (or singular values).
    """
    ur, sigma, vr, ref, anchor = _query_reduced(model, gamma, method)
    spatial = model.spatial.lift @ ur
    temporal = model.temporal.lift @ vr
    return Reconstruction(
        field=(spatial * sigma) @ temporal.T,
        spatial=spatial,
        temporal=temporal,
        sigma=sigma,
        ref_index=ref,
        anchor_index=anchor,
    )


def bi_query_coords(model, gamma, method=None):
    """Online stage without the lift.

    Returns ``(ur, sigma, vr)`` such that the field of `bi_query` is
    ``(model.spatial.lift @ ur) @ diag(sigma) @ (model.temporal.lift @ vr).T``.
    ``ur`` and ``vr`` have orthonormal columns.
    """
    ur, sigma, vr, _, _ = _query_reduced(model, gamma, method)
    return ur, sigma, vr


def bi_query_monolithic(samples, gamma, method=None, config=BiConfig()):
    """Same reconstruction without any offline stage, in full dimensions.

    Log maps are recomputed for every call; this is the reference path the
    cached model is checked and timed against.
    """
    g = as_query(gamma, samples.dim)
    if method is None:
        method = default_interpolator(samples.dim)
    w = method.weights(samples.params, g)
    ref, anchor = _indices(samples, config, g)
    bases = []
    for family in (samples.u, samples.v):
        cache = build_tangent_cache(family, ref)
        bases.append(exp_map(cache.base, cache.combine(w)))
    u, core, v = _calibrate(bases, w, (samples.u, samples.v), samples.sigma, config, anchor)
    spatial, sigma, temporal = _reconstruct(u, core, v, config)
    return Reconstruction(
        field=(spatial * sigma) @ temporal.T,
        spatial=spatial,
        temporal=temporal,
        sigma=sigma,
        ref_index=ref,
        anchor_index=anchor,
    )


def _flop_estimates(model):
    n, nt, q, n_p, _ = model.shape
    online = 2.0 * n * nt * q
    scratch = 2.0 * n * nt * q
    for dim, r in ((n, model.spatial.reduced_dim), (nt, model.temporal.reduced_dim)):
        # combine + exp (QR-reduced SVD, assembly, QR) + N_p Procrustes + lift
        online += 2 * n_p * r * q + 16 * r * q * q + n_p * (2 * r * q * q + 40 * q**3)
        online += 2 * dim * r * q
        # base^T target, target b, base a, residual a^T, plus the q x q SVD
        per_log = 8 * dim * q * q + 40 * q**3
        scratch += (n_p - 1) * per_log + 2 * n_p * dim * q + 16 * dim * q * q
        scratch += n_p * (2 * dim * q * q + 40 * q**3)
    return online, scratch


def online_cost_report(model, n_queries=20, method=None, seed=0):
    """Time the cached online query against the from-scratch path.

    Query parameters are drawn uniformly from the bounding box of the
    trained parameters. The two paths are timed alternately on each query
    and the per-query medians are reported, so a burst of load on the
    machine hits both paths alike and single outliers do not count.
    """
    samples = model.samples
    rng = np.random.default_rng(seed)
    lo = samples.params.min(axis=0)
    hi = samples.params.max(axis=0)
    queries = lo + (hi - lo) * rng.random((n_queries, samples.dim))

    # warm-up: JIT compilation and first-touch allocations
    bi_query(model, queries[0], method)
    bi_query_monolithic(samples, queries[0], method, model.config)
    online = np.empty(n_queries)
    scratch = np.empty(n_queries)
    for k, g in enumerate(queries):
        t0 = time.perf_counter()
        bi_query(model, g, method)
        t1 = time.perf_counter()
        bi_query_monolithic(samples, g, method, model.config)
        t2 = time.perf_counter()
        online[k] = t1 - t0
        scratch[k] = t2 - t1

    online_flops, scratch_flops = _flop_estimates(model)
    return CostReport(
        n_queries,
        float(np.median(online)),
        float(np.median(scratch)),
        online_flops,
        scratch_flops,
        model.shape,
    )


def check_model(model):
    """Re-verify the orthonormality of every stored reduced basis."""
    for side in (model.spatial, model.temporal):
        check_orthonormal(side.lift, f"{side.name} lift")
        for i, c in enumerate(side.coords):
            check_orthonormal(c, f"{side.name} coords[{i}]")


def _split(stacked, n_p):
    return stacked.reshape(n_p, -1, stacked.shape[1])


def save_model(model, directory, fmt="bin"):
    """Write ``model`` to ``directory``.

    The directory holds the sample manifest with its matrix files, the lift
    bases, reduced sample coordinates and cached velocities of both sides
    (per-sample blocks stacked vertically), the sigma table, and
    ``meta.txt`` with ``key=value`` lines.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ext = ".csv" if fmt == "csv" else ".bin"
    s = model.samples
    entries = []
    for i in range(s.n_samples):
        names = {key: f"{key}_{i:03d}{ext}" for key in ("u", "sigma", "v")}
        write_matrix(directory / names["u"], s.u[i], fmt)
        write_matrix(directory / names["sigma"], s.sigma[i], fmt)
        write_matrix(directory / names["v"], s.v[i], fmt)
        entries.append({"gamma": s.params[i], **names})
    write_manifest(directory / "manifest.txt", entries)
    write_matrix(directory / f"sigma_table{ext}", s.sigma, fmt)
    refs = sorted(model.spatial.caches)
    for side in (model.spatial, model.temporal):
        write_matrix(directory / f"{side.name}_lift{ext}", side.lift, fmt)
        write_matrix(directory / f"{side.name}_coords{ext}", np.vstack(side.coords), fmt)
        for r in refs:
            vel = np.vstack(side.caches[r].velocities)
            write_matrix(directory / f"{side.name}_velocities_{r:03d}{ext}", vel, fmt)
    n, nt, q, n_p, d = model.shape
    meta = {
        "N": n,
        "N_t": nt,
        "q": q,
        "N_p": n_p,
        "d": d,
        "ref_policy": model.config.policy_string("ref_index"),
        "anchor_policy": model.config.policy_string("anchor_index"),
        "calibration": model.config.calibration,
        "format": "csv" if fmt == "csv" else "bin",
        "refs": ",".join(str(r) for r in refs),
    }
    text = "".join(f"{key}={value}\n" for key, value in meta.items())
    (directory / "meta.txt").write_text(text)


def _read_meta(path):
    meta = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}: expected key=value, got {line!r}", line=lineno)
        meta[key.strip()] = value.strip()
    return meta


def load_model(directory):
    """Read a model written by `save_model`; no log maps are recomputed."""
    directory = Path(directory)
    meta = _read_meta(directory / "meta.txt")
    try:
        ext = ".csv" if meta["format"] == "csv" else ".bin"
        refs = [int(r) for r in meta["refs"].split(",")]

        def policy(key):
            return None if meta[key] == "nearest" else int(meta[key])

        config = BiConfig(policy("ref_policy"), policy("anchor_policy"), meta["calibration"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{directory / 'meta.txt'}: bad or missing field {exc}") from None
    samples = read_samples(directory / "manifest.txt")
    n_p = samples.n_samples
    sides = []
    for name, bases in (("spatial", samples.u), ("temporal", samples.v)):
        lift = read_matrix(directory / f"{name}_lift{ext}")
        coords = _split(read_matrix(directory / f"{name}_coords{ext}"), n_p)
        caches = {}
        for r in refs:
            vel = _split(read_matrix(directory / f"{name}_velocities_{r:03d}{ext}"), n_p)
            caches[r] = TangentCache(r, coords[r], vel)
        sides.append(_Side(name, lift, coords, caches))
    model = BiRomModel(samples, config, *sides)
    shape = tuple(int(meta[k]) for k in ("N", "N_t", "q", "N_p", "d"))
    if model.shape != shape:
        raise ConfigError(f"{directory}: stored shape {model.shape} != metadata {shape}")
    check_model(model)
    return model
