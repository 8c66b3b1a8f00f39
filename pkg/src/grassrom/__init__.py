"""Parametric reduced-order models by interpolation on Grassmann manifolds."""

from .bicitsgm import (
    BiConfig,
    BiRomModel,
    CostReport,
    Reconstruction,
    bi_build,
    bi_query,
    bi_query_coords,
    bi_query_monolithic,
    load_model,
    online_cost_report,
    procrustes_align,
    save_model,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    FitnessError,
    GrassromError,
    IllConditionedError,
    LogMapDomainError,
    MatrixFormatError,
    RankDeficiencyError,
)
from .ga import GaConfig, GaTrace, Individual, reduced_fitness, run_ga
from .grassmann import TangentVector, exp_map, geodesic_distance, log_map, principal_angles
from .itsgm import Idw, Lagrange, Rbf, SampleSet, itsgm_interpolate, itsgm_offline
from .linalg import ThinSvd, polar_factors, qr_orthonormalize, solve_square, svd_trace, thin_svd
from .matrix_io import read_manifest, read_matrix, read_samples, write_manifest, write_matrix
from .pod import Energy, PodResult, Rank, compute_pod
from .toyflow import RotatingSubspace, TranslatingPulse, exact_subspace, generate_snapshots

__version__ = "0.1.0"
