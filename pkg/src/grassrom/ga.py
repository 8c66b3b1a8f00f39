"""Real-coded genetic algorithm and the reduced-model fitness for inverse problems.

The GA maximizes a fitness over a box of real parameters with tournament
selection, BLX-alpha blend crossover, Gaussian mutation and elitism. All
random numbers come from one ``numpy.random.Generator`` consumed on the
calling thread; fitness values may be computed by any ``map``-like callable
(e.g. ``ThreadPoolExecutor.map``) and are joined in population order, so a
run is reproducible from its seed regardless of how evaluations are spread.
"""

import csv
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .bicitsgm import bi_query_coords
from .errors import FitnessError
from .itsgm import as_query

__all__ = [
    "GaConfig",
    "Individual",
    "GaTrace",
    "run_ga",
    "select_tournament",
    "crossover_blend",
    "mutate_gaussian",
    "ReducedFitness",
    "reduced_fitness",
]

STAGNATION_TOL = 1e-12


@dataclass(frozen=True)
class GaConfig:
    """GA hyperparameters.

    ``mutation_sigma`` is a fraction of each gene's range. ``stagnation``
    stops the run after that many generations without a best-fitness gain
    above 1e-12; ``None`` always runs all ``generations``.
    """

    population_size: int = 30
    generations: int = 40
    crossover_rate: float = 0.9
    mutation_rate: float = 0.2
    mutation_sigma: float = 0.1
    elitism_count: int = 1
    bounds: tuple = ((0.0, 1.0),)
    tournament_size: int = 3
    rng_seed: int = 0
    blend_alpha: float = 0.5
    stagnation: int = None

    def __post_init__(self):
        bounds = np.asarray(self.bounds, dtype=float)
        if bounds.ndim != 2 or bounds.shape[1] != 2 or len(bounds) == 0:
            raise ValueError(f"bounds must be a sequence of (low, high) pairs, got {self.bounds}")
        if not np.all(np.isfinite(bounds)) or np.any(bounds[:, 0] >= bounds[:, 1]):
            raise ValueError(f"each bound needs finite low < high, got {self.bounds}")
        object.__setattr__(self, "bounds", tuple(map(tuple, bounds.tolist())))
        if int(self.population_size) != self.population_size or self.population_size < 1:
            raise ValueError(f"population_size must be a positive integer, got {self.population_size}")
        if int(self.generations) != self.generations or self.generations < 1:
            raise ValueError(f"generations must be a positive integer, got {self.generations}")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        if not self.mutation_sigma > 0:
            raise ValueError(f"mutation_sigma must be positive, got {self.mutation_sigma}")
        if not 0 <= self.elitism_count < self.population_size:
            raise ValueError(
                f"elitism_count must be in [0, population_size), got {self.elitism_count}"
            )
        if self.tournament_size < 2:
            raise ValueError(f"tournament_size must be >= 2, got {self.tournament_size}")
        if not self.blend_alpha >= 0:
            raise ValueError(f"blend_alpha must be non-negative, got {self.blend_alpha}")
        if self.stagnation is not None and self.stagnation < 1:
            raise ValueError(f"stagnation must be a positive integer, got {self.stagnation}")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError(f"rng_seed must be a 64-bit unsigned integer, got {self.rng_seed}")

    @property
    def dim(self):
        return len(self.bounds)

    @property
    def bounds_array(self):
        return np.array(self.bounds)


@dataclass(frozen=True, eq=False)
class Individual:
    genes: np.ndarray
    fitness: float = None

    @property
    def evaluated(self):
        return self.fitness is not None


@dataclass(eq=False)
class GaTrace:
    """Per-generation record of a run.

    ``outside_hull[g]`` counts the individuals of generation ``g`` whose
    genes lie outside the trained parameter hull (always 0 when the fitness
    has no notion of a hull).
    """

    best_fitness: list = field(default_factory=list)
    mean_fitness: list = field(default_factory=list)
    best_genes: list = field(default_factory=list)
    outside_hull: list = field(default_factory=list)
    evaluations: int = 0

    def __len__(self):
        return len(self.best_fitness)

    def rows(self):
        for g in range(len(self)):
            yield [g, self.best_fitness[g], self.mean_fitness[g], *self.best_genes[g], self.outside_hull[g]]

    def header(self):
        d = len(self.best_genes[0]) if self.best_genes else 0
        return ["generation", "best_fitness", "mean_fitness"] + [f"gene_{k}" for k in range(d)] + [
            "outside_hull"
        ]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.header())
            for row in self.rows():
                writer.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])


def _clip(genes, bounds):
    return np.clip(genes, bounds[:, 0], bounds[:, 1])


def select_tournament(population, size, rng):
    """Fittest of ``size`` individuals drawn uniformly with replacement.

    Ties go to the earliest draw.
    """
    if len(population) == 0:
        raise ValueError("cannot select from an empty population")
    picks = rng.integers(len(population), size=size)
    best = population[picks[0]]
    for k in picks[1:]:
        if population[k].fitness > best.fitness:
            best = population[k]
    return best


def crossover_blend(a, b, alpha, rng, bounds=None):
    """BLX-alpha: each child gene is uniform on the parents' interval widened by ``alpha``.

    Children are clipped to ``bounds`` ((d, 2) array) when given.
    """
    ga = np.asarray(a.genes, dtype=float)
    gb = np.asarray(b.genes, dtype=float)
    if ga.shape != gb.shape:
        raise ValueError(f"parents have different gene counts: {ga.shape} vs {gb.shape}")
    lo = np.minimum(ga, gb)
    hi = np.maximum(ga, gb)
    span = hi - lo
    children = rng.uniform(lo - alpha * span, hi + alpha * span, size=(2, ga.size))
    if bounds is not None:
        children = _clip(children, np.asarray(bounds, dtype=float))
    return Individual(children[0]), Individual(children[1])


def mutate_gaussian(x, rate, sigma, rng, bounds):
    """Perturb each gene with probability ``rate`` by N(0, (sigma * range)^2), then clip.

    An individual left unchanged keeps its fitness.
    """
    bounds = np.asarray(bounds, dtype=float)
    genes = np.asarray(x.genes, dtype=float)
    hit = rng.random(genes.size) < rate
    step = rng.normal(0.0, 1.0, genes.size) * sigma * (bounds[:, 1] - bounds[:, 0])
    if not hit.any():
        return x
    return Individual(_clip(np.where(hit, genes + step, genes), bounds))


def _evaluate(population, fitness, map_fn, trace):
    todo = [i for i, ind in enumerate(population) if not ind.evaluated]
    values = list(map_fn(fitness, [population[i].genes.copy() for i in todo]))
    trace.evaluations += len(todo)
    out = list(population)
    for i, val in zip(todo, values):
        val = float(val)
        if np.isnan(val):
            genes = population[i].genes
            raise FitnessError(f"fitness returned NaN for genes {np.array2string(genes)}", genes=genes)
        out[i] = replace(population[i], fitness=val)
    return out


def _check_bounds(population, bounds):
    for ind in population:
        if np.any(ind.genes < bounds[:, 0]) or np.any(ind.genes > bounds[:, 1]):
            raise RuntimeError(f"individual left its bounds: {ind.genes}")


def _record(trace, population, fitness):
    fit = np.array([ind.fitness for ind in population])
    best = int(np.argmax(fit))
    trace.best_fitness.append(float(fit[best]))
    trace.mean_fitness.append(float(fit.mean()))
    trace.best_genes.append(population[best].genes.copy())
    flag = getattr(fitness, "outside_hull", None)
    trace.outside_hull.append(0 if flag is None else sum(bool(flag(ind.genes)) for ind in population))
    return population[best]


def run_ga(config, fitness, *, map_fn=map):
    """Maximize ``fitness`` over the box ``config.bounds``.

    Parameters
    ----------
    config : GaConfig
    fitness : callable
        Pure function of a (d,) gene array returning a real to maximize.
    map_fn : callable, optional
        ``map``-compatible evaluator; results must come back in input order.

    Returns
    -------
    best : Individual
        Best individual seen over the whole run.
    trace : GaTrace
        Generation 0 is the random initial population. At most
        ``population_size * generations`` fitness evaluations are made.

    Raises
    ------
    FitnessError
        If the fitness returns NaN; ``genes`` holds the offending input.
    """
    rng = np.random.default_rng(config.rng_seed)
    bounds = config.bounds_array
    n, elite = config.population_size, config.elitism_count
    trace = GaTrace()

    genes = rng.uniform(bounds[:, 0], bounds[:, 1], size=(n, config.dim))
    population = _evaluate([Individual(g) for g in genes], fitness, map_fn, trace)
    best = _record(trace, population, fitness)
    stale = 0
    for _ in range(1, config.generations):
        order = np.argsort([-ind.fitness for ind in population], kind="stable")
        children = [population[i] for i in order[:elite]]
        while len(children) < n:
            a = select_tournament(population, config.tournament_size, rng)
            b = select_tournament(population, config.tournament_size, rng)
            if rng.random() < config.crossover_rate:
                a, b = crossover_blend(a, b, config.blend_alpha, rng, bounds)
            for child in (a, b):
                child = mutate_gaussian(child, config.mutation_rate, config.mutation_sigma, rng, bounds)
                children.append(child)
        population = _evaluate(children[:n], fitness, map_fn, trace)
        _check_bounds(population, bounds)
        gen_best = _record(trace, population, fitness)
        if gen_best.fitness > best.fitness + STAGNATION_TOL:
            stale = 0
        else:
            stale += 1
        if gen_best.fitness > best.fitness:
            best = gen_best
        if config.stagnation is not None and stale >= config.stagnation:
            break
    return best, trace


class ReducedFitness:
    """``genes -> -||field(genes) - target||_F^2 / ||target||_F^2`` through a `BiRomModel`.

    The field is never formed. With ``F = (W u) diag(s) (Z v)^T`` and
    orthonormal ``W u``, ``Z v``::

        ||F - T||^2 = sum(s^2) - 2 sum_k s_k u_k^T (W^T T Z) v_k + ||T||^2

    so each evaluation costs one reduced query plus O(r^2 q) work. The
    result is clamped at 0 against round-off.
    """

    def __init__(self, model, target_field, method=None):
        n, nt = model.shape[:2]
        target = np.asarray(target_field, dtype=float)
        if target.shape != (n, nt):
            raise ValueError(f"target field has shape {target.shape}, model expects {(n, nt)}")
        if not np.all(np.isfinite(target)):
            raise ValueError("target field has non-finite entries")
        norm2 = float(np.sum(target * target))
        if norm2 == 0.0:
            raise ValueError("target field is identically zero")
        self.model = model
        self.method = method
        self.target_norm2 = norm2
        self.projected = model.spatial.lift.T @ target @ model.temporal.lift
        self._hull = _Hull(model.samples.params)

    def misfit(self, genes):
        """Squared Frobenius misfit ``||field - target||^2``."""
        ur, sigma, vr = bi_query_coords(self.model, genes, self.method)
        cross = np.einsum("ik,ij,jk->k", ur, self.projected, vr)
        val = float(np.sum(sigma * sigma) - 2.0 * np.dot(sigma, cross) + self.target_norm2)
        return max(val, 0.0)

    def __call__(self, genes):
        return 0.0 - self.misfit(genes) / self.target_norm2

    def outside_hull(self, genes):
        return not self._hull.contains(genes)


class _Hull:
    """Convex hull of the trained parameters (bounding box if it is degenerate)."""

    def __init__(self, params):
        self.params = params
        self.lo = params.min(axis=0)
        self.hi = params.max(axis=0)
        self.tri = None
        if params.shape[1] > 1:
            try:
                self.tri = Delaunay(params)
            except QhullError:
                self.tri = None

    def contains(self, genes, tol=1e-12):
        g = as_query(genes, self.params.shape[1])
        if np.any(g < self.lo - tol) or np.any(g > self.hi + tol):
            return False
        if self.tri is None:
            return True
        return bool(self.tri.find_simplex(g, tol=tol) >= 0)


def reduced_fitness(model, target_field, method=None):
    """Fitness for recovering the parameter whose reconstruction matches ``target_field``.

    Returns a `ReducedFitness`; it is pure and safe to call from several
    threads. Genes outside the trained hull are still evaluated
    (extrapolation); `run_ga` counts them in ``GaTrace.outside_hull``.
    """
    return ReducedFitness(model, target_field, method)
