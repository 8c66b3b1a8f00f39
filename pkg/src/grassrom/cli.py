"""Command-line front end: ``grassrom {gen,pod,interp,ga,bench}``.

Options come from a ``--config`` file (see `grassrom.config`) overlaid
with command flags; every run writes the fully resolved configuration to
``<out>/<command>.cfg``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical error,
3 I/O error (including malformed matrix files).
"""

import argparse
import contextlib
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .bicitsgm import BiConfig, bi_build, bi_query, online_cost_report, save_model
from .config import RunConfig, load_config, parse_floats
from .errors import ConfigError, GrassromError, MatrixFormatError
from .ga import GaConfig, reduced_fitness, run_ga
from .grassmann import geodesic_distance
from .itsgm import Idw, Lagrange, Rbf, SampleSet, as_query, itsgm_interpolate, nearest_index
from .matrix_io import read_matrix, read_samples, write_manifest, write_matrix
from .pod import Energy, Rank, compute_pod
from .toyflow import RotatingSubspace, TranslatingPulse

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_IO = 3

# the timing benchmark runs at the scale of the online/offline contract
BENCH_DEFAULTS = {
    "samples": {"n_points": 2000, "n_times": 200, "width": 0.1},
    "pod": {"rank": 10},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


@contextlib.contextmanager
def _stage(name):
    """Tag exceptions escaping the block with a pipeline stage name (innermost wins)."""
    try:
        yield
    except Exception as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
        raise


def _origin(exc):
    """Short name of the innermost package module in the traceback."""
    tb = exc.__traceback__
    name = None
    while tb is not None:
        mod = tb.tb_frame.f_globals.get("__name__", "")
        if mod.startswith("grassrom."):
            name = mod.split(".", 1)[1]
        tb = tb.tb_next
    return name or "cli"


def _resolve(args, base=None):
    cfg = RunConfig(base)
    if getattr(args, "config", None):
        cfg = load_config(args.config, cfg)
    seed = getattr(args, "seed", None)
    if seed is not None:
        cfg.set("ga", "rng_seed", seed)
        cfg.set("bench", "seed", seed)
    out = getattr(args, "out", None)
    if out is not None:
        cfg.set("paths", "out", out)
    return cfg


def _out_dir(cfg):
    out = Path(cfg["paths"]["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(cfg, out, command):
    (out / f"{command}.cfg").write_text(cfg.dumps())


def _ext(cfg):
    return "." + cfg["paths"]["format"]


def _family(cfg):
    s = cfg["samples"]
    if s["family"] == "pulse":
        return TranslatingPulse(s["n_points"], s["n_times"], s["width"])
    return RotatingSubspace(s["n_points"], s["subspace_dim"])


def _pod_rule(cfg):
    p = cfg["pod"]
    return Rank(p["rank"]) if p["rule"] == "rank" else Energy(p["energy"])


def _pod(cfg, snapshots):
    p = cfg["pod"]
    return compute_pod(snapshots, _pod_rule(cfg), center=p["center"], method=p["method"])


def _interpolator(cfg, dim):
    it = cfg["interpolator"]
    method = it["method"]
    if method == "auto":
        method = "lagrange" if dim == 1 else "rbf"
    if method == "lagrange":
        return Lagrange()
    if method == "rbf":
        return Rbf(it["kernel"], it["shape"])
    return Idw(it["power"])


def _bi_config(cfg):
    it = cfg["interpolator"]
    return BiConfig(it["ref_index"], it["anchor_index"], it["calibration"])


def _samples(cfg):
    """Trained samples from the configured manifest, or generated from the toy family."""
    manifest = cfg["samples"]["manifest"]
    if manifest is not None:
        return read_samples(manifest)
    family = _family(cfg)
    gammas = np.array(cfg["samples"]["gammas"])
    pods = [_pod(cfg, family.snapshots(g)) for g in gammas]
    return SampleSet.from_pods(gammas, pods)


def _fmt_genes(g):
    return ",".join(repr(float(x)) for x in np.atleast_1d(g))


def cmd_gen(args):
    cfg = _resolve(args)
    if args.family is not None:
        cfg.set("samples", "family", args.family)
    if args.gammas is not None:
        cfg.set_text("samples", "gammas", args.gammas)
    if args.rank is not None:
        cfg.set("pod", "rule", "rank")
        cfg.set("pod", "rank", args.rank)
    if args.energy is not None:
        cfg.set("pod", "rule", "energy")
        cfg.set("pod", "energy", args.energy)
    if args.format is not None:
        cfg.set("paths", "format", args.format)
    with_pod = args.pod or args.rank is not None or args.energy is not None
    out = _out_dir(cfg)
    _echo_config(cfg, out, "gen")

    family = _family(cfg)
    ext = _ext(cfg)
    entries = []
    for i, g in enumerate(cfg["samples"]["gammas"]):
        with _stage("gen"):
            snaps = family.snapshots(g)
        entry = {"gamma": g, "snapshots": f"snap_{i:03d}{ext}"}
        write_matrix(out / entry["snapshots"], snaps)
        if with_pod:
            with _stage("pod"):
                pod = _pod(cfg, snaps)
            for key, arr in (("u", pod.modes), ("sigma", pod.singular_values), ("v", pod.temporal)):
                entry[key] = f"{key}_{i:03d}{ext}"
                write_matrix(out / entry[key], arr)
        entries.append(entry)
    write_manifest(out / "manifest.txt", entries)
    print(f"wrote {len(entries)} samples and manifest.txt to {out}")
    return EXIT_OK


def cmd_pod(args):
    cfg = _resolve(args)
    if args.rank is not None and args.energy is not None:
        raise ConfigError("give at most one of --rank and --energy")
    if args.rank is not None:
        cfg.set("pod", "rule", "rank")
        cfg.set("pod", "rank", args.rank)
    if args.energy is not None:
        cfg.set("pod", "rule", "energy")
        cfg.set("pod", "energy", args.energy)
    if args.center:
        cfg.set("pod", "center", True)
    if args.method is not None:
        cfg.set("pod", "method", args.method)
    if args.format is not None:
        cfg.set("paths", "format", args.format)
    out = _out_dir(cfg)
    _echo_config(cfg, out, "pod")

    snaps = read_matrix(args.snapshots)
    with _stage("pod"):
        pod = _pod(cfg, snaps)
    # <prefix>.modes / .sv / .temporal, with ".csv" appended in CSV format
    tail = ".csv" if cfg["paths"]["format"] == "csv" else ""
    prefix = args.prefix
    write_matrix(out / f"{prefix}.modes{tail}", pod.modes)
    write_matrix(out / f"{prefix}.sv{tail}", pod.singular_values)
    write_matrix(out / f"{prefix}.temporal{tail}", pod.temporal)
    meta = f"rank={pod.rank} energy_fraction={pod.energy_fraction!r}"
    (out / f"{prefix}.meta").write_text(meta + "\n")
    print(meta)
    return EXIT_OK


def cmd_interp(args):
    cfg = _resolve(args)
    if args.method is not None:
        cfg.set("interpolator", "method", args.method)
    if args.ref is not None:
        cfg.set_text("interpolator", "ref_index", args.ref)
    if args.format is not None:
        cfg.set("paths", "format", args.format)
    cfg.set("samples", "manifest", args.manifest)
    out = _out_dir(cfg)
    _echo_config(cfg, out, "interp")

    samples = read_samples(args.manifest)
    try:
        gamma = as_query(parse_floats(args.gamma), samples.dim)
    except ValueError as exc:
        raise ConfigError(f"--gamma: {exc}") from None
    method = _interpolator(cfg, samples.dim)
    ref = cfg["interpolator"]["ref_index"]
    if args.save_model is not None and not args.bi:
        raise ConfigError("--save-model needs --bi")
    truth = read_matrix(args.truth) if args.truth is not None else None
    ext = _ext(cfg)
    if args.bi:
        with _stage("build"):
            model = bi_build(samples, _bi_config(cfg))
        if args.save_model is not None:
            save_model(model, args.save_model, cfg["paths"]["format"])
        with _stage("query"):
            t0 = time.perf_counter()
            rec = bi_query(model, gamma, method)
            elapsed = time.perf_counter() - t0
        result, ref = rec.field, rec.ref_index
        name = f"interp_field{ext}"
        if truth is not None:
            error = np.linalg.norm(result - truth) / np.linalg.norm(truth)
    else:
        if ref is None:
            ref = nearest_index(samples.params, gamma)
        with _stage("query"):
            t0 = time.perf_counter()
            result = itsgm_interpolate(samples, gamma, ref, method)
            elapsed = time.perf_counter() - t0
        name = f"interp_basis{ext}"
        if truth is not None:
            error = geodesic_distance(result, truth)
    write_matrix(out / name, result)
    report = f"gamma={_fmt_genes(gamma)} ref={ref}"
    if truth is not None:
        report += f" error={error:.3e}"
    print(f"{report} online_seconds={elapsed:.3e}")
    return EXIT_OK


def cmd_ga(args):
    cfg = _resolve(args)
    out = _out_dir(cfg)
    _echo_config(cfg, out, "ga")
    g = cfg["ga"]
    with _stage("samples"):
        samples = _samples(cfg)
    with _stage("build"):
        model = bi_build(samples, _bi_config(cfg))
    with _stage("target"):
        if cfg["paths"]["target"] is not None:
            target = read_matrix(cfg["paths"]["target"])
        else:
            target = _family(cfg).snapshots(*g["target_gamma"])
        fitness = reduced_fitness(model, target, _interpolator(cfg, samples.dim))
    bounds = g["bounds"]
    if bounds is None:
        bounds = tuple(zip(samples.params.min(axis=0), samples.params.max(axis=0)))
    ga_config = GaConfig(
        population_size=g["population_size"],
        generations=g["generations"],
        crossover_rate=g["crossover_rate"],
        mutation_rate=g["mutation_rate"],
        mutation_sigma=g["mutation_sigma"],
        elitism_count=g["elitism_count"],
        bounds=bounds,
        tournament_size=g["tournament_size"],
        rng_seed=g["rng_seed"],
        blend_alpha=g["blend_alpha"],
        stagnation=g["stagnation"],
    )
    with _stage("ga"):
        if g["workers"] > 1:
            with ThreadPoolExecutor(g["workers"]) as pool:
                best, trace = run_ga(ga_config, fitness, map_fn=pool.map)
        else:
            best, trace = run_ga(ga_config, fitness)
    trace.to_csv(out / "ga_trace.csv")
    line = f"genes={_fmt_genes(best.genes)} fitness={best.fitness!r} evaluations={trace.evaluations}"
    (out / "ga_best.txt").write_text(line + "\n")
    print(line)
    return EXIT_OK


def cmd_bench(args):
    cfg = _resolve(args, BENCH_DEFAULTS)
    out = _out_dir(cfg)
    _echo_config(cfg, out, "bench")
    with _stage("samples"):
        samples = _samples(cfg)
    with _stage("build"):
        model = bi_build(samples, _bi_config(cfg))
    with _stage("bench"):
        report = online_cost_report(
            model,
            cfg["bench"]["n_queries"],
            _interpolator(cfg, samples.dim),
            seed=cfg["bench"]["seed"],
        )
    n, nt, q, n_p, d = report.dims
    (out / "bench.txt").write_text(
        f"N={n} N_t={nt} q={q} N_p={n_p} d={d} queries={report.n_queries}\n"
        f"online_flops={report.online_flops!r}\nscratch_flops={report.scratch_flops!r}\n"
    )
    # wall-clock numbers differ between runs; kept apart from the deterministic outputs
    (out / "bench_timing.txt").write_text(report.table() + "\n")
    print(report.table())
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="key=value configuration file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the RNG seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    parser = _Parser(prog="grassrom", parents=[common], description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen", parents=[common], help="write toy snapshot matrices and a manifest")
    p.add_argument("--family", choices=("pulse", "rotation"))
    p.add_argument("--gammas", help="comma-separated parameter values")
    p.add_argument("--pod", action="store_true", help="also write POD triples per [pod]")
    p.add_argument("--rank", type=int, help="write rank-q POD triples")
    p.add_argument("--energy", type=float, help="write POD triples at this energy fraction")
    p.add_argument("--format", choices=("bin", "csv"))
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("pod", parents=[common], help="POD of one snapshot matrix")
    p.add_argument("snapshots")
    p.add_argument("--rank", type=int)
    p.add_argument("--energy", type=float)
    p.add_argument("--center", action="store_true")
    p.add_argument("--method", choices=("svd", "snapshots"))
    p.add_argument("--prefix", default="pod")
    p.add_argument("--format", choices=("bin", "csv"))
    p.set_defaults(func=cmd_pod)

    p = sub.add_parser("interp", parents=[common], help="interpolate at an untrained parameter")
    p.add_argument("manifest")
    p.add_argument("--gamma", required=True, help="comma-separated query components")
    p.add_argument("--method", choices=("auto", "lagrange", "rbf", "idw"))
    p.add_argument("--ref", help="reference sample index or 'nearest'")
    p.add_argument("--bi", action="store_true", help="bi-calibrated field instead of a basis")
    p.add_argument("--truth", help="basis (or field with --bi) to report the error against")
    p.add_argument("--save-model", help="with --bi, also write the built model to this directory")
    p.add_argument("--format", choices=("bin", "csv"))
    p.set_defaults(func=cmd_interp)

    p = sub.add_parser("ga", parents=[common], help="recover a parameter with the reduced GA")
    p.set_defaults(func=cmd_ga)

    p = sub.add_parser("bench", parents=[common], help="time online queries against recomputation")
    p.set_defaults(func=cmd_bench)
    return parser


def _report(command, exc, kind):
    stage = getattr(exc, "stage", None)
    where = _origin(exc) if stage is None else f"{stage}/{_origin(exc)}"
    prog = "grassrom" if command is None else f"grassrom {command}"
    print(f"{prog}: {kind} [{where}]: {exc}", file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    command = None
    try:
        args = parser.parse_args(argv)
        command = args.command
        if command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except ConfigError as exc:
        _report(command, exc, "usage error")
        return EXIT_USAGE
    except (OSError, MatrixFormatError) as exc:
        _report(command, exc, "I/O error")
        return EXIT_IO
    except (GrassromError, ArithmeticError, np.linalg.LinAlgError) as exc:
        _report(command, exc, "numerical error")
        return EXIT_NUMERIC
    except (ValueError, IndexError) as exc:
        _report(command, exc, "invalid input")
        return EXIT_USAGE
