"""End-to-end acceptance checks; each test records one pass/fail line."""

import time

import numpy as np

from conftest import pulse_samples, random_orthogonal, random_orthonormal
from grassrom.bicitsgm import bi_build, bi_query, bi_query_monolithic, online_cost_report, procrustes_align
from grassrom.cli import main
from grassrom.ga import GaConfig, reduced_fitness, run_ga
from grassrom.grassmann import exp_map, geodesic_distance, log_map
from grassrom.itsgm import Idw, Lagrange, Rbf, SampleSet, itsgm_interpolate
from grassrom.linalg import thin_svd
from grassrom.pod import Rank, compute_pod
from grassrom.toyflow import RotatingSubspace


def planted_pair(rng, n, q, angles):
    """Bases of two subspaces whose principal angles are exactly `angles`."""
    frame = random_orthonormal(rng, n, 2 * q)
    x, perp = frame[:, :q], frame[:, q:]
    y = x * np.cos(angles) + perp * np.sin(angles)
    return x @ random_orthogonal(rng, q), y @ random_orthogonal(rng, q)


def test_geometry_roundtrip(rng, acceptance):
    pairs = [planted_pair(rng, 100, 5, rng.uniform(0, np.pi / 3 - 1e-3, 5)) for _ in range(200)]
    t0 = time.perf_counter()
    worst = max(geodesic_distance(exp_map(x, log_map(x, y)), y) for x, y in pairs)
    elapsed = time.perf_counter() - t0
    ok = acceptance(1, worst <= 1e-9 and elapsed < 5.0, f"max distance {worst:.2e} in {elapsed:.2f} s")
    assert ok


def test_distance_invariant_under_change_of_basis(rng, acceptance):
    worst = 0.0
    for _ in range(100):
        x, y = planted_pair(rng, 30, 4, rng.uniform(0, 1.4, 4))
        ref = geodesic_distance(x, y)
        moved = geodesic_distance(x @ random_orthogonal(rng, 4), y @ random_orthogonal(rng, 4))
        worst = max(worst, abs(moved - ref))
    assert acceptance(2, worst <= 1e-10, f"max deviation {worst:.2e}")


def test_svd_against_eigendecomposition(rng, acceptance):
    worst = 0.0
    for _ in range(50):
        a = rng.standard_normal(tuple(rng.integers(1, 9, 2)))
        sigma = thin_svd(a).sigma
        lam = np.linalg.eigvalsh(a.T @ a)[::-1][: min(a.shape)]
        # compare squares: the oracle eigenvalues are what LAPACK computes directly
        worst = max(worst, np.max(np.abs(sigma**2 - lam) / lam))
    assert acceptance(3, worst <= 1e-8, f"max relative deviation {worst:.2e}")


def test_pod_truncation_residual(rng, acceptance):
    worst = 0.0
    for rank in (1, 5, 10, 19):
        s = rng.standard_normal((50, 20))
        pod = compute_pod(s, Rank(rank))
        tail = np.sum(np.linalg.svd(s, compute_uv=False)[rank:] ** 2)
        worst = max(worst, abs(np.linalg.norm(s - pod.reconstruct()) ** 2 - tail) / tail)
    assert acceptance(4, worst <= 1e-8, f"max relative deviation {worst:.2e}")


def test_itsgm_reproduces_samples(rng, acceptance):
    base = random_orthonormal(rng, 40, 4)
    params = np.array([0.0, 0.2, 0.5, 0.7, 1.0])
    bases = []
    for _ in params:
        delta = 0.3 * rng.standard_normal((40, 4))
        bases.append(exp_map(base, delta - base @ (base.T @ delta)))
    samples = SampleSet(params, bases)
    worst = 0.0
    for method in (Lagrange(), Rbf(), Idw()):
        for ref in range(len(params)):
            for j, g in enumerate(params):
                worst = max(worst, geodesic_distance(itsgm_interpolate(samples, g, ref, method), samples.u[j]))
    assert acceptance(5, worst <= 1e-8, f"max distance {worst:.2e} (Lagrange, RBF, IDW; every reference)")


def test_geodesic_family_midpoints(acceptance):
    fam = RotatingSubspace(60, 3)
    worst = 0.0
    for n_p in (2, 3, 5):
        gammas = np.linspace(-0.6, 0.6, n_p)
        samples = SampleSet(gammas, [fam.basis(g) for g in gammas])
        for g in 0.5 * (gammas[1:] + gammas[:-1]):
            worst = max(worst, geodesic_distance(itsgm_interpolate(samples, g, method=Lagrange()), fam.basis(g)))
    assert acceptance(6, worst <= 1e-8, f"max midpoint distance {worst:.2e} for N_p = 2, 3, 5")


def test_pulse_reconstruction(acceptance):
    t0 = time.perf_counter()
    fam, samples = pulse_samples(np.linspace(0.1, 0.9, 5))
    model = bi_build(samples)
    errors = []
    for g in (0.2, 0.4, 0.6, 0.8):
        truth = fam.snapshots(g)
        errors.append(np.linalg.norm(bi_query(model, g).field - truth) / np.linalg.norm(truth))
    elapsed = time.perf_counter() - t0
    worst = max(errors)
    assert acceptance(7, worst <= 5e-2 and elapsed < 10.0, f"max midpoint relative error {worst:.3e} in {elapsed:.2f} s")


def test_offline_online_split(pulse_bench, acceptance):
    _, samples = pulse_bench
    model = bi_build(samples)
    report = online_cost_report(model, n_queries=50)
    print(report.table())
    diff = 0.0
    for g in (0.15, 0.33, 0.5, 0.77, 0.9):
        a = bi_query(model, g).field
        b = bi_query_monolithic(samples, g).field
        diff = max(diff, np.max(np.abs(a - b)))
    ok = report.speedup >= 5.0 and diff <= 1e-12
    assert acceptance(8, ok, f"speedup {report.speedup:.2f}x, max field difference {diff:.2e}")


def test_procrustes_beats_brute_force(rng, acceptance):
    worst = -np.inf
    for k in range(20):
        q = 1 + k % 4
        moving = rng.standard_normal((10, q))
        target = rng.standard_normal((10, q))
        mine = np.linalg.norm(moving @ procrustes_align(moving, target) - target)
        # Haar samples over O(q) from sign-fixed QR of Gaussian matrices
        z = rng.standard_normal((10_000, q, q))
        qs, rs = np.linalg.qr(z)
        qs = qs * np.sign(np.diagonal(rs, axis1=1, axis2=2))[:, None, :]
        best = np.min(np.linalg.norm(moving @ qs - target, axis=(1, 2)))
        worst = max(worst, mine - best)
    assert acceptance(9, worst <= 1e-9, f"largest brute-force advantage {worst:.2e}")


def test_canonical_ga(acceptance):
    def f(g):
        return -((g[0] - 0.5) ** 2)

    grid = np.arange(0.0, 1.0 + 5e-5, 1e-4)
    oracle = grid[int(np.argmax([f([g]) for g in grid]))]
    t0 = time.perf_counter()
    best, _ = run_ga(GaConfig(population_size=40, generations=60, rng_seed=7), f)
    elapsed = time.perf_counter() - t0
    err = abs(best.genes[0] - oracle)
    assert acceptance(10, err <= 1e-3 and elapsed < 2.0, f"|gamma - oracle| = {err:.2e} in {elapsed:.2f} s")


def test_reduced_ga_inverse_problem(acceptance):
    lo, hi, target_gamma = 0.1, 0.9, 0.6
    t0 = time.perf_counter()
    fam, samples = pulse_samples(np.linspace(lo, hi, 5))
    model = bi_build(samples)
    fitness = reduced_fitness(model, fam.snapshots(target_gamma))
    best, trace = run_ga(GaConfig(population_size=30, generations=40, bounds=((lo, hi),), rng_seed=0), fitness)
    elapsed = time.perf_counter() - t0
    err = abs(best.genes[0] - target_gamma) / (hi - lo)
    detail = f"recovered {best.genes[0]:.4f} (off by {100 * err:.2f}% of range) in {elapsed:.2f} s"
    assert acceptance(11, err <= 0.02 and elapsed < 10.0, detail)


def _snapshot(directory):
    return {p.relative_to(directory): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


def test_cli_outputs_are_deterministic(tmp_path, acceptance, capsys):
    data = tmp_path / "data"
    assert main(["gen", "--out", str(data), "--pod", "--gammas", "0.1,0.3,0.5,0.7,0.9"]) == 0
    ga_cfg = tmp_path / "ga.cfg"
    ga_cfg.write_text("[ga]\npopulation_size = 12\ngenerations = 8\nworkers = 3\n")
    commands = {
        "gen": ["gen", "--pod", "--format", "csv"],
        "pod": ["pod", str(data / "snap_001.bin"), "--energy", "0.999"],
        "interp": ["interp", str(data / "manifest.txt"), "--gamma", "0.4", "--truth", str(data / "u_001.bin")],
        "interp-bi": ["interp", str(data / "manifest.txt"), "--gamma", "0.4", "--bi", "--save-model", "MODEL"],
        "ga": ["ga", "--config", str(ga_cfg), "--seed", "11"],
        "bench": ["bench"],
    }
    mismatched = []
    for name, argv in commands.items():
        out = tmp_path / name
        argv = [a.replace("MODEL", str(out / "model")) for a in argv] + ["--out", str(out)]
        runs = []
        for _ in range(2):
            assert main(argv) == 0
            runs.append(_snapshot(out))
        # wall-clock timings are the one output that legitimately varies
        for snap in runs:
            snap.pop(next((k for k in snap if k.name == "bench_timing.txt"), None), None)
        if runs[0] != runs[1] or not runs[0]:
            mismatched.append(name)
    capsys.readouterr()
    detail = "all outputs byte-identical" if not mismatched else f"differs: {', '.join(mismatched)}"
    assert acceptance(12, not mismatched, f"{detail} ({', '.join(commands)})")
