import subprocess
import sys

import numpy as np
import pytest

from grassrom.cli import main
from grassrom.config import load_config
from grassrom.grassmann import geodesic_distance
from grassrom.matrix_io import read_manifest, read_matrix, write_matrix
from grassrom.toyflow import RotatingSubspace, TranslatingPulse


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def pulse_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("pulse")
    assert main(["gen", "--out", str(out), "--pod"]) == 0
    return out


# ---- gen ----------------------------------------------------------------------------------


def test_gen_single_gamma(tmp_path, capsys):
    code, out, _ = run(capsys, "gen", "--out", tmp_path, "--gammas", "0.3")
    assert code == 0 and "1 samples" in out
    entries = read_manifest(tmp_path / "manifest.txt")
    assert len(entries) == 1
    np.testing.assert_array_equal(read_matrix(entries[0]["snapshots"]), TranslatingPulse().snapshots(0.3))
    assert (tmp_path / "gen.cfg").exists()


def test_gen_empty_gamma_list_fails(tmp_path, capsys):
    code, _, err = run(capsys, "gen", "--out", tmp_path, "--gammas", "")
    assert code == 1 and "gammas" in err


def test_gen_invalid_gamma(tmp_path, capsys):
    code, _, err = run(capsys, "gen", "--out", tmp_path, "--gammas", "0.5,1.5")
    assert code == 1 and "outside" in err and "[gen/toyflow]" in err


def test_gen_regeneration_byte_identical(tmp_path, capsys):
    for d in ("a", "b"):
        assert run(capsys, "gen", "--out", tmp_path / d, "--rank", 4, "--format", "csv")[0] == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "u_000.csv" in names and "snap_004.csv" in names
    # the echoed config records its own output directory, everything else must match
    for name in names:
        if name == "gen.cfg":
            continue
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_gen_rotation_family_with_pod(tmp_path, capsys):
    cfg = tmp_path / "rot.cfg"
    cfg.write_text("[samples]\nfamily = rotation\nn_points = 12\nsubspace_dim = 2\ngammas = -0.4,0.1,0.5\n[pod]\nrank = 2\n")
    assert run(capsys, "gen", "--config", cfg, "--out", tmp_path, "--pod")[0] == 0
    u0 = read_matrix(tmp_path / "u_000.bin")
    assert geodesic_distance(u0, RotatingSubspace(12, 2).basis(-0.4)) <= 1e-12


# ---- pod ----------------------------------------------------------------------------------


def test_pod_rank_one(tmp_path, capsys):
    write_matrix(tmp_path / "s.bin", np.outer([1.0, 2.0, 2.0], [1.0, -1.0, 3.0, 0.5]))
    code, out, _ = run(capsys, "pod", tmp_path / "s.bin", "--rank", 1, "--out", tmp_path)
    assert code == 0
    assert out.strip() == "rank=1 energy_fraction=1.0"
    for suffix in ("modes", "sv", "temporal"):
        assert (tmp_path / f"pod.{suffix}").exists()
    np.testing.assert_allclose(read_matrix(tmp_path / "pod.modes")[:, 0], [1 / 3, 2 / 3, 2 / 3], atol=1e-15)


def test_pod_energy_rank_matches_full_svd_oracle(pulse_dir, tmp_path, capsys):
    snaps = read_matrix(pulse_dir / "snap_002.bin")
    s = np.linalg.svd(snaps, compute_uv=False)
    expected = int(np.argmax(np.cumsum(s**2) / np.sum(s**2) >= 0.999)) + 1
    code, out, _ = run(capsys, "pod", pulse_dir / "snap_002.bin", "--energy", 0.999, "--out", tmp_path, "--format", "csv", "--prefix", "p")
    assert code == 0 and out.startswith(f"rank={expected} ")
    assert read_matrix(tmp_path / "p.modes.csv").shape == (512, expected)
    assert (tmp_path / "p.meta").read_text() == out


def test_pod_rank_too_large(tmp_path, capsys):
    write_matrix(tmp_path / "s.bin", np.ones((4, 3)))
    code, _, err = run(capsys, "pod", tmp_path / "s.bin", "--rank", 5, "--out", tmp_path)
    assert code == 2 or code == 1
    assert "exceeds" in err and "[pod/pod]" in err


def test_pod_corrupt_magic_is_io_error(tmp_path, capsys):
    (tmp_path / "bad.bin").write_bytes(b"NOTAMATRIX" + bytes(30))
    code, _, err = run(capsys, "pod", tmp_path / "bad.bin", "--out", tmp_path)
    assert code == 3 and "magic" in err


def test_pod_rank_and_energy_conflict(tmp_path, capsys):
    write_matrix(tmp_path / "s.bin", np.eye(3))
    assert run(capsys, "pod", tmp_path / "s.bin", "--rank", 1, "--energy", 0.9, "--out", tmp_path)[0] == 1


# ---- interp -------------------------------------------------------------------------------


def test_interp_trained_gamma_with_truth(pulse_dir, tmp_path, capsys):
    code, out, _ = run(
        capsys, "interp", pulse_dir / "manifest.txt", "--gamma", 0.3, "--truth", pulse_dir / "u_001.bin", "--out", tmp_path
    )
    assert code == 0
    error = float(out.split("error=")[1].split()[0])
    assert error <= 1e-8
    assert "gamma=0.3 ref=1" in out and "online_seconds=" in out


def test_interp_rotation_family_untrained(tmp_path, capsys):
    cfg = tmp_path / "rot.cfg"
    cfg.write_text("[samples]\nfamily = rotation\ngammas = -0.5,0.0,0.6\n[pod]\nrank = 3\n")
    assert run(capsys, "gen", "--config", cfg, "--out", tmp_path, "--pod")[0] == 0
    write_matrix(tmp_path / "truth.bin", RotatingSubspace(512, 3).basis(0.27))
    code, out, _ = run(capsys, "interp", tmp_path / "manifest.txt", "--gamma", 0.27, "--truth", tmp_path / "truth.bin", "--out", tmp_path)
    assert code == 0
    assert float(out.split("error=")[1].split()[0]) <= 1e-8


def test_interp_bi_field_and_saved_model(pulse_dir, tmp_path, capsys):
    write_matrix(tmp_path / "truth.bin", TranslatingPulse().snapshots(0.4))
    code, out, _ = run(
        capsys, "interp", pulse_dir / "manifest.txt", "--gamma", 0.4, "--bi", "--truth", tmp_path / "truth.bin",
        "--out", tmp_path, "--save-model", tmp_path / "model",
    )
    assert code == 0
    assert float(out.split("error=")[1].split()[0]) <= 5e-2
    assert read_matrix(tmp_path / "interp_field.bin").shape == (512, 128)
    assert (tmp_path / "model" / "meta.txt").exists()


def test_interp_missing_sample_file(tmp_path, capsys):
    (tmp_path / "m.txt").write_text("gamma=0 u=gone.bin\ngamma=1 u=gone2.bin\n")
    code, _, err = run(capsys, "interp", tmp_path / "m.txt", "--gamma", 0.5, "--out", tmp_path)
    assert code == 3 and "gone.bin" in err


def test_interp_bad_gamma_and_ref(pulse_dir, tmp_path, capsys):
    assert run(capsys, "interp", pulse_dir / "manifest.txt", "--gamma", "0.1,0.2", "--out", tmp_path)[0] == 1
    code, _, err = run(capsys, "interp", pulse_dir / "manifest.txt", "--gamma", 0.4, "--ref", 9, "--out", tmp_path)
    assert code == 1 and "out of range" in err


def test_interp_save_model_needs_bi(pulse_dir, tmp_path, capsys):
    assert run(capsys, "interp", pulse_dir / "manifest.txt", "--gamma", 0.4, "--save-model", tmp_path / "m", "--out", tmp_path)[0] == 1


# ---- ga -----------------------------------------------------------------------------------


def test_ga_self_consistent_target(tmp_path, capsys):
    cfg = tmp_path / "ga.cfg"
    cfg.write_text("[ga]\ntarget_gamma = 0.7\n")
    code, out, _ = run(capsys, "ga", "--config", cfg, "--out", tmp_path)
    assert code == 0
    genes = float(out.split("genes=")[1].split()[0])
    assert abs(genes - 0.7) <= 0.01 * 0.8
    header = (tmp_path / "ga_trace.csv").read_text().splitlines()[0]
    assert header == "generation,best_fitness,mean_fitness,gene_0,outside_hull"
    assert (tmp_path / "ga_best.txt").read_text() == out


def test_ga_nan_fitness_exit_names_genes(tmp_path, capsys):
    write_matrix(tmp_path / "t.bin", np.full((512, 128), 1e300))
    cfg = tmp_path / "ga.cfg"
    cfg.write_text(f"[paths]\ntarget = {tmp_path / 't.bin'}\n[ga]\npopulation_size = 4\ngenerations = 2\n")
    with pytest.warns(RuntimeWarning):
        code, _, err = run(capsys, "ga", "--config", cfg, "--out", tmp_path)
    assert code == 2
    assert "NaN for genes [" in err and "[ga/ga]" in err


def test_ga_same_seed_identical_trace_and_seed_flag(tmp_path, capsys):
    cfg = tmp_path / "ga.cfg"
    cfg.write_text("[ga]\npopulation_size = 10\ngenerations = 5\nworkers = 3\n")
    for d in ("a", "b"):
        assert run(capsys, "ga", "--config", cfg, "--out", tmp_path / d, "--seed", 5)[0] == 0
    a = (tmp_path / "a" / "ga_trace.csv").read_bytes()
    assert a == (tmp_path / "b" / "ga_trace.csv").read_bytes()
    assert load_config(tmp_path / "a" / "ga.cfg")["ga"]["rng_seed"] == 5
    assert run(capsys, "ga", "--config", cfg, "--out", tmp_path / "c", "--seed", 6)[0] == 0
    assert (tmp_path / "c" / "ga_trace.csv").read_bytes() != a


# ---- bench --------------------------------------------------------------------------------


def test_bench_default_speedup(tmp_path, capsys):
    code, out, _ = run(capsys, "bench", "--out", tmp_path)
    assert code == 0
    speedup = float(out.split("speedup=")[1])
    print(out)
    assert speedup >= 5.0
    assert (tmp_path / "bench.txt").read_text().startswith("N=2000 N_t=200 q=10 N_p=5 d=1")


def test_bench_two_samples_table(tmp_path, capsys):
    cfg = tmp_path / "b.cfg"
    cfg.write_text("[samples]\nn_points = 400\nn_times = 60\ngammas = 0.2,0.8\n[bench]\nn_queries = 5\n")
    code, out, _ = run(capsys, "bench", "--config", cfg, "--out", tmp_path)
    assert code == 0 and "N_p=2" in out and "speedup=" in out


def test_bench_malformed_config(tmp_path, capsys):
    cfg = tmp_path / "b.cfg"
    cfg.write_text("[bench]\nn_queries = 5\nn_querys = 6\n")
    code, _, err = run(capsys, "bench", "--config", cfg, "--out", tmp_path)
    assert code == 1 and "line 3" in err and "n_querys" in err


# ---- global behaviour -----------------------------------------------------------------------


def test_no_command_and_unknown_flag(capsys):
    assert run(capsys, )[0] == 1
    code, _, err = run(capsys, "gen", "--bogus")
    assert code == 1 and "unrecognized" in err


def test_missing_config_file_is_io_error(tmp_path, capsys):
    code, _, err = run(capsys, "gen", "--config", tmp_path / "none.cfg", "--out", tmp_path)
    assert code == 3 and "none.cfg" in err


def test_echoed_config_reloads_to_same_values(tmp_path, capsys):
    cfg = tmp_path / "in.cfg"
    cfg.write_text("[samples]\ngammas = 0.2,0.6\n[interpolator]\nref_index = 1\n")
    assert run(capsys, "gen", "--config", cfg, "--out", tmp_path / "o")[0] == 0
    echoed = load_config(tmp_path / "o" / "gen.cfg")
    assert echoed.values == load_config(tmp_path / "o" / "gen.cfg", load_config(cfg)).values
    assert echoed["interpolator"]["ref_index"] == 1
    assert echoed["samples"]["gammas"] == (0.2, 0.6)


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "grassrom", "gen", "--gammas", "0.5", "--out", str(tmp_path)],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "manifest.txt").exists()
