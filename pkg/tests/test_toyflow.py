import numpy as np
import pytest

from grassrom.grassmann import geodesic_distance, log_map
from grassrom.pod import Rank, compute_pod
from grassrom.toyflow import RotatingSubspace, TranslatingPulse, exact_subspace, generate_snapshots


def test_pulse_matches_closed_form():
    fam = TranslatingPulse(11, 5, 0.3)
    s = generate_snapshots(fam, 0.7)
    x, t = np.linspace(0, 1, 11), np.linspace(0, 1, 5)
    for j in range(11):
        for k in range(5):
            assert s[j, k] == pytest.approx(np.exp(-((x[j] - 0.7 * t[k]) ** 2) / 0.09), rel=1e-14)


def test_stationary_pulse_has_identical_columns_and_rank_one():
    s = generate_snapshots(TranslatingPulse(), 0.0)
    assert np.all(s == s[:, :1])
    assert compute_pod(s, Rank(1)).energy_fraction == pytest.approx(1.0, abs=1e-12)


def test_regeneration_is_bit_identical():
    fam = TranslatingPulse()
    assert generate_snapshots(fam, 0.37).tobytes() == generate_snapshots(fam, 0.37).tobytes()


def test_pulse_validation():
    with pytest.raises(ValueError, match="outside"):
        TranslatingPulse().snapshots(1.5)
    with pytest.raises(ValueError):
        TranslatingPulse(width=0.0)
    with pytest.raises(ValueError):
        TranslatingPulse(n_points=0)


def test_rotation_basis_at_zero():
    phi = exact_subspace(RotatingSubspace(6, 3), 0.0)
    np.testing.assert_array_equal(phi, np.eye(6)[:, [0, 2, 3]])


def test_rotation_distances_are_parameter_gaps():
    fam = RotatingSubspace(20, 3)
    assert geodesic_distance(fam.basis(0.0), fam.basis(0.4)) == pytest.approx(0.4, abs=1e-12)
    for a, b in [(-0.5, 0.2), (0.1, 0.7), (-0.7, -0.69)]:
        assert geodesic_distance(fam.basis(a), fam.basis(b)) == pytest.approx(abs(a - b), abs=1e-12)
        assert log_map(fam.basis(a), fam.basis(b)).norm == pytest.approx(abs(a - b), abs=1e-10)


def test_rotation_snapshots_span_the_member():
    fam = RotatingSubspace(10, 4)
    pod = compute_pod(fam.snapshots(0.3), Rank(4))
    assert geodesic_distance(pod.modes, fam.basis(0.3)) <= 1e-12


def test_rotation_validation():
    with pytest.raises(ValueError):
        RotatingSubspace(4, 3)
    with pytest.raises(ValueError, match="outside"):
        RotatingSubspace().basis(1.0)
