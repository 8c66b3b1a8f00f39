import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_orthonormal
from grassrom.pod import Energy, Rank, compute_pod


def test_rank_one_snapshots():
    s = np.array([3.0, 4.0, 0.0])
    a = np.array([1.0, -2.0, 0.5, 2.0])
    pod = compute_pod(np.outer(s, a), Rank(1))
    np.testing.assert_allclose(pod.modes[:, 0], s / 5.0, atol=1e-15)
    assert pod.energy_fraction == 1.0
    assert pod.singular_values[0] == pytest.approx(5.0 * np.linalg.norm(a), rel=1e-14)


def test_energy_rule_analytic_threshold():
    s = np.array([[3.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    pod = compute_pod(s, Energy(0.9))
    assert pod.rank == 1
    assert pod.energy_fraction == pytest.approx(0.9)


def test_energy_one_keeps_every_nonzero_mode():
    s = np.array([[3.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    assert compute_pod(s, Energy(1.0)).rank == 2


def test_eckart_young_against_full_svd(rng):
    s = rng.standard_normal((50, 20))
    pod = compute_pod(s, Rank(5))
    full = np.linalg.svd(s, compute_uv=False)
    resid = np.linalg.norm(s - pod.reconstruct()) ** 2
    tail = np.sum(full[5:] ** 2)
    assert abs(resid - tail) <= 1e-8 * tail
    np.testing.assert_allclose(pod.singular_values, full[:5], rtol=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(1, 8), st.integers(1, 8))
def test_optimality_property(seed, n, nt, q):
    rng = np.random.default_rng(seed)
    s = rng.standard_normal((n, nt))
    q = min(q, n, nt)
    pod = compute_pod(s, Rank(q))
    tail = np.sum(pod.spectrum[pod.rank :] ** 2)
    resid = np.linalg.norm(s - pod.reconstruct()) ** 2
    assert abs(resid - tail) <= 1e-8 * max(tail, 1e-300) + 1e-24 * np.sum(s * s)


def test_result_invariants(rng):
    pod = compute_pod(rng.standard_normal((30, 12)), Rank(6))
    assert np.all(np.diff(pod.singular_values) <= 0)
    assert np.linalg.norm(pod.modes.T @ pod.modes - np.eye(6)) <= 1e-10
    assert np.linalg.norm(pod.temporal.T @ pod.temporal - np.eye(6)) <= 1e-10
    expected = np.sum(pod.singular_values**2) / np.sum(pod.spectrum**2)
    assert pod.energy_fraction == pytest.approx(expected, rel=1e-14)


def test_energy_fraction_monotone_in_rank(rng):
    s = rng.standard_normal((25, 10))
    fractions = [compute_pod(s, Rank(q)).energy_fraction for q in range(1, 11)]
    assert np.all(np.diff(fractions) >= 0)
    assert fractions[-1] == pytest.approx(1.0)


def test_energy_rule_is_smallest_sufficient_rank(rng):
    s = rng.standard_normal((40, 15)) * np.logspace(0, -3, 15)
    full = np.linalg.svd(s, compute_uv=False)
    frac = np.cumsum(full**2) / np.sum(full**2)
    for eps in (0.5, 0.9, 0.99, 0.999):
        assert compute_pod(s, Energy(eps)).rank == int(np.argmax(frac >= eps)) + 1


def test_scaled_orthonormal_columns_recovered_up_to_sign(rng):
    q = random_orthonormal(rng, 20, 4)
    pod = compute_pod(q * np.array([4.0, 3.0, 2.0, 1.0]), Rank(4))
    np.testing.assert_allclose(np.abs(pod.modes.T @ q), np.eye(4), atol=1e-12)
    np.testing.assert_allclose(pod.singular_values, [4.0, 3.0, 2.0, 1.0], rtol=1e-13)


def test_method_of_snapshots_agrees_with_direct_svd(rng):
    s = rng.standard_normal((200, 12))
    a = compute_pod(s, Rank(4))
    b = compute_pod(s, Rank(4), method="snapshots")
    np.testing.assert_allclose(b.singular_values, a.singular_values, rtol=1e-10)
    np.testing.assert_allclose(np.abs(a.modes.T @ b.modes), np.eye(4), atol=1e-8)


def test_centering(rng):
    s = rng.standard_normal((10, 6)) + 5.0
    pod = compute_pod(s, Rank(5), center=True)
    np.testing.assert_allclose(pod.mean, s.mean(axis=1))
    # centred data has rank <= N_t - 1, so five modes reproduce it exactly
    np.testing.assert_allclose(pod.reconstruct(), s, atol=1e-12)


def test_zero_modes_dropped_even_when_requested():
    s = np.outer(np.arange(1.0, 6.0), np.ones(4))
    pod = compute_pod(s, Rank(3))
    assert pod.rank == 1


@pytest.mark.parametrize(
    "snapshots, rule, match",
    [
        (np.ones((3, 2)), Rank(3), "exceeds"),
        (np.zeros((3, 2)), Rank(1), "zero"),
        (np.ones((3, 2)), 2, "Rank or Energy"),
    ],
)
def test_errors(snapshots, rule, match):
    with pytest.raises((ValueError, TypeError), match=match):
        compute_pod(snapshots, rule)


def test_rule_validation():
    with pytest.raises(ValueError):
        Rank(0)
    with pytest.raises(ValueError):
        Energy(0.0)
    with pytest.raises(ValueError):
        Energy(1.5)
    with pytest.raises(ValueError):
        compute_pod(np.eye(2), Rank(1), method="qr")
