import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from grassrom.itsgm import SampleSet
from grassrom.pod import Rank, compute_pod
from grassrom.toyflow import TranslatingPulse

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE = []


def random_orthonormal(rng, n, q):
    """Orthonormal basis via LAPACK QR; independent of the package kernels."""
    q_, r = np.linalg.qr(rng.standard_normal((n, q)))
    return q_ * np.sign(np.diag(r))


def random_orthogonal(rng, q):
    return random_orthonormal(rng, q, q)


def pulse_samples(gammas, n=512, nt=128, width=0.25, q=8):
    fam = TranslatingPulse(n, nt, width)
    pods = [compute_pod(fam.snapshots(g), Rank(q)) for g in gammas]
    return fam, SampleSet.from_pods(gammas, pods)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def pulse5():
    """Toy-default translating pulse with 5 training samples."""
    return pulse_samples(np.linspace(0.1, 0.9, 5))


@pytest.fixture(scope="session")
def pulse_bench():
    """Timing-contract scale: N=2000, N_t=200, q=10, N_p=5."""
    return pulse_samples(np.linspace(0.1, 0.9, 5), n=2000, nt=200, width=0.1, q=10)


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion; printed in the summary."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE.append((number, line))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)
