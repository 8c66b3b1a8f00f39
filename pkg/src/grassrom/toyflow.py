"""Analytic parametric snapshot families with closed-form ground truth."""

from dataclasses import dataclass

import numpy as np

__all__ = ["TranslatingPulse", "RotatingSubspace", "generate_snapshots", "exact_subspace"]


@dataclass(frozen=True)
class TranslatingPulse:
    """Gaussian pulse ``u(x, t; gamma) = exp(-(x - gamma t)^2 / width^2)``.

    ``x`` and ``t`` are uniform grids on [0, 1]; ``gamma`` is the pulse speed.
    Speeds in [0, 1] keep the pulse centre inside the domain.
    """

    n_points: int = 512
    n_times: int = 128
    width: float = 0.25
    gamma_range: tuple = (0.0, 1.0)

    def __post_init__(self):
        if self.n_points < 1 or self.n_times < 1:
            raise ValueError("grid sizes must be positive")
        if not self.width > 0:
            raise ValueError(f"pulse width must be positive, got {self.width}")

    @property
    def x(self):
        return np.linspace(0.0, 1.0, self.n_points)

    @property
    def t(self):
        return np.linspace(0.0, 1.0, self.n_times)

    def snapshots(self, gamma):
        gamma = float(gamma)
        lo, hi = self.gamma_range
        if not lo <= gamma <= hi:
            raise ValueError(f"pulse speed {gamma} outside [{lo}, {hi}]")
        centre = gamma * self.t
        return np.exp(-(((self.x[:, None] - centre[None, :]) / self.width) ** 2))


@dataclass(frozen=True)
class RotatingSubspace:
    """Geodesic line ``span{cos(g) e1 + sin(g) e2, e3, ..., e_{q+1}}`` in R^N.

    Members at ``a`` and ``b`` differ by a single principal angle ``|a - b|``.
    Queries are restricted to ``|gamma| < pi/4`` so every pair of members
    stays inside the log-map neighborhood of each other.
    """

    n_points: int = 20
    q: int = 3

    def __post_init__(self):
        if self.q < 1 or self.n_points <= self.q + 1:
            raise ValueError(f"need N > q + 1, got N={self.n_points}, q={self.q}")

    def basis(self, gamma):
        gamma = float(gamma)
        if not abs(gamma) < np.pi / 4:
            raise ValueError(f"rotation angle {gamma} outside (-pi/4, pi/4)")
        phi = np.zeros((self.n_points, self.q))
        phi[0, 0] = np.cos(gamma)
        phi[1, 0] = np.sin(gamma)
        phi[np.arange(2, self.q + 1), np.arange(1, self.q)] = 1.0
        return phi

    def snapshots(self, gamma):
        """N x q snapshot matrix whose POD modes span the family member."""
        return self.basis(gamma) * np.arange(self.q, 0, -1, dtype=float)


def generate_snapshots(family, gamma):
    return family.snapshots(gamma)


def exact_subspace(family, gamma):
    return family.basis(gamma)
