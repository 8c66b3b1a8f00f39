"""Interpolating POD bases on the Grassmann manifold.

On a family that moves along a geodesic the tangent velocities are linear in
the parameter, so Lagrange interpolation is exact everywhere; RBF and IDW
weights do not reproduce linear functions and miss by a few percent. On the
translating pulse every method is an approximation whose quality depends on
the sample spacing.
"""

import numpy as np

from grassrom import (
    Idw,
    Lagrange,
    Rank,
    Rbf,
    RotatingSubspace,
    SampleSet,
    TranslatingPulse,
    compute_pod,
    geodesic_distance,
    itsgm_interpolate,
)

rotation = RotatingSubspace(60, 3)
gammas = np.array([-0.5, 0.0, 0.6])
samples = SampleSet(gammas, [rotation.basis(g) for g in gammas])
print("rotating subspace, 3 samples")
for method in (Lagrange(), Rbf(), Idw()):
    errors = [geodesic_distance(itsgm_interpolate(samples, g, method=method), rotation.basis(g)) for g in (-0.25, 0.3)]
    print(f"  {type(method).__name__:<9} midpoint distances {errors[0]:.1e} {errors[1]:.1e}")

pulse = TranslatingPulse(512, 128, 0.25)
print("translating pulse, rank-8 bases, query at a midpoint")
for n_p in (3, 5, 9):
    gammas = np.linspace(0.1, 0.9, n_p)
    samples = SampleSet.from_pods(gammas, [compute_pod(pulse.snapshots(g), Rank(8)) for g in gammas])
    g = 0.5 * (gammas[0] + gammas[1])
    truth = compute_pod(pulse.snapshots(g), Rank(8)).modes
    print(f"  N_p={n_p}  distance to the true basis {geodesic_distance(itsgm_interpolate(samples, g), truth):.3e}")
