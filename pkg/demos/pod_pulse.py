"""Proper orthogonal decomposition of a translating Gaussian pulse.

The snapshot matrix of a pulse moving across the domain is compressed with
an energy threshold; the retained rank and the truncation residual are
compared with the tail of the singular spectrum.
"""

import numpy as np

from grassrom import Energy, Rank, TranslatingPulse, compute_pod

family = TranslatingPulse(n_points=512, n_times=128, width=0.25)
snapshots = family.snapshots(0.5)

for fraction in (0.9, 0.99, 0.999, 0.99999):
    pod = compute_pod(snapshots, Energy(fraction))
    resid = np.linalg.norm(snapshots - pod.reconstruct()) / np.linalg.norm(snapshots)
    print(f"energy {fraction:<8} rank {pod.rank:>2}  relative residual {resid:.2e}")

pod = compute_pod(snapshots, Rank(8))
full = np.linalg.svd(snapshots, compute_uv=False)
resid2 = np.linalg.norm(snapshots - pod.reconstruct()) ** 2
print("rank 8 residual^2", resid2, "tail energy", np.sum(full[8:] ** 2))
