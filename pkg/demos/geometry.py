"""Distances, logarithms and geodesics between subspaces.

Two 3-dimensional subspaces of R^50 are planted with known principal angles.
The script recovers the angles, maps the second subspace into the tangent
space of the first and walks back along the geodesic.
"""

import numpy as np

from grassrom import exp_map, geodesic_distance, log_map, principal_angles

rng = np.random.default_rng(0)
thetas = np.array([0.1, 0.5, 1.2])

frame, _ = np.linalg.qr(rng.standard_normal((50, 6)))
x = frame[:, :3]
y = x * np.cos(thetas) + frame[:, 3:] * np.sin(thetas)
# any other basis of the same subspaces gives the same answers
x = x @ np.linalg.qr(rng.standard_normal((3, 3)))[0]
y = y @ np.linalg.qr(rng.standard_normal((3, 3)))[0]

print("planted angles   ", thetas)
print("recovered angles ", principal_angles(x, y))
print("distance         ", geodesic_distance(x, y), "vs", np.linalg.norm(thetas))

velocity = log_map(x, y)
print("velocity norm    ", velocity.norm)
print("x^T velocity     ", np.linalg.norm(x.T @ velocity.delta), "(horizontal)")

# points along the geodesic are at proportional distances
for t in (0.25, 0.5, 1.0):
    p = exp_map(x, t * velocity.delta)
    print(f"t={t:<4} d(x, p)={geodesic_distance(x, p):.6f}  d(p, y)={geodesic_distance(p, y):.6f}")
