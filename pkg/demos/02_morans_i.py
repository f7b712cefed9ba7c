"""
Moran's I: exact cases, permutation tests and regression residuals
==================================================================

Run with ``python demos/02_morans_i.py``.
"""

import numpy as np

from geomediate import distance_matrix, knn_weights, morans_i, ols_fit
from geomediate.spatial_weights import lattice_weights

# %% a 2x2 checkerboard under rook contiguity is perfectly dispersed
r = morans_i(np.array([1.0, -1.0, -1.0, 1.0]), lattice_weights(2, 2, rook=True))
print(f"checkerboard: I = {r.i_value}, E[I] = {r.expected_i:.4f}")

# %% a smooth Gaussian field versus white noise, analytic and permutation p
rng = np.random.default_rng(3)
pts = rng.uniform(0, 1, (100, 2))
cov = np.exp(-(distance_matrix(pts) / 0.15) ** 2) + 1e-6 * np.eye(100)
smooth = np.linalg.cholesky(cov) @ rng.standard_normal(100)
noise = rng.standard_normal(100)
w = knn_weights(pts, k=8)
for label, x in (("smooth field", smooth), ("white noise", noise)):
    r = morans_i(x, w, permutations=9999, seed=42)
    print(f"{label:13s} I = {r.i_value:+.3f}  z = {r.z:+.2f}  p = {r.p_value:.4f}  "
          f"p_perm = {r.permutation_p:.4f}  significant: {r.significant()}")

# %% residuals of a global regression inherit the spatial pattern it misses
n = 200
pts = rng.uniform(0, 1000, (n, 2))
x = rng.standard_normal(n)
level = np.sin(np.pi * pts[:, 0] / 1000)   # intercept drifts west to east
y = 1.0 + level + 0.5 * x + rng.normal(0, 0.2, n)
w = knn_weights(pts, k=8)
for label, X in (("x only", np.column_stack([np.ones(n), x])),
                 ("x and easting", np.column_stack([np.ones(n), x, level]))):
    r = morans_i(ols_fit(X, y).residuals, w)
    print(f"OLS residuals, {label:13s}: I = {r.i_value:+.3f}, z = {r.z:+.2f}")
