"""Distances, neighbour weights and global Moran's I."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse, stats

from . import _rng
from .errors import (
    DegenerateCoordinates,
    DimensionMismatch,
    KOutOfRange,
    ZeroVariance,
)

EARTH_RADIUS_M = 6371000.0
Z_CRIT_01 = 2.58


def haversine(lon1, lat1, lon2, lat2, radius=EARTH_RADIUS_M):
    lon1, lat1, lon2, lat2 = map(np.radians, (lon1, lat1, lon2, lat2))
    a = (np.sin((lat2 - lat1) / 2) ** 2
         + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2)
    return 2 * radius * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def distance_matrix(coords, metric="euclidean"):
    """Symmetric pairwise distance matrix.

    ``metric="haversine"`` expects ``(lon, lat)`` in degrees and returns meters.
    """
    c = np.asarray(coords, dtype=float)
    if c.ndim != 2 or c.shape[1] != 2 or c.shape[0] < 2:
        raise DegenerateCoordinates("need at least two 2-d points")
    if not np.all(np.isfinite(c)):
        raise DegenerateCoordinates("coordinates must be finite")
    if metric == "euclidean":
        diff = c[:, None, :] - c[None, :, :]
        d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    elif metric == "haversine":
        d = haversine(c[:, None, 0], c[:, None, 1], c[None, :, 0], c[None, :, 1])
    else:
        raise ValueError(f"unknown metric {metric!r}")
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    off = d[~np.eye(len(c), dtype=bool)]
    if np.any(off <= 0):
        i, j = np.argwhere((d <= 0) & ~np.eye(len(c), dtype=bool))[0]
        raise DegenerateCoordinates(f"points {i} and {j} coincide", pair=[int(i), int(j)])
    return d


def metric_for(coord_system):
    return "haversine" if coord_system == "wgs84_degrees" else "euclidean"


def neighbour_order(d):
    """Row-wise indices of the other points sorted by distance (ties by lower index)."""
    order = np.argsort(d, axis=1, kind="stable")
    # self is the unique zero on each row (distance_matrix guarantees it), hence first
    return order[:, 1:]


@dataclass(frozen=True)
class WeightsMatrix:
    entries: sparse.csr_matrix
    row_standardized: bool
    construction: str

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def s0(self):
        return float(self.entries.sum())

    def dense(self):
        return self.entries.toarray()

    @classmethod
    def from_dense(cls, w, row_standardize=False, construction="custom"):
        w = np.array(w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionMismatch("weights must be square")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        np.fill_diagonal(w, 0.0)
        if row_standardize:
            rs = w.sum(axis=1, keepdims=True)
            w = np.divide(w, rs, out=np.zeros_like(w), where=rs > 0)
        return cls(sparse.csr_matrix(w), bool(row_standardize), construction)


def knn_weights(coords, k=8, row_standardize=True, metric="euclidean") -> WeightsMatrix:
    d = distance_matrix(coords, metric)
    n = d.shape[0]
    if not 1 <= k <= n - 1:
        raise KOutOfRange(f"k = {k} outside [1, {n - 1}]", k=k, n=n)
    nbrs = neighbour_order(d)[:, :k]
    rows = np.repeat(np.arange(n), k)
    w = sparse.csr_matrix((np.ones(n * k), (rows, nbrs.ravel())), shape=(n, n))
    if row_standardize:
        w = sparse.diags(1.0 / k * np.ones(n)) @ w
    return WeightsMatrix(sparse.csr_matrix(w), row_standardize, f"knn({k})")


def distance_band_weights(coords, radius, row_standardize=True, metric="euclidean"):
    d = distance_matrix(coords, metric)
    w = ((d <= radius) & (d > 0)).astype(float)
    return WeightsMatrix.from_dense(w, row_standardize, f"distance_band({radius})")


def inverse_distance_weights(coords, power=1.0, row_standardize=True, metric="euclidean"):
    d = distance_matrix(coords, metric)
    with np.errstate(divide="ignore"):
        w = np.where(d > 0, d ** -float(power), 0.0)
    return WeightsMatrix.from_dense(w, row_standardize, f"inverse_distance({power})")


def lattice_weights(nrows, ncols, rook=True, row_standardize=False):
    """Contiguity weights on a regular lattice, cells numbered row-major."""
    n = nrows * ncols
    w = np.zeros((n, n))
    steps = [(0, 1), (1, 0), (0, -1), (-1, 0)]
    if not rook:
        steps += [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    for r in range(nrows):
        for c in range(ncols):
            for dr, dc in steps:
                rr, cc = r + dr, c + dc
                if 0 <= rr < nrows and 0 <= cc < ncols:
                    w[r * ncols + c, rr * ncols + cc] = 1.0
    return WeightsMatrix.from_dense(w, row_standardize, "rook" if rook else "queen")


@dataclass(frozen=True)
class MoranResult:
    i_value: float
    expected_i: float
    variance: float
    z: float
    p_value: float
    permutation_p: float | None = None
    permutations: int = 0

    def significant(self, z_crit=Z_CRIT_01, alpha=0.01):
        """Positive spatial autocorrelation: I > E[I], |z| > z_crit and p < alpha."""
        return self.i_value > 0 and abs(self.z) > z_crit and self.p_value < alpha


def _moran_stat(z, w, s0, zz):
    n = z.shape[-1]
    lag = (w @ z.T).T if z.ndim == 2 else w @ z
    return n / s0 * np.sum(z * lag, axis=-1) / zz


def morans_i(values, w: WeightsMatrix, permutations=0, seed=42, workers=1) -> MoranResult:
    """Global Moran's I with randomization-assumption variance.

    The permutation p-value is two-sided around E[I]:
    ``(1 + #{|I_perm - E| >= |I - E|}) / (1 + permutations)``. Permutation
    ``k`` draws from its own indexed stream, so the result does not depend
    on ``workers``.
    """
    x = np.asarray(values, dtype=float)
    n = x.shape[0]
    if w.n != n:
        raise DimensionMismatch(f"weights are {w.n}x{w.n} but {n} values given")
    if n == 0 or np.all(x == x[0]):
        raise ZeroVariance("values are constant")
    z = x - x.mean()
    zz = float(z @ z)

    W = w.entries
    s0 = w.s0
    i_val = float(_moran_stat(z, W, s0, zz))
    e_i = -1.0 / (n - 1)

    Wsym = W + W.T
    s1 = 0.5 * float(Wsym.multiply(Wsym).sum())
    rs = np.asarray(W.sum(axis=1)).ravel()
    cs = np.asarray(W.sum(axis=0)).ravel()
    s2 = float(np.sum((rs + cs) ** 2))
    b2 = n * float(np.sum(z**4)) / zz**2
    num = (n * ((n * n - 3 * n + 3) * s1 - n * s2 + 3 * s0 * s0)
           - b2 * ((n * n - n) * s1 - 2 * n * s2 + 6 * s0 * s0))
    if n > 3:
        var = num / ((n - 1) * (n - 2) * (n - 3) * s0 * s0) - e_i * e_i
    else:
        var = np.nan
    if var <= 1e-14 * e_i * e_i:
        # complete graphs make I constant under relabelling
        var, zval, p = 0.0, 0.0, 1.0
    else:
        zval = (i_val - e_i) / np.sqrt(var)
        p = float(2.0 * stats.norm.sf(abs(zval)))

    perm_p = None
    if permutations > 0:
        def block(idx):
            Z = np.stack([_rng.stream(seed, k).permutation(z) for k in idx])
            return _moran_stat(Z, W, s0, zz)

        sims = np.concatenate(_rng.run_chunked(block, permutations, workers))
        extreme = np.sum(np.abs(sims - e_i) >= abs(i_val - e_i) - 1e-12)
        perm_p = float((extreme + 1) / (permutations + 1))
    return MoranResult(i_val, e_i, float(var), float(zval), p, perm_p, int(permutations))
