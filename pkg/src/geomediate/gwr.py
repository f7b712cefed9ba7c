"""Geographically weighted regression with a single bandwidth.

Local fits are computed for all regression points at once: the weighted
cross products ``X'W(i)X`` for every ``i`` are a single matrix product of
the kernel-weight matrix with the column-pair products of ``X``.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import (
    BadBracket,
    DegreesOfFreedomExhausted,
    KOutOfRange,
    LocalRankDeficient,
    MaxIterExceeded,
    NonpositiveBandwidth,
)
from .spatial_weights import distance_matrix

KERNELS = ("gaussian", "bisquare")
LOCAL_RCOND = 1e-12
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class KernelSpec:
    """Kernel shape plus bandwidth.

    Adaptive bandwidths are neighbour counts ``N``: the kernel scale at
    point ``i`` is the distance to its ``N``-th nearest other point.
    """

    kind: str = "gaussian"
    adaptive: bool = True
    bandwidth: float | None = None

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise NonpositiveBandwidth(f"bandwidth must be positive, got {self.bandwidth}")

    def with_bandwidth(self, bw):
        return KernelSpec(self.kind, self.adaptive, int(round(bw)) if self.adaptive else float(bw))


def kernel_weight(d, b, kind="gaussian"):
    d = np.asarray(d, dtype=float)
    if np.any(np.asarray(b) <= 0):
        raise NonpositiveBandwidth("bandwidth must be positive")
    r = d / b
    if kind == "gaussian":
        return np.exp(-0.5 * r * r)
    if kind == "bisquare":
        return np.where(r < 1.0, (1.0 - r * r) ** 2, 0.0)
    raise ValueError(f"unknown kernel {kind!r}")


class Geometry:
    """Pairwise distances for a fixed point set, with a small cache of kernel matrices."""

    def __init__(self, coords, metric="euclidean", cache_size=48):
        self.coords = np.asarray(coords, dtype=float)
        self.metric = metric
        self.d = distance_matrix(self.coords, metric)
        self.sorted = np.sort(self.d, axis=1)[:, 1:]
        self.n = self.d.shape[0]
        self._cache = OrderedDict()
        self._cache_size = cache_size

    @property
    def diameter(self):
        return float(self.d.max())

    def nth_neighbour_distance(self, N):
        N = int(round(N))
        if not 1 <= N <= self.n - 1:
            raise KOutOfRange(f"neighbour count {N} outside [1, {self.n - 1}]", k=N, n=self.n)
        return self.sorted[:, N - 1]

    def scales(self, kernel: KernelSpec):
        if kernel.adaptive:
            # a count of n (all points including self) maps to the farthest point
            return self.nth_neighbour_distance(min(int(round(kernel.bandwidth)), self.n - 1))
        return np.full(self.n, float(kernel.bandwidth))

    def weights(self, kernel: KernelSpec):
        key = (kernel.kind, kernel.adaptive, kernel.bandwidth)
        W = self._cache.get(key)
        if W is None:
            W = kernel_weight(self.d, self.scales(kernel)[:, None], kernel.kind)
            self._cache[key] = W
            if len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        else:
            self._cache.move_to_end(key)
        return W


def as_geometry(coords, metric="euclidean"):
    return coords if isinstance(coords, Geometry) else Geometry(coords, metric)


def adaptive_bandwidth_distance(coords, i, N, metric="euclidean"):
    return float(as_geometry(coords, metric).nth_neighbour_distance(N)[i])


def aicc(rss, n, hat_trace):
    denom = n - 2.0 - hat_trace
    if not denom > 0:
        raise DegreesOfFreedomExhausted(
            f"n - 2 - tr(S) = {denom:.6g} must be positive", n=n, hat_trace=float(hat_trace))
    if not rss > 0:
        raise ValueError("rss must be positive")
    return (2.0 * n * math.log(math.sqrt(rss / n)) + n * math.log(2.0 * math.pi)
            + n * (n + hat_trace) / denom)


def _pair_products(X):
    n, k = X.shape
    return (X[:, :, None] * X[:, None, :]).reshape(n, k * k)


def _local_inverse(W, X):
    n, k = X.shape
    XtWX = (W @ _pair_products(X)).reshape(n, k, k)
    ev = np.linalg.eigvalsh(XtWX)
    bad = ev[:, 0] <= LOCAL_RCOND * np.abs(ev[:, -1])
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise LocalRankDeficient(f"local design is rank deficient at location {i}", location=i)
    return np.linalg.inv(XtWX)


def _local_solve(W, y, X):
    C = _local_inverse(W, X)
    beta = np.einsum("ikl,il->ik", C, W @ (X * y[:, None]))
    hat_diag = np.diag(W) * np.einsum("ik,ikl,il->i", X, C, X)
    return C, beta, hat_diag


def gwr_criterion(geom, y, X, kernel, criterion="aicc"):
    """Score one bandwidth without building the full hat matrix."""
    try:
        _, beta, hat = _local_solve(geom.weights(kernel), y, X)
    except LocalRankDeficient:
        return np.inf
    resid = y - np.sum(X * beta, axis=1)
    n = len(y)
    if criterion == "cv":
        with np.errstate(divide="ignore"):
            return float(np.sum((resid / (1.0 - hat)) ** 2) / n)
    try:
        return aicc(float(resid @ resid), n, float(hat.sum()))
    except (DegreesOfFreedomExhausted, ValueError):
        return np.inf


@dataclass(frozen=True)
class GwrFit:
    local_coefficients: np.ndarray
    local_std_errors: np.ndarray
    pseudo_t: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    hat_trace: float
    trace_sts: float
    sigma2: float
    aicc: float
    r_squared: float
    adj_r_squared: float
    bandwidth: KernelSpec
    names: tuple = ()
    search_trace: list = field(default_factory=list)

    @property
    def n(self):
        return len(self.fitted)

    @property
    def df_resid(self):
        return self.n - self.hat_trace

    def critical_t(self, alpha=0.05, correction=False):
        if correction:
            k = self.local_coefficients.shape[1]
            alpha = alpha * k / self.hat_trace
        return float(stats.t.ppf(1.0 - alpha / 2.0, self.df_resid))

    def significance_mask(self, alpha=0.05, correction=False):
        return np.abs(self.pseudo_t) > self.critical_t(alpha, correction)

    def summary(self):
        return {
            "bandwidth": self.bandwidth.bandwidth,
            "kernel": self.bandwidth.kind,
            "adaptive": self.bandwidth.adaptive,
            "aicc": self.aicc,
            "r_squared": self.r_squared,
            "adj_r_squared": self.adj_r_squared,
            "hat_trace": self.hat_trace,
            "sigma2": self.sigma2,
        }


def gwr_fit(coords, y, X, kernel: KernelSpec, names=None, metric="euclidean") -> GwrFit:
    """Local weighted least squares at every sample location.

    ``X`` carries its own intercept column. Standard errors use
    ``sigma2 = rss / (n - 2 tr(S) + tr(S'S))``.
    """
    geom = as_geometry(coords, metric)
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if kernel.bandwidth is None:
        raise NonpositiveBandwidth("kernel has no bandwidth; use select_bandwidth")
    n, k = X.shape
    W = geom.weights(kernel)
    C, beta, hat_diag = _local_solve(W, y, X)
    fitted = np.sum(X * beta, axis=1)
    resid = y - fitted
    A = np.einsum("ik,ikl->il", X, C)
    S = (A @ X.T) * W
    tr_s = float(hat_diag.sum())
    tr_sts = float(np.sum(S * S))
    rss = float(resid @ resid)
    sigma2 = rss / (n - 2.0 * tr_s + tr_sts)
    XtW2X = ((W * W) @ _pair_products(X)).reshape(n, k, k)
    var = np.einsum("ikl,ilm,imk->ik", C, XtW2X, C)
    se = np.sqrt(sigma2 * var)
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / tss
    adj = 1.0 - (1.0 - r2) * (n - 1.0) / (n - tr_s - 1.0)
    try:
        score = aicc(rss, n, tr_s)
    except (DegreesOfFreedomExhausted, ValueError):
        score = np.inf
    return GwrFit(local_coefficients=beta, local_std_errors=se, pseudo_t=beta / se,
                  fitted=fitted, residuals=resid, hat_trace=tr_s, trace_sts=tr_sts,
                  sigma2=sigma2, aicc=score, r_squared=r2, adj_r_squared=adj, bandwidth=kernel,
                  names=tuple(names) if names is not None else ())


def golden_section_search(objective, lo, hi, tol=1e-5, max_iter=200, integer=False):
    """Minimize ``objective`` on ``[lo, hi]``.

    Returns ``(argmin, trace)`` where ``trace`` lists every evaluated
    ``(x, f(x))`` pair in evaluation order. Both bracket ends are always
    scored, so a monotone objective returns the better boundary. In integer
    mode candidates are rounded, evaluations are memoized and the final
    bracket of at most three integers is scanned exhaustively.
    """
    if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
        if integer and np.isfinite(lo) and lo == hi:
            v = objective(int(lo))
            return int(lo), [(int(lo), v)]
        raise BadBracket(f"need lo < hi, got [{lo}, {hi}]", lo=lo, hi=hi)
    cache = {}
    trace = []

    def f(x):
        if integer:
            x = int(round(x))
        if x not in cache:
            cache[x] = float(objective(x))
            trace.append((x, cache[x]))
        return cache[x]

    a, b = float(lo), float(hi)
    if integer:
        a, b = math.ceil(a), math.floor(b)
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    iters = 0
    done = (lambda: b - a <= 3) if integer else (lambda: b - a <= tol)
    while not done():
        if iters >= max_iter:
            raise MaxIterExceeded(f"no convergence after {max_iter} iterations",
                                  bracket=[a, b])
        if f(c) <= f(d):
            b = d
        else:
            a = c
        c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
        iters += 1
    if integer:
        candidates = list(range(int(math.ceil(a)), int(math.floor(b)) + 1))
    else:
        candidates = [0.5 * (a + b)]
    candidates += [lo, hi]
    best = min(candidates, key=lambda x: (f(x), x))
    return (int(round(best)) if integer else best), trace


def bandwidth_bracket(geom, k, adaptive=True):
    if adaptive:
        return k + 1, geom.n
    nn = geom.sorted[:, 0].min()
    return nn / 2.0, 2.0 * geom.diameter


def select_bandwidth(coords, y, X, kind="gaussian", criterion="aicc", adaptive=True,
                     bracket=None, tol=1e-5, max_iter=200, metric="euclidean"):
    """Golden-section search for the criterion-optimal bandwidth.

    The adaptive bracket is ``[p + 2, n]`` in neighbour counts.
    """
    geom = as_geometry(coords, metric)
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    lo, hi = bracket if bracket is not None else bandwidth_bracket(geom, X.shape[1], adaptive)
    base = KernelSpec(kind, adaptive)

    def objective(bw):
        return gwr_criterion(geom, y, X, base.with_bandwidth(bw), criterion)

    best, trace = golden_section_search(objective, lo, hi, tol=tol, max_iter=max_iter,
                                        integer=adaptive)
    return base.with_bandwidth(best), trace
