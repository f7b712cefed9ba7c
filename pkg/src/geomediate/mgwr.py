"""Multiscale GWR fitted by backfitting.

Each additive term ``f_j = x_j * beta_j(u, v)`` is smoothed against its
partial residual with its own adaptive bandwidth. After the sweeps
converge, the per-term hat matrices ``R_j`` (``f_j = R_j y``) are obtained
by solving the backfitting fixed-point equations
``R_j + S_j sum_{k != j} R_k = S_j`` directly, where ``S_j`` is the
single-covariate GWR smoother of term ``j``. Their traces give the
per-term effective number of parameters.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DimensionMismatch, KOutOfRange
from .gwr import (
    KernelSpec,
    aicc,
    as_geometry,
    bandwidth_bracket,
    golden_section_search,
    gwr_criterion,
    gwr_fit,
    select_bandwidth,
)

log = logging.getLogger(__name__)


class NonConvergenceWarning(RuntimeWarning):
    pass


def soc_f(prev_fitted_terms, new_fitted_terms):
    """Score of change between two sweeps of additive terms.

    ``sqrt(mean_i (sum_j dF_ij)^2)`` divided by the RMS of the summed
    reference (previous) terms, so the score is linear in the change.
    """
    prev = np.asarray(prev_fitted_terms, dtype=float)
    new = np.asarray(new_fitted_terms, dtype=float)
    if prev.shape != new.shape:
        raise DimensionMismatch(f"shapes differ: {prev.shape} vs {new.shape}")
    n = prev.shape[0]
    num = np.sqrt(np.sum(np.sum(new - prev, axis=1) ** 2) / n)
    if num == 0.0:
        return 0.0
    den = np.sqrt(np.sum(np.sum(prev, axis=1) ** 2) / n)
    return float(num / den) if den > 0 else float("inf")


@dataclass(frozen=True)
class MgwrConfig:
    kernel: str = "gaussian"
    criterion: str = "aicc"
    tol: float = 1e-5
    max_iter: int = 200
    bandwidths: tuple | None = None
    init_bandwidth: int | None = None
    freeze_bandwidths: bool = False
    search_tol: float = 1e-5


@dataclass(frozen=True)
class MgwrFit:
    bandwidths: np.ndarray
    coefficient_surfaces: np.ndarray
    std_errors: np.ndarray
    pseudo_t: np.ndarray
    per_term_enp: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    hat_trace: float
    sigma2: float
    aicc: float
    r_squared: float
    adj_r_squared: float
    iterations: int
    soc_trace: list
    converged: bool
    names: tuple = ()
    bandwidth_trace: list = field(default_factory=list)
    init_bandwidth: int | None = None
    rss_trace: list = field(default_factory=list)

    @property
    def n(self):
        return len(self.fitted)

    @property
    def df_resid(self):
        return self.n - self.hat_trace

    def critical_t(self, alpha=0.05, correction=False):
        """Per-term two-sided critical |t|; the correction uses ``alpha / ENP_j``."""
        a = np.full(len(self.per_term_enp), float(alpha))
        if correction:
            a = a / np.maximum(self.per_term_enp, 1.0)
        return stats.t.ppf(1.0 - a / 2.0, self.df_resid)

    def significance_mask(self, alpha=0.05, correction=False):
        return np.abs(self.pseudo_t) > self.critical_t(alpha, correction)[None, :]

    def summary(self):
        return {
            "terms": list(self.names),
            "bandwidths": [int(b) for b in self.bandwidths],
            "enp": [float(e) for e in self.per_term_enp],
            "aicc": self.aicc,
            "r_squared": self.r_squared,
            "adj_r_squared": self.adj_r_squared,
            "hat_trace": self.hat_trace,
            "sigma2": self.sigma2,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _term_smoother(W, x):
    """Coefficient smoother ``P`` (beta = P e) of a single-covariate local fit."""
    den = W @ (x * x)
    return (W * x[None, :]) / den[:, None]


def _term_fit(W, x, e):
    beta = (W @ (x * e)) / (W @ (x * x))
    return beta


def _hat_components(Ps, X):
    """Solve the fixed-point system for the per-term hat matrices R_j."""
    n, k = X.shape
    S = [X[:, j][:, None] * Ps[j] for j in range(k)]
    if k == 1:
        return S
    A = np.eye(k * n)
    for j in range(k):
        for m in range(k):
            if m != j:
                A[j * n:(j + 1) * n, m * n:(m + 1) * n] = S[j]
    try:
        R = np.linalg.solve(A, np.vstack(S))
        return [R[j * n:(j + 1) * n] for j in range(k)]
    except np.linalg.LinAlgError:
        log.warning("direct hat solve failed; iterating backfitting on the smoothers")
    R = [s.copy() for s in S]
    for _ in range(10000):
        total = sum(R)
        delta = 0.0
        for j in range(k):
            new = S[j] @ (np.eye(n) - total + R[j])
            delta = max(delta, float(np.abs(new - R[j]).max()))
            total = total - R[j] + new
            R[j] = new
        if delta < 1e-12:
            break
    return R


def mgwr_fit(coords, y, X, names=None, config: MgwrConfig | None = None,
             metric="euclidean") -> MgwrFit:
    """Backfit a multiscale GWR of ``y`` on the columns of ``X``.

    Terms are updated in column order (intercept first when present).
    ``config.bandwidths`` pins every term's neighbour count and disables
    the search. Non-convergence within ``max_iter`` sweeps returns the last
    iterate with ``converged=False`` and a :class:`NonConvergenceWarning`.
    """
    cfg = config or MgwrConfig()
    geom = as_geometry(coords, metric)
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    names = tuple(names) if names is not None else tuple(f"x{j}" for j in range(k))
    lo, hi = bandwidth_bracket(geom, k, adaptive=True)

    pinned = None
    if cfg.bandwidths is not None:
        pinned = np.broadcast_to(np.asarray(cfg.bandwidths, dtype=int), (k,)).copy()
        if np.any(pinned < 1) or np.any(pinned > n):
            raise KOutOfRange("pinned bandwidths must lie in [1, n]", bandwidths=pinned.tolist())

    if cfg.init_bandwidth is not None:
        init = KernelSpec(cfg.kernel, True, int(cfg.init_bandwidth))
    elif pinned is not None and np.all(pinned == pinned[0]):
        init = KernelSpec(cfg.kernel, True, int(pinned[0]))
    else:
        init, _ = select_bandwidth(geom, y, X, cfg.kernel, cfg.criterion, tol=cfg.search_tol)
    start = gwr_fit(geom, y, X, init)
    beta = start.local_coefficients.copy()
    terms = X * beta
    resid = y - terms.sum(axis=1)
    bws = np.full(k, int(init.bandwidth)) if pinned is None else pinned.copy()

    soc_trace, bw_trace, rss_trace = [], [], []
    converged = False
    iters = 0
    for iters in range(1, cfg.max_iter + 1):
        new_terms = np.empty_like(terms)
        for j in range(k):
            x = X[:, j]
            e = resid + terms[:, j]
            if pinned is None and not (cfg.freeze_bandwidths and iters > 1):
                bws[j] = _select_term_bandwidth(geom, e, x, cfg, lo, hi)
            W = geom.weights(KernelSpec(cfg.kernel, True, int(bws[j])))
            beta[:, j] = _term_fit(W, x, e)
            new_terms[:, j] = x * beta[:, j]
            resid = e - new_terms[:, j]
        score = soc_f(terms, new_terms)
        terms = new_terms
        soc_trace.append(score)
        bw_trace.append(bws.tolist())
        rss_trace.append(float(resid @ resid))
        log.debug("sweep %d: SOC-f %.3e, bandwidths %s", iters, score, bws.tolist())
        if score < cfg.tol:
            converged = True
            break
    if cfg.max_iter == 0:
        iters = 0
    if not converged:
        warnings.warn(f"backfitting did not reach SOC-f < {cfg.tol} in {cfg.max_iter} sweeps",
                      NonConvergenceWarning, stacklevel=2)

    fit = _finalize(geom, y, X, names, cfg, bws, beta, terms, iters, soc_trace, bw_trace,
                    converged, int(init.bandwidth))
    fit.rss_trace.extend(rss_trace)
    return fit


def _select_term_bandwidth(geom, e, x, cfg, lo, hi):
    base = KernelSpec(cfg.kernel, True)
    Xj = x[:, None]

    def objective(bw):
        return gwr_criterion(geom, e, Xj, base.with_bandwidth(bw), cfg.criterion)

    best, _ = golden_section_search(objective, lo, hi, tol=cfg.search_tol, integer=True)
    return best


def _finalize(geom, y, X, names, cfg, bws, beta, terms, iters, soc_trace, bw_trace, converged,
              init_bw):
    n, k = X.shape
    Ps = [_term_smoother(geom.weights(KernelSpec(cfg.kernel, True, int(bws[j]))), X[:, j])
          for j in range(k)]
    R = _hat_components(Ps, X)
    enp = np.array([np.trace(r) for r in R])
    tr_s = float(enp.sum())
    fitted = terms.sum(axis=1)
    resid = y - fitted
    rss = float(resid @ resid)
    sigma2 = rss / (n - tr_s)
    total = sum(R)
    se = np.empty((n, k))
    for j in range(k):
        Cj = Ps[j] @ (np.eye(n) - total + R[j])
        se[:, j] = np.sqrt(sigma2 * np.sum(Cj * Cj, axis=1))
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / tss
    adj = 1.0 - (1.0 - r2) * (n - 1.0) / (n - tr_s - 1.0)
    try:
        score = aicc(rss, n, tr_s)
    except ValueError:
        score = np.inf
    return MgwrFit(bandwidths=np.asarray(bws, dtype=int), coefficient_surfaces=beta,
                   std_errors=se, pseudo_t=beta / se, per_term_enp=enp, fitted=fitted,
                   residuals=resid, hat_trace=tr_s, sigma2=sigma2, aicc=score, r_squared=r2,
                   adj_r_squared=adj, iterations=iters, soc_trace=soc_trace,
                   converged=converged, names=names, bandwidth_trace=bw_trace,
                   init_bandwidth=init_bw)
