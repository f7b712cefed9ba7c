"""Single-mediator path models: global and spatially varying.

Globally the three equations are fitted by OLS::

    M ~ 1 + x          (a_j)
    y ~ 1 + x + M      (c'_j, b)
    y ~ 1 + x          (total_j)

and for nested least-squares designs ``total_j = c'_j + a_j b`` holds
exactly. Spatially the same three equations are fitted as MGWR models and
combined location by location.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .core_model import Dataset, ModelSpec, ScalingInfo, standardize as _standardize
from .errors import (
    BootstrapDegenerate,
    InconsistentSpec,
    NonPositiveDefiniteCovariance,
)
from .mgwr import MgwrConfig, MgwrFit, mgwr_fit
from .regress import OlsFit, ols_fit
from .spatial_weights import metric_for

FULL, PARTIAL, SUPPRESSION, NONE = "full", "partial", "suppression", "none"

CUTOFFS = {
    "cfi": (">", 0.95),
    "rmsea": ("<", 0.08),
    "srmr": ("<", 0.09),
    "cmin_df": ("<", 2.0),
}


@dataclass(frozen=True)
class Decomposition:
    direct: float
    indirect: float
    total: float
    classification: str


def mediation_decompose(a, b, c_prime=None, *, a_sig=True, b_sig=True, c_sig=True):
    """Product-of-coefficients decomposition of one predictor's effect.

    ``c_prime=None`` means the direct path is absent from the model.
    The indirect path counts as present when both ``a`` and ``b`` are
    significant and nonzero.
    """
    indirect = a * b
    direct_present = c_prime is not None and c_sig and c_prime != 0
    c = 0.0 if c_prime is None else c_prime
    total = c + indirect
    if not (a_sig and b_sig) or indirect == 0:
        kind = NONE
    elif not direct_present:
        kind = FULL
    elif math.copysign(1.0, c) != math.copysign(1.0, indirect):
        kind = SUPPRESSION
    else:
        kind = PARTIAL
    return Decomposition(c, indirect, total, kind)


@dataclass(frozen=True)
class PathEffect:
    predictor: str
    a: float
    a_se: float
    a_p: float
    c_prime: float
    c_prime_se: float
    c_prime_p: float
    indirect: float
    total: float
    total_regression: float
    ci_low: float
    ci_high: float
    classification: str


@dataclass(frozen=True)
class MediationEffects:
    effects: list
    b: float
    b_se: float
    b_p: float
    mediator_fit: OlsFit
    outcome_fit: OlsFit
    total_fit: OlsFit
    bootstrap: np.ndarray
    redraws: int
    ci_level: float
    seed: int
    scaling: ScalingInfo | None = None

    def __getitem__(self, predictor):
        for e in self.effects:
            if e.predictor == predictor:
                return e
        raise KeyError(predictor)

    def report_rows(self, mediator="M", outcome="y"):
        """Rows shaped like a path table: path, beta, SE, p and effect columns."""
        rows = [{"path": f"{mediator} -> {outcome}", "beta": self.b, "se": self.b_se,
                 "p": self.b_p}]
        for e in self.effects:
            rows.append({"path": f"{e.predictor} -> {mediator}", "beta": e.a, "se": e.a_se,
                         "p": e.a_p})
            rows.append({"path": f"{e.predictor} -> {outcome}", "beta": e.c_prime,
                         "se": e.c_prime_se, "p": e.c_prime_p})
            rows.append({"path": f"{e.predictor} -> {mediator} -> {outcome}",
                         "direct": e.c_prime, "indirect": e.indirect, "total": e.total,
                         "ci_low": e.ci_low, "ci_high": e.ci_high,
                         "classification": e.classification})
        return rows


def _three_designs(data, spec):
    preds = list(spec.predictor_subset)
    m, Xm, nm = data.design(spec.mediator_name, preds, spec.include_intercept)
    y, Xy, ny = data.design(spec.outcome_name, preds + [spec.mediator_name],
                            spec.include_intercept)
    _, Xt, nt = data.design(spec.outcome_name, preds, spec.include_intercept)
    return (m, Xm, nm), (y, Xy, ny), (y, Xt, nt)


def _prepare(data: Dataset, spec: ModelSpec, standardize):
    if spec.mediator_name in spec.predictor_subset:
        raise InconsistentSpec("mediator listed as a predictor", mediator=spec.mediator_name)
    spec.check(data)
    scaling = None
    if standardize and not data.standardized:
        data, scaling = _standardize(data)
    return data, scaling


def _indirect(Xm, m, Xy, y, p, off):
    a = np.linalg.lstsq(Xm, m, rcond=None)[0][off:off + p]
    cb = np.linalg.lstsq(Xy, y, rcond=None)[0]
    return a * cb[off + p]


def fit_global_mediation(data: Dataset, spec: ModelSpec, B=2000, seed=42, ci_level=0.95,
                         alpha=0.05, standardize=True, workers=1, max_redraws=None):
    """Equation-wise OLS mediation with percentile bootstrap CIs for ``a_j b``.

    Replicate ``r`` resamples cases from stream ``(seed, r)``; a
    rank-deficient replicate is redrawn from the same stream and counted.
    """
    data, scaling = _prepare(data, spec, standardize)
    (m, Xm, nm), (y, Xy, ny), (_, Xt, nt) = _three_designs(data, spec)
    fm, fy, ft = ols_fit(Xm, m, nm), ols_fit(Xy, y, ny), ols_fit(Xt, y, nt)
    p = len(spec.predictor_subset)
    off = 1 if spec.include_intercept else 0
    b_idx = off + p
    n = data.n
    max_redraws = max_redraws if max_redraws is not None else max(100, B)

    def block(idx):
        out = np.empty((len(idx), p))
        redraws = 0
        for row, r in enumerate(idx):
            rng = _rng.stream(seed, r)
            while True:
                take = rng.integers(0, n, n)
                s_m, s_y = np.linalg.svd(Xy[take], compute_uv=False)[[0, -1]]
                if s_y > 1e-12 * s_m:
                    break
                redraws += 1
                if redraws > max_redraws:
                    raise BootstrapDegenerate("too many rank-deficient replicates",
                                              redraws=redraws)
            out[row] = _indirect(Xm[take], m[take], Xy[take], y[take], p, off)
        return out, redraws

    parts = _rng.run_chunked(block, B, workers) if B > 0 else []
    boot = np.vstack([pt[0] for pt in parts]) if parts else np.empty((0, p))
    redraws = sum(pt[1] for pt in parts)
    lo_q, hi_q = (1 - ci_level) / 2, 1 - (1 - ci_level) / 2

    effects = []
    b = float(fy.coefficients[b_idx])
    for j, name in enumerate(spec.predictor_subset):
        a = float(fm.coefficients[off + j])
        c = float(fy.coefficients[off + j])
        dec = mediation_decompose(a, b, c, a_sig=fm.p_values[off + j] < alpha,
                                  b_sig=fy.p_values[b_idx] < alpha,
                                  c_sig=fy.p_values[off + j] < alpha)
        if B > 0:
            ci = np.quantile(boot[:, j], [lo_q, hi_q])
        else:
            ci = (np.nan, np.nan)
        effects.append(PathEffect(
            predictor=name, a=a, a_se=float(fm.std_errors[off + j]),
            a_p=float(fm.p_values[off + j]), c_prime=c,
            c_prime_se=float(fy.std_errors[off + j]), c_prime_p=float(fy.p_values[off + j]),
            indirect=dec.indirect, total=c + a * b,
            total_regression=float(ft.coefficients[off + j]),
            ci_low=float(ci[0]), ci_high=float(ci[1]), classification=dec.classification))
    return MediationEffects(effects, b, float(fy.std_errors[b_idx]), float(fy.p_values[b_idx]),
                            fm, fy, ft, boot, int(redraws), ci_level, seed, scaling)


# -- path-model fit indices -------------------------------------------------

@dataclass(frozen=True)
class FitIndices:
    chi_square: float
    df: int
    cmin_df: float
    cfi: float
    rmsea: float
    srmr: float
    baseline_chi_square: float = float("nan")
    baseline_df: int = 0
    verdicts: dict = field(default_factory=dict)

    @property
    def acceptable(self):
        return all(self.verdicts.values())


def fit_verdicts(cfi, rmsea, srmr, cmin_df):
    """Compare each index with its conventional cutoff (CFI > .95, RMSEA < .08,
    SRMR < .09, CMIN/DF < 2). A NaN ratio (zero df) counts as acceptable."""
    values = {"cfi": cfi, "rmsea": rmsea, "srmr": srmr, "cmin_df": cmin_df}
    out = {}
    for key, (op, cut) in CUTOFFS.items():
        v = values[key]
        if v is None or (isinstance(v, float) and math.isnan(v)):
            out[key] = True
        else:
            out[key] = v > cut if op == ">" else v < cut
    return out


def implied_covariance(S, p, mediator_paths, direct_paths):
    """ML-implied covariance of ``[x_1..x_p, M, y]`` for the recursive path model.

    For a recursive model with free exogenous covariances the ML estimates
    are the equation-wise regressions computed from ``S``.
    """
    q = p + 2
    im, iy = p, p + 1
    A = list(mediator_paths)
    D = list(direct_paths)
    B = np.zeros((q, q))
    psi = np.zeros(q)
    if A:
        a = np.linalg.solve(S[np.ix_(A, A)], S[A, im])
        B[im, A] = a
        psi[im] = S[im, im] - S[im, A] @ a
    else:
        psi[im] = S[im, im]
    Z = D + [im]
    g = np.linalg.solve(S[np.ix_(Z, Z)], S[Z, iy])
    B[iy, Z] = g
    psi[iy] = S[iy, iy] - S[iy, Z] @ g
    Phi = np.zeros((q, q))
    Phi[:p, :p] = S[:p, :p]
    Phi[im, im], Phi[iy, iy] = psi[im], psi[iy]
    T = np.linalg.inv(np.eye(q) - B)
    return T @ Phi @ T.T


def f_ml(S, Sigma):
    q = S.shape[0]
    sign_s, logdet_s = np.linalg.slogdet(S)
    sign, logdet = np.linalg.slogdet(Sigma)
    if sign_s <= 0 or sign <= 0:
        raise NonPositiveDefiniteCovariance("covariance matrix is not positive definite")
    return float(logdet + np.trace(S @ np.linalg.inv(Sigma)) - logdet_s - q)


def path_fit_indices(data: Dataset, spec: ModelSpec, direct_paths=None, mediator_paths=None,
                     verdict_values=None):
    """Maximum-likelihood fit of the observed-variable mediation path model.

    ``direct_paths``/``mediator_paths`` list the predictors with a free
    ``x -> y`` / ``x -> M`` path (default: all, i.e. the saturated model).
    """
    preds = list(spec.predictor_subset)
    p = len(preds)
    direct = preds if direct_paths is None else list(direct_paths)
    med = preds if mediator_paths is None else list(mediator_paths)
    for name in (*direct, *med):
        if name not in preds:
            raise InconsistentSpec(f"path from unknown predictor {name!r}")
    cols = [data.column(c) for c in preds] + [data.column(spec.mediator_name),
                                               data.column(spec.outcome_name)]
    V = np.column_stack(cols)
    n, q = V.shape
    if n <= q:
        raise NonPositiveDefiniteCovariance(f"n = {n} must exceed {q} observed variables")
    S = np.cov(V, rowvar=False)
    ev = np.linalg.eigvalsh(S)
    if ev[0] <= 1e-12 * ev[-1]:
        raise NonPositiveDefiniteCovariance("sample covariance is not positive definite")

    Sigma = implied_covariance(S, p, [preds.index(c) for c in med],
                               [preds.index(c) for c in direct])
    free = p * (p + 1) // 2 + len(med) + len(direct) + 1 + 2
    df = q * (q + 1) // 2 - free
    chi2 = max((n - 1) * f_ml(S, Sigma), 0.0) if df > 0 else 0.0

    d = np.sqrt(np.diag(S))
    base = float(np.sum(np.log(np.diag(S))) - np.linalg.slogdet(S)[1])
    chi2_0 = (n - 1) * base
    df_0 = q * (q - 1) // 2
    num = max(chi2 - df, 0.0)
    den = max(chi2_0 - df_0, chi2 - df, 0.0)
    cfi = 1.0 - num / den if den > 0 else 1.0
    rmsea = math.sqrt(num / (df * (n - 1))) if df > 0 else 0.0
    resid = (S - Sigma) / np.outer(d, d)
    tri = np.tril_indices(q)
    srmr = float(np.sqrt(np.mean(resid[tri] ** 2))) if df > 0 else 0.0
    cmin_df = chi2 / df if df > 0 else float("nan")
    return FitIndices(chi_square=float(chi2), df=int(df), cmin_df=float(cmin_df), cfi=float(cfi),
                      rmsea=float(rmsea), srmr=srmr, baseline_chi_square=float(chi2_0),
                      baseline_df=df_0, verdicts=fit_verdicts(cfi, rmsea, srmr, cmin_df))


# -- spatially varying mediation -------------------------------------------

@dataclass(frozen=True)
class SpatialMediationFit:
    mediator_model: MgwrFit
    outcome_model: MgwrFit
    total_model: MgwrFit
    predictors: tuple
    coords: np.ndarray
    alpha: float
    correction: bool
    scaling: ScalingInfo | None = None

    @property
    def p(self):
        return len(self.predictors)

    def _off(self, fit):
        return 1 if fit.names and fit.names[0] == "Intercept" else 0

    @property
    def a_surfaces(self):
        o = self._off(self.mediator_model)
        return self.mediator_model.coefficient_surfaces[:, o:o + self.p]

    @property
    def b_surface(self):
        o = self._off(self.outcome_model)
        return self.outcome_model.coefficient_surfaces[:, o + self.p]

    @property
    def direct(self):
        o = self._off(self.outcome_model)
        return self.outcome_model.coefficient_surfaces[:, o:o + self.p]

    @property
    def indirect(self):
        return self.a_surfaces * self.b_surface[:, None]

    @property
    def indirect_se(self):
        """First-order delta-method standard error of the local ``a_j b``."""
        om, mm = self.outcome_model, self.mediator_model
        o_m, o_y = self._off(mm), self._off(om)
        se_a = mm.std_errors[:, o_m:o_m + self.p]
        se_b = om.std_errors[:, o_y + self.p][:, None]
        return np.sqrt((self.b_surface[:, None] * se_a) ** 2 + (self.a_surfaces * se_b) ** 2)

    @property
    def composed_total(self):
        return self.direct + self.indirect

    @property
    def marginal_total(self):
        o = self._off(self.total_model)
        return self.total_model.coefficient_surfaces[:, o:o + self.p]

    @property
    def discrepancy(self):
        return self.composed_total - self.marginal_total

    def masks(self, alpha=None, correction=None):
        """Significance masks (True = kept) derived from the stored pseudo-t values."""
        alpha = self.alpha if alpha is None else alpha
        correction = self.correction if correction is None else correction
        sig_m = self.mediator_model.significance_mask(alpha, correction)
        sig_y = self.outcome_model.significance_mask(alpha, correction)
        sig_t = self.total_model.significance_mask(alpha, correction)
        o_m, o_y, o_t = (self._off(f) for f in (self.mediator_model, self.outcome_model,
                                                self.total_model))
        direct = sig_y[:, o_y:o_y + self.p]
        indirect = sig_m[:, o_m:o_m + self.p] & sig_y[:, [o_y + self.p]]
        return {
            "direct": direct,
            "indirect": indirect,
            "composed_total": direct | indirect,
            "marginal_total": sig_t[:, o_t:o_t + self.p],
            "b": sig_y[:, o_y + self.p],
        }

    def to_rows(self, ids=None):
        """One record per location and predictor, for CSV export."""
        masks = self.masks()
        n = len(self.coords)
        ids = ids if ids is not None else [str(i) for i in range(n)]
        rows = []
        for i in range(n):
            for j, name in enumerate(self.predictors):
                rows.append({
                    "id": ids[i], "u": float(self.coords[i, 0]), "v": float(self.coords[i, 1]),
                    "predictor": name,
                    "a": float(self.a_surfaces[i, j]), "b": float(self.b_surface[i]),
                    "direct": float(self.direct[i, j]),
                    "indirect": float(self.indirect[i, j]),
                    "composed_total": float(self.composed_total[i, j]),
                    "marginal_total": float(self.marginal_total[i, j]),
                    "discrepancy": float(self.discrepancy[i, j]),
                    "direct_sig": bool(masks["direct"][i, j]),
                    "indirect_sig": bool(masks["indirect"][i, j]),
                    "total_sig": bool(masks["composed_total"][i, j]),
                })
        return rows


def fit_spatial_mediation(data: Dataset, spec: ModelSpec, config: MgwrConfig | None = None,
                          alpha=0.05, correction=False, standardize=True, workers=1):
    """Fit the mediator, outcome and total equations as three MGWR models."""
    data, scaling = _prepare(data, spec, standardize)
    designs = _three_designs(data, spec)
    metric = metric_for(data.coord_system)
    from .gwr import Geometry

    geom = Geometry(data.coords, metric)

    def run(design):
        y, X, names = design
        return mgwr_fit(geom, y, X, names, config)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=min(3, workers)) as pool:
            fits = list(pool.map(run, designs))
    else:
        fits = [run(d) for d in designs]
    return SpatialMediationFit(fits[0], fits[1], fits[2], tuple(spec.predictor_subset),
                               np.array(data.coords), alpha, correction, scaling)
