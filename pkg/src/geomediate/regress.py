"""Global ordinary least squares with the screening diagnostics.

Coefficients come from a QR factorization of the design; the rank check
uses the singular values so that nearly collinear saliency scores are
caught before they produce meaningless standard errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, stats

from .errors import PerfectCollinearity, RankDeficient, TooFewRows

RCOND = 1e-12


@dataclass(frozen=True)
class OlsFit:
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    r_squared: float
    adj_r_squared: float
    f_stat: float
    f_p_value: float
    residuals: np.ndarray
    df_resid: int
    names: tuple = ()
    fitted: np.ndarray = None

    @property
    def sigma2(self):
        return float(self.residuals @ self.residuals) / self.df_resid


def check_rank(X):
    s = np.linalg.svd(X, compute_uv=False)
    if s.size == 0 or s[-1] <= RCOND * s[0]:
        raise RankDeficient("design matrix is rank deficient",
                            rcond=float(s[-1] / s[0]) if s.size and s[0] > 0 else 0.0)


def ols_fit(X, y, names=None, *, intercept=True) -> OlsFit:
    """Fit ``y ~ X`` where ``X`` already contains the intercept column.

    ``intercept`` only controls how R² and the F test are defined
    (centered vs. uncentered total sum of squares).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if n <= k:
        raise TooFewRows(f"n = {n} must exceed the number of coefficients {k}", n=n)
    check_rank(X)

    Q, R = np.linalg.qr(X)
    beta = linalg.solve_triangular(R, Q.T @ y)
    resid = y - X @ beta
    df = n - k
    rss = float(resid @ resid)
    sigma2 = rss / df
    Rinv = linalg.solve_triangular(R, np.eye(k))
    se = np.sqrt(sigma2 * np.sum(Rinv**2, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
    p = 2.0 * stats.t.sf(np.abs(t), df)

    tss = float(np.sum((y - y.mean()) ** 2)) if intercept else float(y @ y)
    r2 = 1.0 - rss / tss if tss > 0 else 0.0
    r2 = min(max(r2, 0.0), 1.0)
    q = k - 1 if intercept else k
    adj = 1.0 - (1.0 - r2) * (n - (1 if intercept else 0)) / df
    if q > 0 and rss > 0:
        f = ((tss - rss) / q) / sigma2
        f_p = float(stats.f.sf(f, q, df))
    else:
        f, f_p = (np.inf, 0.0) if q > 0 else (np.nan, np.nan)
    fit = OlsFit(coefficients=beta, std_errors=se, t_stats=t, p_values=p, r_squared=r2,
                 adj_r_squared=min(adj, r2), f_stat=float(f), f_p_value=f_p, residuals=resid,
                 df_resid=df, names=tuple(names) if names is not None else (),
                 fitted=X @ beta)
    return fit


def vif(X) -> np.ndarray:
    """Variance inflation factors for the columns of ``X`` (no intercept column)."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if p == 1:
        return np.ones(1)
    out = np.empty(p)
    ones = np.ones((n, 1))
    for j in range(p):
        others = np.hstack([ones, np.delete(X, j, axis=1)])
        coef, *_ = np.linalg.lstsq(others, X[:, j], rcond=None)
        resid = X[:, j] - others @ coef
        tss = np.sum((X[:, j] - X[:, j].mean()) ** 2)
        r2 = 1.0 - float(resid @ resid) / tss if tss > 0 else 1.0
        if r2 >= 1.0 - 1e-12:
            raise PerfectCollinearity(f"predictor {j} is a linear combination of the others", j=j)
        out[j] = 1.0 / (1.0 - r2)
    return out


@dataclass(frozen=True)
class ScreeningTable:
    """Both screening regressions (mediator and outcome)."""

    mediator_fit: OlsFit
    outcome_fit: OlsFit
    mediator_vif: np.ndarray
    outcome_vif: np.ndarray
    kept: tuple
    dropped: tuple

    def rows(self):
        out = []
        for label, fit, v in (("mediator", self.mediator_fit, self.mediator_vif),
                              ("outcome", self.outcome_fit, self.outcome_vif)):
            for j, name in enumerate(fit.names[1:], start=1):
                out.append({
                    "model": label,
                    "term": name,
                    "beta": float(fit.coefficients[j]),
                    "p": float(fit.p_values[j]),
                    "vif": float(v[j - 1]),
                    "F": fit.f_stat,
                    "F_p": fit.f_p_value,
                    "R2": fit.r_squared,
                })
        return out


def screen_predictors(data, mediator=None, outcome=None, alpha=0.05) -> ScreeningTable:
    """Regress mediator on all predictors and outcome on predictors + mediator.

    A predictor is dropped only when it is nonsignificant in both equations.
    """
    mediator = mediator or data.mediator_name
    outcome = outcome or data.outcome_name
    preds = list(data.predictor_names)
    m, Xm, names_m = data.design(mediator, preds)
    y, Xy, names_y = data.design(outcome, preds + [mediator])
    fm = ols_fit(Xm, m, names_m)
    fy = ols_fit(Xy, y, names_y)
    keep, drop = [], []
    for j, name in enumerate(preds, start=1):
        if fm.p_values[j] >= alpha and fy.p_values[j] >= alpha:
            drop.append(name)
        else:
            keep.append(name)
    return ScreeningTable(fm, fy, vif(Xm[:, 1:]), vif(Xy[:, 1:]), tuple(keep), tuple(drop))
