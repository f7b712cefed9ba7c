import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from geomediate.errors import PerfectCollinearity, RankDeficient, TooFewRows
from geomediate.regress import ols_fit, screen_predictors, vif

from conftest import make_dataset


def design(rng, n, p):
    return np.column_stack([np.ones(n), rng.standard_normal((n, p))])


def normal_equations(X, y):
    """Independent route: explicit normal equations and textbook formulas."""
    XtX = X.T @ X
    beta = np.linalg.solve(XtX, X.T @ y)
    resid = y - X @ beta
    df = X.shape[0] - X.shape[1]
    s2 = resid @ resid / df
    se = np.sqrt(np.diag(s2 * np.linalg.inv(XtX)))
    return beta, se, df


def test_exact_line():
    x = np.arange(1.0, 6.0)
    fit = ols_fit(np.column_stack([np.ones(5), x]), 2 * x)
    np.testing.assert_allclose(fit.coefficients, [0.0, 2.0], atol=1e-12)
    assert fit.r_squared == 1.0


def test_matches_normal_equations_small(rng):
    X, y = design(rng, 6, 2), rng.standard_normal(6)
    fit = ols_fit(X, y)
    beta, se, df = normal_equations(X, y)
    np.testing.assert_allclose(fit.coefficients, beta, atol=1e-10)
    np.testing.assert_allclose(fit.std_errors, se, rtol=1e-9)
    assert fit.df_resid == df == 3
    np.testing.assert_allclose(fit.p_values, 2 * stats.t.sf(np.abs(beta / se), df), rtol=1e-8)


def test_matches_statsmodels(rng):
    sm = pytest.importorskip("statsmodels.api")
    X, y = design(rng, 50, 3), rng.standard_normal(50)
    fit = ols_fit(X, y)
    ref = sm.OLS(y, X).fit()
    np.testing.assert_allclose(fit.coefficients, ref.params, atol=1e-10)
    np.testing.assert_allclose(fit.std_errors, ref.bse, rtol=1e-9)
    np.testing.assert_allclose(fit.p_values, ref.pvalues, rtol=1e-7, atol=1e-300)
    assert fit.f_stat == pytest.approx(ref.fvalue, rel=1e-9)
    assert fit.adj_r_squared == pytest.approx(ref.rsquared_adj, rel=1e-9)


def test_duplicated_column_is_rank_deficient(rng):
    X = design(rng, 20, 2)
    with pytest.raises(RankDeficient):
        ols_fit(np.column_stack([X, X[:, 1]]), rng.standard_normal(20))


def test_too_few_rows(rng):
    with pytest.raises(TooFewRows):
        ols_fit(design(rng, 3, 2), rng.standard_normal(3))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(8, 60), p=st.integers(1, 4))
def test_residual_and_r2_invariants(seed, n, p):
    rng = np.random.default_rng(seed)
    X, y = design(rng, n, p), rng.standard_normal(n)
    fit = ols_fit(X, y)
    assert abs(fit.residuals.sum()) < 1e-9 * max(1.0, np.abs(y).sum())
    assert 0.0 <= fit.r_squared <= 1.0
    assert fit.adj_r_squared <= fit.r_squared


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), k=st.floats(1e-3, 1e3).filter(lambda v: abs(v) > 1e-3),
       j=st.integers(1, 3), neg=st.booleans())
def test_scale_equivariance(seed, k, j, neg):
    k = -k if neg else k
    rng = np.random.default_rng(seed)
    X, y = design(rng, 30, 3), rng.standard_normal(30)
    a, X2 = ols_fit(X, y), X.copy()
    X2[:, j] *= k
    b = ols_fit(X2, y)
    assert b.coefficients[j] == pytest.approx(a.coefficients[j] / k, rel=1e-9, abs=1e-12)
    np.testing.assert_allclose(np.abs(b.t_stats), np.abs(a.t_stats), rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(b.p_values, a.p_values, rtol=1e-8, atol=1e-12)
    assert b.r_squared == pytest.approx(a.r_squared, abs=1e-9)
    assert b.f_stat == pytest.approx(a.f_stat, rel=1e-9)
    np.testing.assert_allclose(vif(X2[:, 1:]), vif(X[:, 1:]), rtol=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(5, 80))
def test_f_equals_t_squared(seed, n):
    rng = np.random.default_rng(seed)
    X, y = design(rng, n, 1), rng.standard_normal(n)
    fit = ols_fit(X, y)
    assert fit.f_stat == pytest.approx(fit.t_stats[1] ** 2, rel=1e-9)
    assert fit.f_p_value == pytest.approx(fit.p_values[1], rel=1e-7)


def test_vif_orthogonal():
    x1 = np.array([1.0, -1, 1, -1])
    x2 = np.array([1.0, 1, -1, -1])
    np.testing.assert_allclose(vif(np.column_stack([x1, x2])), [1.0, 1.0], atol=1e-12)


def test_vif_correlation_point_nine(rng):
    a, b = rng.standard_normal((2, 200))
    a = (a - a.mean()) / a.std()
    b = b - b.mean() - (b @ a) / (a @ a) * a
    b /= b.std()
    x2 = 0.9 * a + np.sqrt(1 - 0.81) * b
    assert np.corrcoef(a, x2)[0, 1] == pytest.approx(0.9, abs=1e-12)
    v = vif(np.column_stack([a, x2]))
    # auxiliary-regression oracle
    aux = ols_fit(np.column_stack([np.ones(200), x2]), a)
    np.testing.assert_allclose(v, 1 / (1 - aux.r_squared), rtol=1e-10)
    np.testing.assert_allclose(v, 1 / (1 - 0.81), rtol=1e-9)
    assert v[0] == pytest.approx(5.263, abs=1e-3)


def test_vif_single_and_collinear(rng):
    assert vif(rng.standard_normal((10, 1))).tolist() == [1.0]
    x = rng.standard_normal((10, 2))
    with pytest.raises(PerfectCollinearity) as exc:
        vif(np.column_stack([x, x[:, 0] - 2 * x[:, 1]]))
    assert exc.value.details["j"] == 0


def test_screening_rule():
    rng = np.random.default_rng(4)
    n = 300
    X = rng.standard_normal((n, 3))
    m = 0.8 * X[:, 0] + rng.standard_normal(n) * 0.5
    y = 0.6 * X[:, 1] + 0.5 * m + rng.standard_normal(n) * 0.5
    from geomediate.core_model import Dataset

    d = Dataset(coords=rng.uniform(0, 1, (n, 2)), predictors=X, predictor_names=("a", "b", "c"),
                mediator=m, outcome=y, mediator_name="M", outcome_name="y")
    table = screen_predictors(d)
    assert table.kept == ("a", "b")
    assert table.dropped == ("c",)
    rows = table.rows()
    assert {r["model"] for r in rows} == {"mediator", "outcome"}
    assert len(rows) == 3 + 4


def test_screening_vif_columns():
    d = make_dataset(n=80, p=3, seed=5)
    table = screen_predictors(d)
    assert table.mediator_vif.shape == (3,)
    assert table.outcome_vif.shape == (4,)
    assert np.all(table.outcome_vif >= 1.0)
