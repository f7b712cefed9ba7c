"""
Global mediation on a survey-shaped synthetic dataset
=====================================================

Five sound-source saliencies (x), soundscape appropriateness (SA) as the
mediator and acoustic comfort (AC) as the outcome. The data are simulated
so that the traffic saliency works partly through SA, natural saliency
only through SA, and commercial saliency has a direct effect of opposite
sign to its indirect one.

Run with ``python demos/01_global_mediation.py``.
"""

import numpy as np

from geomediate import (Dataset, ModelSpec, fit_global_mediation, path_fit_indices,
                        screen_predictors, standardize)

rng = np.random.default_rng(2024)
n = 128
names = ("S_NS", "S_TS", "S_CS", "S_RS", "S_ToS")
X = rng.standard_normal((n, 5))

# mediator and outcome equations, standardized-ish units
sa = 0.30 * X[:, 0] - 0.55 * X[:, 1] - 0.35 * X[:, 2] + rng.normal(0, 0.6, n)
ac = 0.7 * sa - 0.2 * X[:, 1] + 0.15 * X[:, 2] + rng.normal(0, 0.5, n)
data = Dataset(coords=rng.uniform(0, 800, (n, 2)), predictors=X, predictor_names=names,
               mediator=sa, outcome=ac, mediator_name="SA", outcome_name="AC")

# %% screening: OLS in both equations plus VIF
table = screen_predictors(standardize(data)[0])
print("kept:", table.kept, " dropped:", table.dropped)
for row in table.rows():
    print(f"  {row['model']:8s} {row['term']:6s} beta {row['beta']:+.3f}  p {row['p']:.3g}"
          f"  VIF {row['vif']:.2f}")

# %% product-of-coefficients mediation with a percentile bootstrap
spec = ModelSpec("AC", "SA", table.kept)
res = fit_global_mediation(data, spec, B=2000, seed=42)
print(f"\nSA -> AC: b = {res.b:.3f} (SE {res.b_se:.3f})")
print(f"{'path':20s} {'direct':>8s} {'indirect':>9s} {'total':>8s}   95% CI (indirect)  type")
for e in res.effects:
    print(f"{e.predictor + ' -> SA -> AC':20s} {e.c_prime:8.3f} {e.indirect:9.3f} {e.total:8.3f}"
          f"   [{e.ci_low:+.3f}, {e.ci_high:+.3f}]   {e.classification}")

# the total effect from the reduced-form regression equals c' + ab
gap = max(abs(e.total_regression - e.total) for e in res.effects)
print(f"max |reduced-form total - (c' + ab)| = {gap:.1e}")

# %% path-model fit, dropping the direct paths that were not significant
direct = [e.predictor for e in res.effects if e.c_prime_p < 0.05]
fi = path_fit_indices(standardize(data)[0], spec, direct_paths=direct)
print(f"\nfree direct paths: {direct}")
print(f"chi2 = {fi.chi_square:.2f} on {fi.df} df, CFI {fi.cfi:.3f}, RMSEA {fi.rmsea:.3f}, "
      f"SRMR {fi.srmr:.3f}, CMIN/DF {fi.cmin_df:.2f} -> acceptable: {fi.acceptable}")
