"""
Multiscale GWR: one bandwidth per term
======================================

A constant intercept and a sinusoidal slope. GWR must compromise on a
single bandwidth; MGWR lets the intercept go global while the slope
stays local.

Run with ``python demos/04_mgwr_multiscale.py``.
"""

import numpy as np

from geomediate import Field, SynthConfig, gen_synthetic, gwr_fit, mgwr_fit, select_bandwidth
from geomediate.synth import constant

cfg = SynthConfig(n=400, p=1, seed=42, noise_sd=(0.2, 0.2),
                  mediator_fields=(constant(3.0), Field("sinusoidal", level=1.0, amplitude=1.0)))
data, truth = gen_synthetic(cfg)
y, X, names = data.design("M", ["x1"])

# %% single-bandwidth GWR for reference
spec, _ = select_bandwidth(data.coords, y, X)
g = gwr_fit(data.coords, y, X, spec, names)
print(f"GWR: N = {spec.bandwidth}, AICc = {g.aicc:.1f}, tr(S) = {g.hat_trace:.1f}")

# %% MGWR by backfitting, initialized from the GWR fit
m = mgwr_fit(data.coords, y, X, names)
print(f"MGWR: converged in {m.iterations} sweeps, AICc = {m.aicc:.1f}, tr(S) = {m.hat_trace:.1f}")
for name, bw, enp in zip(m.names, m.bandwidths, m.per_term_enp):
    print(f"  {name:9s} bandwidth {bw:4d} of {data.n}   ENP {enp:6.2f}")
print("  SOC-f trace:", " ".join(f"{s:.1e}" for s in m.soc_trace))

for label, est in (("GWR", g.local_coefficients), ("MGWR", m.coefficient_surfaces)):
    err = [np.sqrt(np.mean((est[:, j] - truth.alpha[:, j]) ** 2)) for j in range(2)]
    print(f"{label:5s} RMSE intercept {err[0]:.3f}, slope {err[1]:.3f}")
