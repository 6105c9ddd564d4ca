"""Quench 0.8 -> 0.58 at g=1: variance, Fourier lines and number-state populations.

Run: python demos/quench_dynamics.py
"""

import numpy as np

from latticequench import LatticeModel, ModelConfig, QuenchProtocol, evolve, parse_label, population_timeseries
from latticequench.observables import fourier_branches, temporal_variance, variance_series

model = LatticeModel(ModelConfig())
res = evolve(model, QuenchProtocol(0.8, 0.58, t_final=300.0, dt_sample=0.1))
s = variance_series(res)
print(f"kept {res.n_kept} eigenstates, completeness defect {res.defect:.1e}")
print(f"sigma^2_L: initial {s[0]:.4f}, range [{s.min():.4f}, {s.max():.4f}]")

tv = temporal_variance(res, s)
print(f"Delta_T: time integral {tv.integral:.4e}, spectral sum {tv.spectral_finite:.4e}")

br = fourier_branches(res, s)
for w, a in sorted(br.significant_lines(0.05), key=lambda r: -r[1])[:5]:
    print(f"  line omega={w:.4f}  amplitude={a:.3e}")

for text in ("|1,2,1>", "|0,4,0>", "|1,3,0>_S"):
    pop = population_timeseries(res, parse_label(text, 3, model.config.n_bands))
    print(f"  {text:<10s} max population {pop.max():.3f} at t={res.times[np.argmax(pop)]:.1f}")
