"""Long-time response Delta_T of sigma^2_L versus the final trap, g=0 against g=1.

A coarse 41-point scan; the CLI preset response-g1 adds points around crossings.
Run: python demos/response_map.py
"""

import numpy as np

from latticequench import LatticeModel, ModelConfig
from latticequench.observables import find_peaks_with_widths, response_scan

wf = np.linspace(0.0, 0.8, 41)
for g in (0.0, 1.0):
    model = LatticeModel(ModelConfig(g=g))
    y = response_scan(model, 0.8, wf).column("temporal", "integral")
    peaks = find_peaks_with_widths(wf, y, rel_height=0.05)
    print(f"g={g:g}: max Delta_T {y.max():.3e} at omega_f^2={wf[np.argmax(y)]:.2f}")
    for p in peaks:
        print(f"  peak at {p['omega_sq']:.3f}  height {p['height']:.3e}")
