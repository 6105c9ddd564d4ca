"""Even-parity spectrum of four bosons in a triple well and its avoided crossings.

Run: python demos/spectrum_and_crossings.py
"""

import numpy as np

from latticequench import LatticeModel, ModelConfig, detect_crossings, scan_spectrum
from latticequench.bhm import extract_params
from latticequench.fock import format_label

model = LatticeModel(ModelConfig(g=1.0))
p = extract_params(model.one_body, model.two_body, 0.0, 3)
print(f"Hubbard parameters: U={p.U:.4f}  J={p.J:.4f}  U/J={p.u_over_j:.1f}")

# eight lowest curves are enough to see the ground-state and |0,4,0> crossings
scan = scan_spectrum(model, np.linspace(0.0, 0.8, 81), 8)
for c in detect_crossings(model, scan):
    a, b = (format_label(x, 3) for x in c.labels_before)
    print(f"omega^2={c.omega_sq_c:.4f}  curves {c.lower}/{c.upper}  {c.kind:<11s} gap={c.min_gap:.2e}  {a} <-> {b}")
