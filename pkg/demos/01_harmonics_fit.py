#!/usr/bin/env python3
"""Fitting a band-limited field from sparse samples.

Synthesizes a random order-9 field at 2067 Hz on the interpolation grid
(1260 directions, 330 of them "measured"), fits coefficient vectors with
different regularization strengths, and scores the 930 held-out directions.

With enough samples and no regularization the fit is a plain least-squares
solve and recovers the generator exactly (the field IS a finite expansion).
Cranking gamma up shrinks the high-order coefficients and the error grows.
"""

import numpy as np

from helio.evaluation import upsample_error
from helio.geometry import build_interp_grid
from helio.harmonics import ShFitConfig, sh_fit, sh_order_for_freq, sh_predict
from helio.synth import SynthSpec, normalize, synth_coeffs, synth_field

FREQ = 2067.0

grid = build_interp_grid()
order = sh_order_for_freq(FREQ)
print(f"frequency {FREQ:g} Hz -> truncation order U = {order} -> {(order+1)**2} coefficients")
print(f"grid: {len(grid.known)} known + {len(grid.unknown)} unknown directions")

ds = normalize(synth_field(synth_coeffs(SynthSpec(order_U=order, seed=40)), grid, FREQ))

print(f"\n{'gamma':>8}  {'held-out error':>15}")
for gamma in (0.0, 1e-6, 1e-3, 1e-1, 1e2):
    model = sh_fit(ds.known_pressures, ds.known_directions, ShFitConfig(order, gamma))
    est = sh_predict(model, ds.unknown_directions)
    err = upsample_error(ds.unknown_pressures, est)
    print(f"{gamma:8.0e}  {err:12.1f} dB")

print("\nAt gamma = 0 the solve is exact up to conditioning: the held-out error")
print("sits at rounding-noise level, far below anything a network reaches.")
