"""Trotter error of the electric field versus step size on a 4-site ring.

Prints the time-averaged deviation from exact evolution for each step size,
the log-log slope of the small-step regime, and how far each larger step
sits above or below the quadratic extrapolation.

Run: python3 demos/trotter_error.py
"""

import numpy as np

from gaugesim.exact import loglog_slope, trotter_error_study
from gaugesim.harness import TROTTER_GRID, preset_config

point = preset_config("trotter_study").points[0]
pts = trotter_error_study(point.params, point.lattice, TROTTER_GRID, t_f=10.0)
slope, icpt = loglog_slope(pts, 0.05, 0.4)
print(f"slope on [0.05, 0.4]: {slope:.3f}")
print(f"{'dt':>5} {'m':>4} {'dE':>9} {'dE/fit':>7}")
for p in pts:
    fit = np.exp(icpt + slope * np.log(p.dt))
    print(f"{p.dt:5.2f} {p.n_steps:4d} {p.delta_e:9.2e} {p.delta_e / fit:7.2f}")
