"""Electric-field relaxation on an 8-site ring for several background fields.

Exact evolution from the half-filled state. Small f lets the field relax
towards zero, large f keeps it polarised.

Run: python3 demos/field_relaxation.py [--trotter]
"""

import argparse

import numpy as np

from gaugesim.harness import exact_states, preset_config, trotter_states
from gaugesim.measure import electric_field_average

ap = argparse.ArgumentParser()
ap.add_argument("--trotter", action="store_true", help="use the ideal Trotter circuit instead")
args = ap.parse_args()

cfg = preset_config("fig2")
print(f"{'f':>6} " + " ".join(f"t={k * 0.3:4.1f}" for k in range(0, 26, 5)) + "   mean[5,7.5]")
for point in cfg.points:
    stream = trotter_states(point) if args.trotter else exact_states(point)
    e = [electric_field_average(s, point.lattice) for _, s in stream]
    late = np.mean([v for k, v in enumerate(e) if 5.0 - 1e-9 <= k * point.params.dt <= 7.5 + 1e-9])
    print(f"{point.params.f:6.2f} " + " ".join(f"{e[k]:6.3f}" for k in range(0, 26, 5))
          + f"   {late:.3f}")
