"""Gauss-law and charge postselection under the residual C-phase.

Samples the noisy 8-site ring circuit and compares the raw and postselected
electric field with the ideal circuit. The charge criterion keeps every
shot (the residual conserves matter charge); the local Gauss criterion
discards most of them within a few steps.

Run: python3 demos/postselection.py [--shots N]
"""

import argparse
import csv
import io

from gaugesim.harness import preset_config, run_config

ap = argparse.ArgumentParser()
ap.add_argument("--shots", type=int, default=10_000)
args = ap.parse_args()

doc = preset_config("postselect_study", shots=args.shots).doc
doc["seeds"] = [0]
rows = list(csv.DictReader(io.StringIO(run_config(doc).csv_text)))


def col(variant, name, seed):
    return {int(r["step"]): r["value"] for r in rows
            if r["variant"] == variant and r["observable"] == name and r["seed"] == seed}


ideal = col("ideal", "E", "")
raw = col("noisy", "E[raw]", "0")
post = col("noisy", "E[local_gauss]", "0")
kept_g = col("noisy", "retained[local_gauss]", "0")
kept_c = col("noisy", "retained[global_charge]", "0")
print(f"{'step':>4} {'ideal':>7} {'raw':>7} {'gauss':>7} {'kept_gauss':>10} {'kept_charge':>11}")
for k in sorted(ideal):
    fmt = lambda v: f"{float(v):7.3f}" if v else "    n/a"  # noqa: E731
    print(f"{k:4d} {fmt(ideal[k])} {fmt(raw[k])} {fmt(post[k])} {float(kept_g[k]):10.3f} "
          f"{float(kept_c[k]):11.3f}")
