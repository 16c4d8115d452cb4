"""A single matter defect on an 11-site open chain, weak vs strong field.

Prints the matter-site deviation ``1 - (1 + sigma^z)/2`` as a text heat map,
one row per Trotter step. At f=0.2 the defect spreads to both edges; at
f=2.0 it stays bound to the centre.

Run: python3 demos/defect_spreading.py
"""

from gaugesim.harness import preset_config, trotter_states

SHADES = " .:-=+*#%@"


def heat_map(preset: str) -> None:
    point = preset_config(preset).points[0]
    lat = point.lattice
    print(f"{preset}: f={point.params.f}, dt={point.params.dt}")
    for step, state in trotter_states(point):
        devs = [(1 - state.expect_pauli({lat.matter_qubit(i): "Z"})) / 2 for i in range(lat.n_matter)]
        row = "".join(SHADES[min(int(d * len(SHADES)), len(SHADES) - 1)] for d in devs)
        print(f"  step {step:2d} |{row}|")


if __name__ == "__main__":
    heat_map("fig1d")
    heat_map("fig1e")
