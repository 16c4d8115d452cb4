"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence

from .errors import ConfigError, ResourceCapError
from .harness import PRESETS, ExperimentConfig, preset_config, run_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3

# non-string so argparse does not pass it through the converter
_PRESET_PHI = object()


def _phi(text: str) -> float | None:
    if text.lower() == "off":
        return None
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a number or 'off', got {text!r}") from exc


def _grid(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad comma-separated list {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty grid")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gaugesim", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset and write CSV + manifest")
    run.add_argument("preset")
    run.add_argument("--out", default=None, help="output directory (default: runs/<preset>)")
    run.add_argument("--shots", type=int, default=None)
    run.add_argument("--seed", type=int, default=None, help="first seed of the ensemble")
    run.add_argument("--dt", type=float, default=None)
    run.add_argument("--steps", type=int, default=None, help="override the number of Trotter steps")
    run.add_argument("--noise.phi", dest="phi", type=_phi, default=_PRESET_PHI,
                     help="C-phase angle, or 'off' to skip the noisy variant")
    run.add_argument("--exact-only", action="store_true")
    run.add_argument("--f-grid", type=_grid, default=None, help="comma-separated f values")
    run.add_argument("--workers", type=int, default=1)

    val = sub.add_parser("validate", help="check a JSON config against the schema")
    val.add_argument("config")

    sub.add_parser("list-presets", help="show the available presets")

    cfg = sub.add_parser("run-config", help="run a JSON config file")
    cfg.add_argument("config")
    cfg.add_argument("--out", default=None)
    cfg.add_argument("--workers", type=int, default=1)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list-presets":
            for name, (desc, _) in PRESETS.items():
                print(f"{name:18s} {desc}")
            return EXIT_OK
        if args.command == "validate":
            cfg = ExperimentConfig.from_file(args.config)
            print(f"ok: {cfg.name}, {len(cfg.points)} point(s), variants {', '.join(cfg.variants)}")
            return EXIT_OK
        if args.command == "run":
            cfg = preset_config(args.preset, shots=args.shots, seed=args.seed, dt=args.dt,
                                phi="default" if args.phi is _PRESET_PHI else args.phi,
                                exact_only=args.exact_only, f_grid=args.f_grid,
                                n_steps=args.steps)
            out = args.out or f"runs/{args.preset}"
        else:
            cfg = ExperimentConfig.from_file(args.config)
            out = args.out or cfg.doc.get("output") or f"runs/{cfg.name}"
        res = run_config(cfg, out, workers=args.workers)
        print(f"wrote {res.out_dir}/observables.csv ({res.manifest['wall_time_s']:.1f} s)")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
