"""End-to-end experiment runs: compile, simulate, sample, postselect, record.

A run is described by an :class:`ExperimentConfig` (JSON schema
``gaugesim-config/1``). It holds a base system, a list of parameter points
overriding it, the variants to simulate (``ideal`` Trotter circuit,
C-phase ``noisy`` circuit, ``exact`` continuous-time evolution), shot and
seed settings and the observables to record. Presets are ready-made configs.

Outputs per run directory: ``observables.csv`` (long format, one row per
point, variant, seed, step and observable) and ``manifest.json``.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import multiprocessing
import os
import platform
import time
from collections.abc import Iterator, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import __version__
from .circuits import FusedProgram, build_experiment_circuit, trotter_step_gates
from .errors import ConfigError, ResourceCapError
from .exact import build_hamiltonian, evolve_exact, trotter_error_study
from .lattice import (
    COMPLIANT_SEQUENCE_N6,
    MODELS,
    GaugeSector,
    LatticeSpec,
    ModelParams,
    ProductState,
    alternating_sequence,
    gauge_sector_of,
    system_from_dict,
    system_to_dict,
)
from .measure import (
    CRITERIA,
    ObservableSeries,
    postselect,
    readout_frame,
    record_observables,
)
from .noise import PHI_SPREAD, NoiseParams, add_cphase_residuals, apply_readout_noise
from .statevector import MAX_QUBITS, StateVector

SCHEMA_ID = "gaugesim-config/1"
VARIANTS = ("ideal", "noisy", "exact")
OBSERVABLES = ("E", "eta_z2", "eta_u1", "sites")

_NUM = {"type": "number"}
_SYSTEM_PROPS = {
    "n_matter": {"type": "integer", "minimum": 1},
    "boundary": {"enum": ["open", "periodic"]},
    "j": {"type": "number", "exclusiveMinimum": 0},
    "f": _NUM,
    "mu": _NUM,
    "v": _NUM,
    "c_seq": {"type": "array", "items": {"type": ["integer", "number", "string"]}},
    "dt": {"type": "number", "exclusiveMinimum": 0},
    "n_steps": {"type": "integer", "minimum": 0},
    "initial_state": {
        "oneOf": [
            {"enum": ["defect", "half_filling", "psi3"]},
            {"type": "object",
             "properties": {"matter_z": {"type": "array", "items": {"enum": [-1, 1]}},
                            "gauge_x": {"type": "array", "items": {"enum": [-1, 1]}}},
             "required": ["matter_z", "gauge_x"], "additionalProperties": False},
        ]
    },
}

CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema", "system"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": SCHEMA_ID},
        "name": {"type": "string"},
        "kind": {"enum": ["dynamics", "trotter_study"]},
        "model": {"enum": list(MODELS)},
        "system": {
            "type": "object",
            "required": ["n_matter"],
            "additionalProperties": False,
            "properties": _SYSTEM_PROPS,
        },
        "points": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "properties": {"label": {"type": "string"}, **_SYSTEM_PROPS},
            },
        },
        "variants": {"type": "array", "items": {"enum": list(VARIANTS)}, "uniqueItems": True},
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "cphase_phi_mean": _NUM,
                "cphase_phi_spread": {"type": "number", "minimum": 0},
                "readout_p0": {"type": "number", "minimum": 0, "maximum": 1},
                "readout_p1": {"type": "number", "minimum": 0, "maximum": 1},
                "phi_envelope": {"type": "array", "items": _NUM},
            },
        },
        "shots": {"type": "integer", "minimum": 0},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "observables": {"type": "array", "items": {"enum": list(OBSERVABLES)}, "uniqueItems": True},
        "postselection": {"type": "array", "items": {"enum": list(CRITERIA)}, "uniqueItems": True},
        "dt_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "t_final": {"type": "number", "exclusiveMinimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "output": {"type": "string"},
    },
}


def validate_document(doc: Mapping[str, Any]) -> list[str]:
    """Schema errors as ``path: message`` strings (empty when valid)."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path)):
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        errors.append(f"{path}: {err.message}")
    return errors


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class RunPoint:
    """One fully resolved parameter point."""

    label: str
    lattice: LatticeSpec
    params: ModelParams
    state: ProductState

    @property
    def target(self) -> GaugeSector:
        return gauge_sector_of(self.state, self.lattice)


@dataclass
class ExperimentConfig:
    """Validated experiment description; see :data:`CONFIG_SCHEMA`."""

    doc: dict[str, Any]
    points: list[RunPoint] = field(init=False)

    def __post_init__(self):
        errors = validate_document(self.doc)
        if errors:
            raise ConfigError("invalid config:\n  " + "\n  ".join(errors))
        self.doc = copy.deepcopy(dict(self.doc))
        self.points = [self._resolve(p) for p in self.doc.get("points", [{}])]
        if self.model == "u1" and set(self.variants) - {"exact"}:
            raise ConfigError("the u1 model has no Trotter circuit; use variants ['exact']")
        for p in self.points:
            if p.lattice.num_qubits > MAX_QUBITS:
                raise ResourceCapError(
                    f"point {p.label!r} needs {p.lattice.num_qubits} qubits (cap {MAX_QUBITS})")

    def _resolve(self, overrides: Mapping[str, Any]) -> RunPoint:
        sysdoc = {**self.doc["system"], **{k: v for k, v in overrides.items() if k != "label"}}
        lattice, params, state = system_from_dict(sysdoc)
        if params.v:
            params.check_against(lattice)
        label = overrides.get("label") or ",".join(
            f"{k}={overrides[k]}" for k in sorted(overrides) if k != "label") or "base"
        return RunPoint(label, lattice, params, state)

    @classmethod
    def from_json(cls, text: str) -> ExperimentConfig:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls(doc)

    @classmethod
    def from_file(cls, path: str | Path) -> ExperimentConfig:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        return cls.from_json(text)

    def to_json(self) -> str:
        return json.dumps(self.doc, indent=2, sort_keys=True)

    @property
    def name(self) -> str:
        return self.doc.get("name", "custom")

    @property
    def kind(self) -> str:
        return self.doc.get("kind", "dynamics")

    @property
    def model(self) -> str | None:
        return self.doc.get("model")

    @property
    def variants(self) -> tuple[str, ...]:
        return tuple(self.doc.get("variants", VARIANTS))

    @property
    def shots(self) -> int:
        return int(self.doc.get("shots", 0))

    @property
    def seeds(self) -> tuple[int, ...]:
        return tuple(self.doc.get("seeds", [0]))

    @property
    def observables(self) -> tuple[str, ...]:
        return tuple(self.doc.get("observables", ("E", "eta_z2")))

    @property
    def postselection(self) -> tuple[str, ...]:
        return tuple(self.doc.get("postselection", ()))

    def noise_settings(self) -> list[tuple[str, NoiseParams]]:
        """``(variant name, noise)`` for every noisy run: the mean and each envelope value."""
        if "noisy" not in self.variants:
            return []
        nd = dict(self.doc.get("noise", {}))
        envelope = nd.pop("phi_envelope", [])
        base = NoiseParams(**nd)
        out = [("noisy", base)]
        out += [(f"noisy_phi={phi!r}", base.with_phi(phi)) for phi in envelope]
        return out


# ---------------------------------------------------------------- state streams

def _preparation(point: RunPoint) -> StateVector:
    params = replace(point.params, n_steps=0)
    circ = build_experiment_circuit(point.state, params, point.lattice, "computational")
    return circ.apply_to(StateVector(point.lattice.num_qubits))


def trotter_states(point: RunPoint, noise: NoiseParams | None = None,
                   noise_stream: int = 0) -> Iterator[tuple[int, StateVector]]:
    """States after ``0..n_steps`` Trotter steps of the compiled circuit.

    The same :class:`StateVector` object is yielded each time and mutated by
    the next step; copy it to keep a snapshot. With ``noise``, each native
    two-qubit gate carries a residual C-phase; per-gate angles (nonzero
    spread) are drawn from the ``(seed, noise_stream)`` sub-stream.
    """
    lat, params = point.lattice, point.params
    state = _preparation(point)
    yield 0, state
    gates, phase = trotter_step_gates(params, lat)
    if noise is None or not noise.has_cphase:
        program = FusedProgram.from_gates(gates, lat.num_qubits, phase)
        for k in range(1, params.n_steps + 1):
            yield k, program.apply_to(state)
        return
    rng = noise.rng(noise_stream)
    fixed = None
    if noise.cphase_phi_spread == 0:
        fixed = FusedProgram.from_gates(add_cphase_residuals(gates, noise, rng), lat.num_qubits, phase)
    for k in range(1, params.n_steps + 1):
        program = fixed or FusedProgram.from_gates(
            add_cphase_residuals(gates, noise, rng), lat.num_qubits, phase)
        yield k, program.apply_to(state)


def exact_model(point: RunPoint, model: str | None = None) -> str:
    if model:
        return model
    return "z2_protected" if point.params.v else "z2"


def exact_states(point: RunPoint, model: str | None = None) -> Iterator[tuple[int, StateVector]]:
    """Exact states at ``t = k dt`` for ``k = 0..n_steps``."""
    h = build_hamiltonian(point.params, exact_model(point, model), point.lattice)
    state = _preparation(point)
    yield 0, state
    for k in range(1, point.params.n_steps + 1):
        state = evolve_exact(state, h, point.params.dt)
        yield k, state


def _sample_seed(seed: int, *stream: int) -> int:
    return int(np.random.SeedSequence([seed, *stream]).generate_state(1, np.uint64)[0] >> 1)


# ---------------------------------------------------------------- runner

_VARIANT_CODES = {"ideal": 0, "noisy": 1}


def _statevector_observables(cfg_obs: Sequence[str]) -> tuple[list[str], bool]:
    names = [o for o in cfg_obs if o != "sites"]
    return names, "sites" in cfg_obs


def simulate_point(point: RunPoint, variant: str, *, noise: NoiseParams | None = None,
                   model: str | None = None, shots: int = 0, seeds: Sequence[int] = (0,),
                   observables: Sequence[str] = ("E", "eta_z2"),
                   postselection: Sequence[str] = (), variant_index: int = 0,
                   ) -> dict[int | None, ObservableSeries]:
    """Observable series of one point and variant.

    The key ``None`` holds the statevector-path series; each seed holds its
    shot-path series (only when ``shots > 0`` and the variant is a circuit).
    Shot-path names carry a bracketed selection tag: ``E[raw]``,
    ``E[local_gauss]``, ``retained[global_charge]`` and so on.
    """
    lat, dt = point.lattice, point.params.dt
    target = point.target
    names, sites = _statevector_observables(observables)
    out: dict[int | None, ObservableSeries] = {None: ObservableSeries()}
    if variant == "exact":
        stream = exact_states(point, model)
    elif variant == "ideal":
        stream = trotter_states(point)
    else:
        stream = trotter_states(point, noise, variant_index)
    sampled = shots > 0 and variant != "exact"
    for s in seeds if sampled else ():
        out[s] = ObservableSeries()
    selections = _selection_sets(postselection)
    for step, state in stream:
        t = round(step * dt, 12)
        record_observables(out[None], step, t, state, lat, target, names, include_sites=sites)
        if not sampled:
            continue
        frame = readout_frame(state, lat)
        for s in seeds:
            table = frame.sample_shots(shots, _sample_seed(s, step, variant_index)).tagged(
                lat.gauge_qubits, lat)
            if noise is not None:
                table = apply_readout_noise(table, noise, stream=_sample_seed(s, step, variant_index))
            ser = out[s]
            record_observables(ser, step, t, table, lat, target, names, suffix="[raw]",
                               include_sites=sites)
            for sel in selections:
                res = postselect(table, lat, target, sel, total_charge=point.state.total_charge())
                tag = "+".join(sel)
                ser.add(step, t, f"retained[{tag}]", res.retained_fraction, 0.0, res.retained_fraction)
                record_observables(ser, step, t, res.shots, lat, target,
                                   [n for n in names if n != "eta_z2" or "local_gauss" not in sel],
                                   suffix=f"[{tag}]", retained_fraction=res.retained_fraction)
    return out


def _selection_sets(criteria: Sequence[str]) -> list[tuple[str, ...]]:
    crit = sorted(set(criteria))
    sets = [(c,) for c in crit]
    if len(crit) > 1:
        sets.append(tuple(crit))
    return sets


@dataclass
class RunResult:
    config: ExperimentConfig
    csv_text: str
    manifest: dict[str, Any]
    series: dict[tuple[str, str, int | None], ObservableSeries]
    out_dir: Path | None = None


_CSV_PREFIX = ("point", "variant", "seed")


def _job(args):
    cfg_doc, point_index, variant, vindex, noise_doc = args
    cfg = ExperimentConfig(cfg_doc)
    point = cfg.points[point_index]
    noise = NoiseParams(**noise_doc) if noise_doc is not None else None
    return simulate_point(
        point, "exact" if variant == "exact" else ("ideal" if variant == "ideal" else "noisy"),
        noise=noise, model=cfg.model, shots=cfg.shots, seeds=cfg.seeds,
        observables=cfg.observables, postselection=cfg.postselection, variant_index=vindex)


def _noise_doc(n: NoiseParams | None) -> dict | None:
    if n is None:
        return None
    return {"cphase_phi_mean": n.cphase_phi_mean, "cphase_phi_spread": n.cphase_phi_spread,
            "readout_p0": n.readout_p0, "readout_p1": n.readout_p1, "seed": n.seed}


def _jobs(cfg: ExperimentConfig) -> list[tuple[int, str, tuple]]:
    runs = []
    for pi in range(len(cfg.points)):
        vindex = 0
        for variant in cfg.variants:
            if variant == "noisy":
                for name, noise in cfg.noise_settings():
                    vindex += 1
                    runs.append((pi, name, (cfg.doc, pi, "noisy", vindex, _noise_doc(noise))))
            else:
                runs.append((pi, variant, (cfg.doc, pi, variant, 0, None)))
    return runs


def run_config(config: ExperimentConfig | Mapping[str, Any], out_dir: str | Path | None = None,
               workers: int | None = None) -> RunResult:
    """Execute a config; write ``observables.csv`` and ``manifest.json`` when ``out_dir`` is set.

    Parameter points and variants are independent jobs; with ``workers > 1``
    they run in a process pool. Results are merged in a fixed order, so the
    CSV does not depend on the worker count.
    """
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig(dict(config))
    if out_dir is None and cfg.doc.get("output"):
        out_dir = cfg.doc["output"]
    workers = workers or int(cfg.doc.get("workers", 1))
    t0 = time.perf_counter()
    if cfg.kind == "trotter_study":
        csv_text, series = _run_trotter_study(cfg), {}
    else:
        jobs = _jobs(cfg)
        if workers > 1 and len(jobs) > 1:
            # spawn: forking after the OpenMP runtime has started is unsafe
            ctx = multiprocessing.get_context("spawn")
            with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
                results = list(pool.map(_job, [j[2] for j in jobs]))
        else:
            results = [_job(j[2]) for j in jobs]
        series = {}
        for (pi, vname, _), res in zip(jobs, results):
            for seed, ser in res.items():
                series[(cfg.points[pi].label, vname, seed)] = ser
        csv_text = _series_csv(series)
    wall = time.perf_counter() - t0
    manifest = {
        "schema": SCHEMA_ID,
        "software": {"gaugesim": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "config": cfg.doc,
        "seeds": list(cfg.seeds),
        "points": [
            {"label": p.label, **system_to_dict(p.lattice, p.params, p.state)} for p in cfg.points
        ],
        "wall_time_s": wall,
        "outputs": ["observables.csv"],
    }
    result = RunResult(cfg, csv_text, manifest, series)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "observables.csv").write_text(csv_text)
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        result.out_dir = out
    return result


def _series_csv(series: Mapping[tuple[str, str, int | None], ObservableSeries]) -> str:
    parts = []
    for i, ((label, variant, seed), ser) in enumerate(series.items()):
        text = ser.to_csv(extra=[("point", label), ("variant", variant),
                                 ("seed", "" if seed is None else seed)])
        parts.append(text if i == 0 else text.split("\n", 1)[1])
    return "".join(parts)


def _run_trotter_study(cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["point", "dt", "n_steps", "delta_e"])
    grid = cfg.doc.get("dt_grid", TROTTER_GRID)
    t_f = cfg.doc.get("t_final", 10.0)
    for p in cfg.points:
        for r in trotter_error_study(p.params, p.lattice, grid, t_f=t_f,
                                     initial_state=p.state):
            w.writerow([p.label, repr(r.dt), r.n_steps, repr(r.delta_e)])
    return buf.getvalue()


# ---------------------------------------------------------------- presets

TROTTER_GRID = [round(0.05 * k, 2) for k in range(1, 21)]
FIG2_F_GRID = (0.2, 0.75, 1.25, 2.0)
DEFAULT_SHOTS = 50_000
DEFAULT_SEEDS = (0, 1, 2, 3, 4)


def _c_json(seq) -> list:
    return [c.numerator if c.denominator == 1 else f"{c.numerator}/{c.denominator}" for c in seq]


def _base(name: str, system: dict, **extra) -> dict[str, Any]:
    doc = {"schema": SCHEMA_ID, "name": name, "system": system,
           "variants": list(VARIANTS), "noise": {"cphase_phi_mean": 0.138},
           "shots": DEFAULT_SHOTS, "seeds": list(DEFAULT_SEEDS)}
    doc.update(extra)
    return doc


def _fig1(name: str, f: float) -> dict[str, Any]:
    return _base(name, {"n_matter": 11, "boundary": "open", "f": f, "mu": 0.0,
                        "dt": 0.2, "n_steps": 25, "initial_state": "defect"},
                 observables=["E", "eta_z2", "sites"], postselection=["local_gauss"])


def _protection(name: str, n: int, seq) -> dict[str, Any]:
    return _base(name, {"n_matter": n, "boundary": "periodic", "f": 2.5, "mu": 2.5,
                        "c_seq": _c_json(seq), "dt": 0.2, "n_steps": 20,
                        "initial_state": "psi3"},
                 points=[{"label": "V=0", "v": 0.0}, {"label": "V=6", "v": 6.0}],
                 observables=["E", "eta_u1", "eta_z2"], postselection=["local_gauss"])


PRESETS: dict[str, tuple[str, Any]] = {
    "fig1d": ("defect spreading, N=11 open, f=0.2", lambda: _fig1("fig1d", 0.2)),
    "fig1e": ("defect confinement, N=11 open, f=2.0", lambda: _fig1("fig1e", 2.0)),
    "fig2": ("electric-field relaxation vs f, N=8 periodic, mu=0.35",
             lambda: _base("fig2", {"n_matter": 8, "boundary": "periodic", "mu": 0.35,
                                    "dt": 0.3, "n_steps": 25, "initial_state": "half_filling"},
                           points=[{"label": f"f={f!r}", "f": f} for f in FIG2_F_GRID],
                           observables=["E", "eta_z2"],
                           postselection=["local_gauss", "global_charge"])),
    "fig3": ("U(1) protection, N=6 periodic, compliant sequence, V in {0,6}",
             lambda: {**_protection("fig3", 6, COMPLIANT_SEQUENCE_N6),
                      "noise": {"cphase_phi_mean": 0.138,
                                "phi_envelope": [round(0.138 - PHI_SPREAD, 6),
                                                 round(0.138 + PHI_SPREAD, 6)]}}),
    "extended_u1": ("U(1) protection, N=8 periodic, c_i=(-1)^i, V in {0,6}",
                    lambda: _protection("extended_u1", 8, alternating_sequence(8))),
    "trotter_study": ("Trotter error vs step size, N=4 periodic, f=0.75, mu=0.35",
                      lambda: {"schema": SCHEMA_ID, "name": "trotter_study", "kind": "trotter_study",
                               "system": {"n_matter": 4, "boundary": "periodic", "f": 0.75,
                                          "mu": 0.35, "initial_state": "half_filling"},
                               "dt_grid": TROTTER_GRID, "t_final": 10.0}),
    "postselect_study": ("postselection under C-phase noise, fig2 scenario at f=0.75",
                         lambda: _base("postselect_study",
                                       {"n_matter": 8, "boundary": "periodic", "f": 0.75,
                                        "mu": 0.35, "dt": 0.3, "n_steps": 25,
                                        "initial_state": "half_filling"},
                                       variants=["ideal", "noisy"],
                                       observables=["E", "eta_z2"],
                                       postselection=["local_gauss", "global_charge"])),
}


def preset_names() -> list[str]:
    return list(PRESETS)


def preset_config(name: str, *, shots: int | None = None, seed: int | None = None,
                  dt: float | None = None, phi: float | None | str = "default",
                  exact_only: bool = False, f_grid: Sequence[float] | None = None,
                  n_steps: int | None = None) -> ExperimentConfig:
    """Config document of a preset with optional overrides.

    ``phi=None`` disables the noisy variant; ``seed`` shifts the seed ensemble
    to ``seed, seed+1, ...``; ``f_grid`` replaces the parameter points with a
    sweep over ``f``.
    """
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    doc = copy.deepcopy(PRESETS[name][1]())
    if doc.get("kind") == "trotter_study":
        if dt is not None:
            doc["dt_grid"] = [dt]
        if f_grid is not None:
            doc["points"] = [{"label": f"f={f!r}", "f": float(f)} for f in f_grid]
        return ExperimentConfig(doc)
    if shots is not None:
        doc["shots"] = int(shots)
    if seed is not None:
        doc["seeds"] = [int(seed) + k for k in range(len(doc.get("seeds", [0])))]
    if dt is not None:
        doc["system"]["dt"] = float(dt)
    if n_steps is not None:
        doc["system"]["n_steps"] = int(n_steps)
    if phi is None:
        doc["variants"] = [v for v in doc["variants"] if v != "noisy"]
    elif phi != "default":
        doc["noise"] = {"cphase_phi_mean": float(phi)}
    if exact_only:
        doc["variants"] = ["exact"]
    if f_grid is not None:
        doc["points"] = [{"label": f"f={f!r}", "f": float(f)} for f in f_grid]
    return ExperimentConfig(doc)


def run_preset(name: str, out_dir: str | Path | None = None, workers: int | None = None,
               **overrides) -> RunResult:
    return run_config(preset_config(name, **overrides), out_dir, workers)


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))
