"""Observables, gauge-violation measures and postselection.

Every observable here is diagonal once the gauge qubits are read out in the
x basis, and depends only on a matter site together with its two links. A
source (statevector or shot table) is therefore reduced to one distribution
per site over the 8 outcomes of ``(left link, site, right link)``, encoded as
``b_left + 2 b_site + 4 b_right``. At open-boundary edges the missing link is
pinned to outcome 0, i.e. eigenvalue +1.

Statevector sources are rotated into the readout frame on a copy and
marginalized exactly; shot sources are histogrammed, and their per-shot
values give the reported standard errors.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import ConfigError, InsufficientStatistics
from .lattice import KAPPA_U1, KAPPA_Z2, GaugeSector, LatticeSpec
from .shots import ShotTable
from .statevector import StateVector

MIN_SHOTS = 100
CRITERIA = ("local_gauss", "global_charge")

_CODES = np.arange(8)
_TL = 1 - 2 * (_CODES & 1)
_SZ = 1 - 2 * ((_CODES >> 1) & 1)
_TR = 1 - 2 * ((_CODES >> 2) & 1)
_GZ2 = -_TL * _SZ * _TR


def _gu1_table(i: int) -> np.ndarray:
    return (_TL - _TR + _SZ + (-1) ** i) // 2


def _site_slots(lattice: LatticeSpec, i: int) -> tuple[int | None, int, int | None]:
    left, right = lattice.left_link(i), lattice.right_link(i)
    return (None if left is None else lattice.link_qubit(left),
            lattice.matter_qubit(i),
            None if right is None else lattice.link_qubit(right))


# ---------------------------------------------------------------- sources

def readout_frame(state: StateVector, lattice: LatticeSpec) -> StateVector:
    """Copy of ``state`` with every gauge qubit rotated so that bit 0 means ``tau^x = +1``."""
    from .circuits import measurement_gates

    if state.num_qubits != lattice.num_qubits:
        raise ValueError(f"state has {state.num_qubits} qubits, lattice needs {lattice.num_qubits}")
    out = state.copy()
    for g in measurement_gates(lattice, "gauge_x"):
        g.apply_to(out)
    return out


def _check_shots(shots: ShotTable, lattice: LatticeSpec) -> None:
    if shots.num_qubits != lattice.num_qubits:
        raise ValueError(f"shots have {shots.num_qubits} qubits, lattice needs {lattice.num_qubits}")
    if shots.x_basis != tuple(sorted(lattice.gauge_qubits)):
        raise ConfigError("shot table is not tagged with the gauge_x readout basis")


def shot_codes(shots: ShotTable, lattice: LatticeSpec) -> np.ndarray:
    """``(n_shots, N)`` per-site triple codes."""
    _check_shots(shots, lattice)
    bits = shots.bits
    codes = np.zeros((shots.n_shots, lattice.n_matter), dtype=np.uint8)
    for i in range(lattice.n_matter):
        ql, qs, qr = _site_slots(lattice, i)
        c = 2 * bits[:, qs]
        if ql is not None:
            c += bits[:, ql]
        if qr is not None:
            c += 4 * bits[:, qr]
        codes[:, i] = c
    return codes


@dataclass(frozen=True)
class SiteDistributions:
    """Per-site triple distributions, plus per-shot codes for shot sources."""

    probs: np.ndarray
    codes: np.ndarray | None = None

    @property
    def n_shots(self) -> int | None:
        return None if self.codes is None else self.codes.shape[0]


def site_distributions(source: StateVector | ShotTable, lattice: LatticeSpec,
                       min_shots: int = MIN_SHOTS) -> SiteDistributions:
    """Reduce a source to per-site triple distributions.

    Raises:
        InsufficientStatistics: a shot source has fewer than ``min_shots`` rows.
    """
    if isinstance(source, ShotTable):
        if source.n_shots < min_shots:
            raise InsufficientStatistics(
                f"{source.n_shots} shots available, at least {min_shots} needed")
        codes = shot_codes(source, lattice)
        probs = np.stack([np.bincount(codes[:, i], minlength=8) for i in range(lattice.n_matter)])
        return SiteDistributions(probs / source.n_shots, codes)
    if isinstance(source, StateVector):
        p = readout_frame(source, lattice).probabilities()
        groups = np.zeros((lattice.n_matter, 3), dtype=np.int64)
        widths = np.zeros(lattice.n_matter, dtype=np.int64)
        slot_pos = []
        for i in range(lattice.n_matter):
            present = [(slot, q) for slot, q in enumerate(_site_slots(lattice, i)) if q is not None]
            groups[i, : len(present)] = [q for _, q in present]
            widths[i] = len(present)
            slot_pos.append([slot for slot, _ in present])
        marg = K.group_marginals(p, groups, widths)
        probs = np.zeros((lattice.n_matter, 8))
        for i, slots in enumerate(slot_pos):
            for r in range(1 << len(slots)):
                code = sum(((r >> m) & 1) << s for m, s in enumerate(slots))
                probs[i, code] += marg[i, r]
        return SiteDistributions(probs)
    raise TypeError(f"unsupported source type {type(source).__name__}")


def _as_dists(source, lattice: LatticeSpec) -> SiteDistributions:
    return source if isinstance(source, SiteDistributions) else site_distributions(source, lattice)


# ---------------------------------------------------------------- estimators

@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float


def _per_site_tables(lattice: LatticeSpec, target: GaugeSector | None, name: str) -> np.ndarray:
    """``(N, 8)`` table of a per-site quantity over triple codes."""
    n = lattice.n_matter
    if name == "tau_right":
        tab = np.tile((1 - 2 * ((_CODES >> 2) & 1)).astype(float), (n, 1))
        if not lattice.periodic:
            tab[n - 1] = 0.0  # the last site of an open chain has no right link
        return tab
    if target is None:
        raise ValueError(f"{name} needs a target gauge sector")
    if name == "eta_z2":
        g = np.asarray(target.g_z2)
        return (_GZ2[None, :] - g[:, None]) ** 2 / (KAPPA_Z2 * n)
    if name == "eta_u1":
        g = np.asarray(target.g_u1)
        tabs = np.stack([_gu1_table(i) for i in range(n)])
        return (tabs - g[:, None]) ** 2 / (KAPPA_U1 * n)
    raise KeyError(name)


def _site_sum(d: SiteDistributions, table: np.ndarray, scale: float = 1.0) -> Estimate:
    value = float(np.sum(d.probs * table)) * scale
    if d.codes is None:
        return Estimate(value, 0.0)
    per_shot = table[np.arange(table.shape[0])[None, :], d.codes].sum(axis=1) * scale
    n = per_shot.size
    err = float(per_shot.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return Estimate(value, err)


def electric_field_estimate(source, lattice: LatticeSpec) -> Estimate:
    d = _as_dists(source, lattice)
    return _site_sum(d, _per_site_tables(lattice, None, "tau_right"), 1.0 / lattice.n_links)


def electric_field_average(source, lattice: LatticeSpec) -> float:
    """Mean of ``<tau^x>`` over all links."""
    return electric_field_estimate(source, lattice).value


def eta_u1_estimate(source, lattice: LatticeSpec, target: GaugeSector) -> Estimate:
    return _site_sum(_as_dists(source, lattice), _per_site_tables(lattice, target, "eta_u1"))


def eta_u1(source, lattice: LatticeSpec, target: GaugeSector) -> float:
    """``(1 / 9N) sum_i <(G_i^{U(1)} - g_i)^2>`` against the target sector."""
    return eta_u1_estimate(source, lattice, target).value


def eta_z2_estimate(source, lattice: LatticeSpec, target: GaugeSector) -> Estimate:
    return _site_sum(_as_dists(source, lattice), _per_site_tables(lattice, target, "eta_z2"))


def eta_z2(source, lattice: LatticeSpec, target: GaugeSector) -> float:
    """``(1 / 4N) sum_i <(G_i^{Z2} - g_i)^2>`` against the target sector."""
    return eta_z2_estimate(source, lattice, target).value


def site_resolved(source, lattice: LatticeSpec) -> np.ndarray:
    """Per-qubit ``(1 + sigma^z)/2`` on matter and ``(1 + tau^x)/2`` on links."""
    d = _as_dists(source, lattice)
    out = np.empty(lattice.num_qubits)
    for i in range(lattice.n_matter):
        out[lattice.matter_qubit(i)] = float(np.sum(d.probs[i] * (_SZ > 0)))
    for l in range(lattice.n_links):
        i = lattice.link_sites(l)[0]
        out[lattice.link_qubit(l)] = float(np.sum(d.probs[i] * (_TR > 0)))
    return out


def site_resolved_stderr(source, lattice: LatticeSpec) -> np.ndarray:
    """Binomial standard errors of :func:`site_resolved` (zeros for statevectors)."""
    d = _as_dists(source, lattice)
    p = site_resolved(d, lattice)
    if d.n_shots is None:
        return np.zeros_like(p)
    return np.sqrt(p * (1 - p) / max(d.n_shots - 1, 1))


# ---------------------------------------------------------------- postselection

def gauss_z2_per_shot(shots: ShotTable, lattice: LatticeSpec) -> np.ndarray:
    """``(n_shots, N)`` int8 array of measured ``G_i^{Z2}`` eigenvalues."""
    return _GZ2[shot_codes(shots, lattice)].astype(np.int8)


def matter_charge_per_shot(shots: ShotTable, lattice: LatticeSpec) -> np.ndarray:
    """Sum of measured ``sigma^z`` over matter sites, per shot."""
    bits = shots.bits[:, list(lattice.matter_qubits)].astype(np.int64)
    return lattice.n_matter - 2 * bits.sum(axis=1)


@dataclass(frozen=True)
class PostselectionResult:
    shots: ShotTable
    fractions: dict[str, float]

    @property
    def retained_fraction(self) -> float:
        return self.fractions["combined"]


def postselect(shots: ShotTable, lattice: LatticeSpec, target: GaugeSector,
               criteria: Iterable[str] = ("local_gauss",),
               total_charge: int | None = None) -> PostselectionResult:
    """Keep shots that satisfy every criterion.

    ``local_gauss`` requires every measured ``G_i^{Z2}`` to equal
    ``target.g_z2``; ``global_charge`` requires the summed matter ``sigma^z``
    to equal ``total_charge``. Fractions are reported per criterion and for
    their conjunction (``combined``).
    """
    criteria = tuple(sorted(set(criteria)))
    unknown = set(criteria) - set(CRITERIA)
    if unknown:
        raise ConfigError(f"unknown postselection criteria {sorted(unknown)}")
    n = shots.n_shots
    masks = {}
    if "local_gauss" in criteria:
        if len(target.g_z2) != lattice.n_matter:
            raise ConfigError("target sector does not match the lattice")
        g = gauss_z2_per_shot(shots, lattice)
        masks["local_gauss"] = np.all(g == np.asarray(target.g_z2)[None, :], axis=1)
    if "global_charge" in criteria:
        if total_charge is None:
            raise ConfigError("global_charge postselection needs the initial total charge")
        masks["global_charge"] = matter_charge_per_shot(shots, lattice) == total_charge
    keep = np.ones(n, dtype=bool)
    for m in masks.values():
        keep &= m
    fractions = {k: float(m.mean()) if n else 0.0 for k, m in masks.items()}
    fractions["combined"] = float(keep.mean()) if n else 0.0
    return PostselectionResult(shots.select(keep), fractions)


# ---------------------------------------------------------------- series

SERIES_COLUMNS = ("step", "t", "observable", "value", "stderr", "retained_fraction")


@dataclass
class ObservableSeries:
    """Long-format table of observables over Trotter steps.

    A ``None`` value marks an estimate that was skipped for lack of shots.
    """

    rows: list[tuple[int, float, str, float | None, float | None, float]] = field(default_factory=list)

    def add(self, step: int, t: float, name: str, value: float | None,
            stderr: float | None = 0.0, retained_fraction: float = 1.0) -> None:
        self.rows.append((int(step), float(t), name,
                          None if value is None else float(value),
                          None if stderr is None else float(stderr),
                          float(retained_fraction)))

    def add_estimate(self, step: int, t: float, name: str, est: Estimate | None,
                     retained_fraction: float = 1.0) -> None:
        if est is None:
            self.add(step, t, name, None, None, retained_fraction)
        else:
            self.add(step, t, name, est.value, est.stderr, retained_fraction)

    def names(self) -> list[str]:
        return list(dict.fromkeys(r[2] for r in self.rows))

    def values(self, name: str) -> np.ndarray:
        """Values of one observable ordered by step (NaN for skipped estimates)."""
        sel = sorted((r for r in self.rows if r[2] == name), key=lambda r: r[0])
        return np.array([np.nan if r[3] is None else r[3] for r in sel])

    def times(self, name: str) -> np.ndarray:
        return np.array(sorted(r[1] for r in self.rows if r[2] == name))

    def extend(self, other: ObservableSeries) -> None:
        self.rows.extend(other.rows)

    def to_csv(self, extra: Sequence[tuple[str, object]] = ()) -> str:
        """CSV text; ``extra`` prepends constant columns such as the run variant."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([k for k, _ in extra] + list(SERIES_COLUMNS))
        for step, t, name, value, err, frac in self.rows:
            w.writerow([v for _, v in extra] + [step, repr(t), name, _fmt(value), _fmt(err), repr(frac)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps([dict(zip(SERIES_COLUMNS, r)) for r in self.rows], allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> ObservableSeries:
        return cls([tuple(d[c] for c in SERIES_COLUMNS) for d in json.loads(text)])


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(x)


def record_observables(series: ObservableSeries, step: int, t: float, source,
                       lattice: LatticeSpec, target: GaugeSector,
                       names: Sequence[str] = ("E", "eta_z2", "eta_u1"),
                       suffix: str = "", retained_fraction: float = 1.0,
                       include_sites: bool = False) -> None:
    """Evaluate and append the requested observables for one step.

    Shot sources below the statistics floor yield null rows.
    """
    try:
        d = _as_dists(source, lattice)
    except InsufficientStatistics:
        d = None
    for name in names:
        est = None
        if d is not None:
            if name == "E":
                est = electric_field_estimate(d, lattice)
            elif name == "eta_z2":
                est = eta_z2_estimate(d, lattice, target)
            elif name == "eta_u1":
                est = eta_u1_estimate(d, lattice, target)
            else:
                raise ConfigError(f"unknown observable {name!r}")
        series.add_estimate(step, t, name + suffix, est, retained_fraction)
    if include_sites:
        if d is None:
            vals = errs = [None] * lattice.num_qubits
        else:
            vals, errs = site_resolved(d, lattice), site_resolved_stderr(d, lattice)
        for q in range(lattice.num_qubits):
            series.add(step, t, f"site_{q}{suffix}", vals[q], errs[q], retained_fraction)
