"""Hardware imperfections: residual C-phase on entangling gates and readout flips.

Each native ``sqrt_iswap_dag`` is followed by ``cphase(phi)``, i.e.
``diag(1, 1, 1, exp(-i phi))`` on the same pair. With a nonzero spread, every
gate draws its own ``phi`` uniformly from ``mean +- spread``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass, replace

import numpy as np

from .circuits import SQRT_ISWAP_DAG, Circuit, NativeGate, cphase
from .errors import ConfigError
from .shots import ShotTable

DEFAULT_PHI = 0.138
PHI_SPREAD = 0.015


@dataclass(frozen=True)
class NoiseParams:
    cphase_phi_mean: float = DEFAULT_PHI
    cphase_phi_spread: float = 0.0
    readout_p0: float = 0.0
    readout_p1: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("cphase_phi_mean", "cphase_phi_spread", "readout_p0", "readout_p1"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ConfigError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.cphase_phi_spread < 0:
            raise ConfigError("cphase_phi_spread must be non-negative")
        for name in ("readout_p0", "readout_p1"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")

    @property
    def has_cphase(self) -> bool:
        return self.cphase_phi_mean != 0 or self.cphase_phi_spread != 0

    @property
    def has_readout(self) -> bool:
        return self.readout_p0 > 0 or self.readout_p1 > 0

    def rng(self, *stream: int) -> np.random.Generator:
        """Independent generator for a named sub-stream of this seed."""
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, *stream])))

    def with_phi(self, phi: float) -> NoiseParams:
        return replace(self, cphase_phi_mean=phi)


def _draw_phi(noise: NoiseParams, rng: np.random.Generator) -> float:
    if noise.cphase_phi_spread == 0:
        return noise.cphase_phi_mean
    return float(rng.uniform(noise.cphase_phi_mean - noise.cphase_phi_spread,
                             noise.cphase_phi_mean + noise.cphase_phi_spread))


def add_cphase_residuals(gates: Iterable[NativeGate], noise: NoiseParams,
                         rng: np.random.Generator | None = None) -> list[NativeGate]:
    """Gate list with a residual C-phase right after every native two-qubit gate."""
    if rng is None:
        rng = noise.rng()
    out = []
    for g in gates:
        out.append(g)
        if g.kind == SQRT_ISWAP_DAG:
            out.append(cphase(*g.qubits, _draw_phi(noise, rng)))
    return out


def apply_cphase_noise(circuit: Circuit, noise: NoiseParams) -> Circuit:
    """Noisy copy of ``circuit``.

    Residuals share the moment of the gate they accompany, so moment count,
    two-qubit depth and the order of the ideal gates are unchanged. Per-gate
    angles are drawn in moment order from ``noise.seed``.
    """
    rng = noise.rng()
    moments = [tuple(add_cphase_residuals(m, noise, rng)) for m in circuit.moments]
    return Circuit(circuit.num_qubits, moments, circuit.global_phase)


def strip_noise(circuit: Circuit) -> Circuit:
    """Remove residual C-phases, recovering the ideal circuit."""
    moments = [tuple(g for g in m if g.kind != "cphase") for m in circuit.moments]
    return Circuit(circuit.num_qubits, moments, circuit.global_phase)


def apply_readout_noise(shots: ShotTable, noise: NoiseParams, stream: int = 0) -> ShotTable:
    """Flip each bit independently: 0 -> 1 with ``readout_p0``, 1 -> 0 with ``readout_p1``.

    Draws come from the ``(seed, stream, 1)`` sub-stream, so the result is
    reproducible and independent of the C-phase draws.
    """
    if not noise.has_readout or shots.n_shots == 0:
        return shots
    u = noise.rng(stream, 1).random(shots.bits.shape)
    bits = shots.bits
    flip = np.where(bits == 0, u < noise.readout_p0, u < noise.readout_p1)
    return replace(shots, bits=(bits ^ flip).astype(np.uint8))
