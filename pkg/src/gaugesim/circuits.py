"""Native-gate circuits for the Trotterized Z2 gauge theory.

Gate set: ``sqrt_iswap_dag`` (``exp(-i pi/8 (XX + YY))``), ``rz(theta)``
(``exp(-i theta Z / 2)``), ``rxy(axis, theta)`` (rotation by ``theta`` about
``cos(axis) X + sin(axis) Y``) and the noise-only ``cphase(phi)``
(``diag(1, 1, 1, exp(-i phi))``).

Global phases are carried on :class:`Circuit` as a scalar rather than as
gates.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .lattice import LatticeSpec, ModelParams, ProductState, build_initial_state, single_qubit_fields
from .statevector import StateVector, fuse_operations

SQRT_ISWAP_DAG = "sqrt_iswap_dag"
RZ = "rz"
RXY = "rxy"
CPHASE = "cphase"
_ARITY = {SQRT_ISWAP_DAG: 2, CPHASE: 2, RZ: 1, RXY: 1}
_NPARAMS = {SQRT_ISWAP_DAG: 0, CPHASE: 1, RZ: 1, RXY: 2}

# U_ijk equals its gate sequence times this phase
UJK_GLOBAL_PHASE = -1.0

_ZERO_ANGLE = 1e-13


def sqrt_iswap_dag_matrix() -> np.ndarray:
    c = 1 / math.sqrt(2)
    return np.array(
        [[1, 0, 0, 0], [0, c, -1j * c, 0], [0, -1j * c, c, 0], [0, 0, 0, 1]],
        dtype=np.complex128,
    )


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def rxy_matrix(axis: float, theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    e = np.exp(1j * axis)
    return np.array([[c, -1j * s * np.conj(e)], [-1j * s * e, c]], dtype=np.complex128)


def cphase_matrix(phi: float) -> np.ndarray:
    return np.diag([1, 1, 1, np.exp(-1j * phi)]).astype(np.complex128)


@dataclass(frozen=True)
class NativeGate:
    kind: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in _ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        qubits = tuple(int(q) for q in self.qubits)
        if len(qubits) != _ARITY[self.kind] or len(set(qubits)) != len(qubits):
            raise ValueError(f"{self.kind} needs {_ARITY[self.kind]} distinct qubits, got {qubits}")
        if len(self.params) != _NPARAMS[self.kind]:
            raise ValueError(f"{self.kind} takes {_NPARAMS[self.kind]} parameters")
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @property
    def is_two_qubit(self) -> bool:
        return len(self.qubits) == 2

    def matrix(self) -> np.ndarray:
        if self.kind == SQRT_ISWAP_DAG:
            return sqrt_iswap_dag_matrix()
        if self.kind == RZ:
            return rz_matrix(*self.params)
        if self.kind == RXY:
            return rxy_matrix(*self.params)
        return cphase_matrix(*self.params)

    def apply_to(self, state: StateVector) -> None:
        if self.kind == SQRT_ISWAP_DAG:
            state.apply_2q(_SQ_DAG, *self.qubits)
        elif self.kind == CPHASE:
            state.apply_controlled_phase(np.exp(-1j * self.params[0]), *self.qubits)
        else:
            state.apply_1q(self.matrix(), self.qubits[0])

    def __str__(self) -> str:
        args = "(" + ",".join(repr(p) for p in self.params) + ")" if self.params else ""
        return f"{self.kind}{args}@{','.join(map(str, self.qubits))}"


_SQ_DAG = sqrt_iswap_dag_matrix()


def sqrt_iswap_dag(a: int, b: int) -> NativeGate:
    return NativeGate(SQRT_ISWAP_DAG, (a, b))


def rz(q: int, theta: float) -> NativeGate:
    return NativeGate(RZ, (q,), (theta,))


def rxy(q: int, axis: float, theta: float) -> NativeGate:
    return NativeGate(RXY, (q,), (axis, theta))


def cphase(a: int, b: int, phi: float) -> NativeGate:
    return NativeGate(CPHASE, (a, b), (phi,))


def _primary_gates(moment: Sequence[NativeGate]) -> list[NativeGate]:
    """Gates of a moment minus residual C-phases attached to a native gate.

    A ``cphase`` directly following a ``sqrt_iswap_dag`` on the same qubit
    pair is part of that physical gate and shares its slot.
    """
    out: list[NativeGate] = []
    for g in moment:
        if (g.kind == CPHASE and out and out[-1].kind == SQRT_ISWAP_DAG
                and set(out[-1].qubits) == set(g.qubits)):
            continue
        out.append(g)
    return out


@dataclass
class Circuit:
    """Ordered moments of gates with disjoint supports.

    The one exception to disjointness is a residual ``cphase`` placed right
    after the ``sqrt_iswap_dag`` it accompanies.
    """

    num_qubits: int
    moments: list[tuple[NativeGate, ...]] = field(default_factory=list)
    global_phase: complex = 1.0

    def __post_init__(self):
        for m in self.moments:
            qs = [q for g in _primary_gates(m) for q in g.qubits]
            if len(qs) != len(set(qs)):
                raise ValueError(f"overlapping gates within a moment: {m}")
            if any(q >= self.num_qubits for g in m for q in g.qubits):
                raise ValueError(f"gate outside {self.num_qubits} qubits in {m}")

    @property
    def two_qubit_depth(self) -> int:
        """Moments holding at least one native entangling gate."""
        return sum(any(g.kind == SQRT_ISWAP_DAG for g in m) for m in self.moments)

    @property
    def gate_counts(self) -> Counter:
        return Counter(g.kind for m in self.moments for g in m)

    def gates(self) -> list[NativeGate]:
        return [g for m in self.moments for g in m]

    def apply_to(self, state: StateVector) -> StateVector:
        if state.num_qubits != self.num_qubits:
            raise ValueError(f"circuit on {self.num_qubits} qubits, state has {state.num_qubits}")
        for m in self.moments:
            for g in m:
                g.apply_to(state)
        if self.global_phase != 1:
            state.amplitudes *= self.global_phase
        return state

    def unitary(self) -> np.ndarray:
        """Dense matrix, built column by column (small circuits only)."""
        if self.num_qubits > 12:
            raise ValueError("dense unitary limited to 12 qubits")
        dim = 1 << self.num_qubits
        out = np.empty((dim, dim), dtype=np.complex128)
        for col in range(dim):
            out[:, col] = self.apply_to(StateVector.basis(self.num_qubits, col)).amplitudes
        return out

    def fused(self, max_qubits: int = 3) -> FusedProgram:
        return FusedProgram.from_gates(self.gates(), self.num_qubits, self.global_phase, max_qubits)

    def to_text(self) -> str:
        """One moment per line, gates as ``name(args)@qubits``."""
        ph = complex(self.global_phase)
        lines = [f"# qubits={self.num_qubits} phase={ph.real!r},{ph.imag!r}"]
        lines += [" ".join(str(g) for g in m) for m in self.moments]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> Circuit:
        lines = text.splitlines()
        head = re.match(r"# qubits=(\d+) phase=([^,]+),(\S+)", lines[0] if lines else "")
        if not head:
            raise ValueError("missing circuit header line")
        moments = []
        for line in lines[1:]:
            if not line.strip() or line.startswith("#"):
                continue
            moments.append(tuple(_parse_gate(tok) for tok in line.split()))
        return cls(int(head.group(1)), moments, complex(float(head.group(2)), float(head.group(3))))


@dataclass
class FusedProgram:
    """A gate sequence pre-multiplied into dense blocks of a few qubits.

    Same unitary as the gates it came from, with far fewer passes over the
    amplitude array.
    """

    num_qubits: int
    blocks: list[tuple[tuple[int, ...], np.ndarray]]
    global_phase: complex = 1.0

    @classmethod
    def from_gates(cls, gates: Iterable[NativeGate], num_qubits: int,
                   global_phase: complex = 1.0, max_qubits: int = 3) -> FusedProgram:
        blocks = fuse_operations(((g.qubits, g.matrix()) for g in gates), max_qubits)
        return cls(num_qubits, blocks, global_phase)

    def apply_to(self, state: StateVector) -> StateVector:
        for qubits, u in self.blocks:
            state.apply_matrix(u, qubits)
        if self.global_phase != 1:
            state.amplitudes *= self.global_phase
        return state


_GATE_RE = re.compile(r"^(\w+)(?:\(([^)]*)\))?@([\d,]+)$")


def _parse_gate(token: str) -> NativeGate:
    m = _GATE_RE.match(token)
    if not m:
        raise ValueError(f"cannot parse gate {token!r}")
    params = tuple(float(p) for p in m.group(2).split(",")) if m.group(2) else ()
    return NativeGate(m.group(1), tuple(int(q) for q in m.group(3).split(",")), params)


def merge_z_rotations(gates: Iterable[NativeGate]) -> list[NativeGate]:
    """Fuse consecutive ``rz`` gates on each qubit; drop zero angles.

    A pending rotation is emitted just before the next non-``rz`` gate touching
    its qubit, which commutes it only past gates on other qubits.
    """
    out: list[NativeGate] = []
    pending: dict[int, float] = {}

    def flush(q: int) -> None:
        theta = pending.pop(q, 0.0)
        if abs(theta) > _ZERO_ANGLE:
            out.append(rz(q, theta))

    for g in gates:
        if g.kind == RZ:
            q = g.qubits[0]
            pending[q] = pending.get(q, 0.0) + g.params[0]
            continue
        for q in g.qubits:
            flush(q)
        out.append(g)
    for q in sorted(pending):
        flush(q)
    return out


def schedule_moments(gates: Sequence[NativeGate], num_qubits: int | None = None,
                     global_phase: complex = 1.0) -> Circuit:
    """Greedy as-soon-as-possible packing that preserves per-qubit order.

    Two-qubit gates are packed into layers; a two-qubit gate lands one layer
    after the latest layer used on either of its qubits. Single-qubit gates do
    not delay entangling layers: each sits in the single-qubit slot right after
    the last two-qubit layer on its qubit (sub-moments when several stack up).
    """
    if num_qubits is None:
        num_qubits = 1 + max((q for g in gates for q in g.qubits), default=-1)
    last_layer: dict[int, int] = {}
    layers: dict[int, list[NativeGate]] = {}
    slots: dict[int, list[list[NativeGate]]] = {}
    depth_in_slot: dict[tuple[int, int], int] = {}
    prev_native: dict[int, NativeGate] = {}
    for g in gates:
        partner = prev_native.get(g.qubits[0])
        if (g.kind == CPHASE and partner is not None and partner.kind == SQRT_ISWAP_DAG
                and set(partner.qubits) == set(g.qubits) and prev_native.get(g.qubits[1]) is partner):
            # residual of the preceding native gate: same layer, right after it
            row = layers[last_layer[g.qubits[0]]]
            row.insert(row.index(partner) + 1, g)
            for q in g.qubits:
                prev_native.pop(q, None)
        elif g.is_two_qubit:
            layer = 1 + max(last_layer.get(q, 0) for q in g.qubits)
            layers.setdefault(layer, []).append(g)
            for q in g.qubits:
                last_layer[q] = layer
                prev_native[q] = g
        else:
            q = g.qubits[0]
            prev_native.pop(q, None)
            slot = last_layer.get(q, 0)
            sub = depth_in_slot.get((slot, q), 0)
            depth_in_slot[(slot, q)] = sub + 1
            subs = slots.setdefault(slot, [])
            while len(subs) <= sub:
                subs.append([])
            subs[sub].append(g)
    moments: list[tuple[NativeGate, ...]] = []
    top = max(list(layers) + list(slots) + [0])
    for s in range(top + 1):
        if s in layers:
            moments.append(tuple(layers[s]))
        for sub in slots.get(s, []):
            moments.append(tuple(sub))
    return Circuit(num_qubits, moments, global_phase)


# --------------------------------------------------------------- synthesis

def sqrt_iswap_gates(a: int, b: int) -> list[NativeGate]:
    """``sqrt(iSWAP)`` from the native ``sqrt(iSWAP)^dag`` and z-rotations.

    Uses ``sqrt_iswap_dag = Rz_a(pi/2) Rz_b(-pi/2) sqrt_iswap Rz_a(-pi/2) Rz_b(pi/2)``.
    """
    h = math.pi / 2
    return [rz(a, h), rz(b, -h), sqrt_iswap_dag(a, b), rz(a, -h), rz(b, h)]


def synthesize_ujk(alpha: float, i: int, j: int, k: int) -> list[NativeGate]:
    """Gates for ``exp(-i alpha (sigma_i^+ tau_j^z sigma_k^- + h.c.))``.

    Six native two-qubit gates, z-rotations only; the product of the returned
    gates times ``UJK_GLOBAL_PHASE`` is the target unitary. ``j`` is the gauge
    qubit between matter qubits ``i`` and ``k``.
    """
    if len({i, j, k}) != 3:
        raise ValueError(f"U_ijk needs distinct qubits, got {(i, j, k)}")
    q = math.pi / 4
    seq = (
        sqrt_iswap_gates(i, j) + sqrt_iswap_gates(i, j)
        + [rz(j, q), rz(k, q)]
        + sqrt_iswap_gates(j, k)
        + [rz(j, math.pi - alpha), rz(k, alpha)]
        + sqrt_iswap_gates(j, k)
        + [rz(i, math.pi), rz(j, -q), rz(k, -q)]
        + sqrt_iswap_gates(i, j) + sqrt_iswap_gates(i, j)
    )
    return merge_z_rotations(seq)


def trotter_step_gates(params: ModelParams, lattice: LatticeSpec) -> tuple[list[NativeGate], complex]:
    """Gate list and global phase of one first-order Trotter step.

    Order: hopping on even bonds, hopping on odd bonds, matter z-rotations,
    gauge x-rotations. Gauge protection, when ``params.v != 0``, only shifts
    the single-qubit angles.
    """
    if lattice.n_matter < 2:
        raise ConfigError("a Trotter step needs at least 2 matter sites")
    params.check_against(lattice)
    alpha = params.j * params.dt
    bonds = lattice.bonds()
    gates: list[NativeGate] = []
    for parity in (0, 1):
        for link, (qi, ql, qk) in enumerate(bonds):
            if link % 2 == parity:
                gates += synthesize_ujk(alpha, qi, ql, qk)
    z, x = single_qubit_fields(params, lattice, protected=params.v != 0)
    for i, hz in enumerate(z):
        if hz != 0:
            gates.append(rz(lattice.matter_qubit(i), 2 * hz * params.dt))
    for l, hx in enumerate(x):
        if hx != 0:
            gates.append(rxy(lattice.link_qubit(l), 0.0, 2 * hx * params.dt))
    return merge_z_rotations(gates), UJK_GLOBAL_PHASE ** len(bonds)


def build_trotter_step(params: ModelParams, lattice: LatticeSpec) -> Circuit:
    """One scheduled Trotter step.

    In isolation a step has two-qubit depth 10 (8 plus the 2 layers that
    overlap with the next step in a longer circuit); see
    :func:`steady_state_step_depth`.
    """
    gates, phase = trotter_step_gates(params, lattice)
    return schedule_moments(gates, lattice.num_qubits, phase)


def preparation_gates(state: ProductState, lattice: LatticeSpec) -> list[NativeGate]:
    """Map ``|0...0>`` to ``state``: X-flips on matter, +-pi/2 y-rotations on links."""
    state.check_against(lattice)
    gates = []
    for i, s in enumerate(state.matter_z):
        if s == -1:
            gates.append(rxy(lattice.matter_qubit(i), 0.0, math.pi))
    for l, s in enumerate(state.gauge_x):
        gates.append(rxy(lattice.link_qubit(l), math.pi / 2, s * math.pi / 2))
    return gates


def measurement_gates(lattice: LatticeSpec, measure_basis: str) -> list[NativeGate]:
    """Basis rotations applied just before a computational-basis readout."""
    if measure_basis == "computational":
        return []
    if measure_basis == "gauge_x":
        return [rxy(q, math.pi / 2, -math.pi / 2) for q in lattice.gauge_qubits]
    raise ConfigError(f"unknown measurement basis {measure_basis!r}")


def resolve_state(kind: str | ProductState, lattice: LatticeSpec) -> ProductState:
    return kind if isinstance(kind, ProductState) else build_initial_state(kind, lattice)


def build_experiment_circuit(kind: str | ProductState, params: ModelParams, lattice: LatticeSpec,
                             measure_basis: str = "gauge_x") -> Circuit:
    """Preparation, ``params.n_steps`` Trotter steps and readout rotations."""
    state = resolve_state(kind, lattice)
    gates = preparation_gates(state, lattice)
    phase: complex = 1.0
    if params.n_steps:
        step, step_phase = trotter_step_gates(params, lattice)
        gates += step * params.n_steps
        phase = step_phase ** params.n_steps
    gates += measurement_gates(lattice, measure_basis)
    return schedule_moments(merge_z_rotations(gates), lattice.num_qubits, phase)


def steady_state_step_depth(params: ModelParams, lattice: LatticeSpec) -> int:
    """Two-qubit depth added by each further Trotter step in a long circuit."""
    step, _ = trotter_step_gates(params, lattice)
    d2 = schedule_moments(merge_z_rotations(step * 2), lattice.num_qubits).two_qubit_depth
    d3 = schedule_moments(merge_z_rotations(step * 3), lattice.num_qubits).two_qubit_depth
    return d3 - d2
