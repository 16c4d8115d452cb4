"""Dense statevector with in-place gate kernels.

Qubit ``k`` is bit ``k`` of a basis-state index. Two-qubit matrices act on
the 2-bit sub-index ``b(q1) + 2 * b(q2)``, so ``q1`` is the low bit.

Sampling uses numpy's ``PCG64`` bit generator seeded with the given integer,
then inverse-CDF lookup on the cumulative probabilities; shot tables are
therefore reproducible across platforms for a fixed seed.
"""

from __future__ import annotations

import struct
from collections.abc import Iterable, Mapping, Sequence
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import _kernels as K
from .errors import ResourceCapError
from .pauli import PauliKey, key_masks, pauli_key
from .shots import ShotTable

MAX_QUBITS = 26
DUMP_MAGIC = b"GSSV"


def _check_unitary(u: np.ndarray, dim: int) -> np.ndarray:
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix, got shape {u.shape}")
    return np.ascontiguousarray(u)


def _offsets(qubits: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    r = np.arange(1 << len(qubits))
    offsets = np.zeros_like(r)
    for m, q in enumerate(qubits):
        offsets |= ((r >> m) & 1) << q
    return np.array(sorted(qubits), dtype=np.int64), offsets.astype(np.int64)


@lru_cache(maxsize=4096)
def _embedding(src: tuple[int, ...], dst: tuple[int, ...]) -> tuple[np.ndarray, ...]:
    # index arrays placing a matrix on ``src`` inside the larger register ``dst``
    pos = [dst.index(q) for q in src]
    rest = [m for m in range(len(dst)) if dst[m] not in src]
    rows, cols, rs, cs = [], [], [], []
    dim = 1 << len(dst)
    for r in range(dim):
        for c in range(dim):
            if any(((r >> m) & 1) != ((c >> m) & 1) for m in rest):
                continue
            rows.append(r)
            cols.append(c)
            rs.append(sum(((r >> p) & 1) << i for i, p in enumerate(pos)))
            cs.append(sum(((c >> p) & 1) << i for i, p in enumerate(pos)))
    return tuple(np.array(a, dtype=np.int64) for a in (rows, cols, rs, cs))


def embed_matrix(u: np.ndarray, src: Sequence[int], dst: Sequence[int]) -> np.ndarray:
    """Lift ``u`` acting on ``src`` to the register ``dst`` (a superset)."""
    rows, cols, rs, cs = _embedding(tuple(src), tuple(dst))
    out = np.zeros((1 << len(dst),) * 2, dtype=np.complex128)
    out[rows, cols] = np.asarray(u)[rs, cs]
    return out


def fuse_operations(ops: Iterable[tuple[Sequence[int], np.ndarray]],
                    max_qubits: int = 3) -> list[tuple[tuple[int, ...], np.ndarray]]:
    """Greedily merge a gate sequence into blocks on at most ``max_qubits`` qubits.

    Open blocks live on disjoint qubits; a gate joins (and merges) the blocks
    it touches when the union stays within ``max_qubits``, otherwise those
    blocks are emitted first. The product of the emitted blocks equals the
    product of the input gates.
    """
    out: list[tuple[tuple[int, ...], np.ndarray]] = []
    blocks: dict[int, tuple[tuple[int, ...], np.ndarray]] = {}
    owner: dict[int, int] = {}
    next_id = 0

    def emit(bid: int) -> None:
        qs, m = blocks.pop(bid)
        for q in qs:
            del owner[q]
        out.append((qs, m))

    for qubits, u in ops:
        qubits = tuple(qubits)
        touched = sorted({owner[q] for q in qubits if q in owner})
        union = set(qubits).union(*(blocks[b][0] for b in touched))
        if len(union) > max_qubits:
            for b in touched:
                emit(b)
            touched, union = [], set(qubits)
        qs = tuple(sorted(union))
        m = np.eye(1 << len(qs), dtype=np.complex128)
        for b in touched:
            bqs, bm = blocks.pop(b)
            m = embed_matrix(bm, bqs, qs) @ m
        m = embed_matrix(u, qubits, qs) @ m
        blocks[next_id] = (qs, m)
        for q in qs:
            owner[q] = next_id
        next_id += 1
    for b in sorted(blocks):
        emit(b)
    return out


class StateVector:
    """``2**num_qubits`` complex128 amplitudes, mutated in place by gates."""

    def __init__(self, num_qubits: int, amplitudes: np.ndarray | None = None):
        if not 0 <= num_qubits <= MAX_QUBITS:
            raise ResourceCapError(f"{num_qubits} qubits exceeds the cap of {MAX_QUBITS}")
        self.num_qubits = int(num_qubits)
        dim = 1 << self.num_qubits
        if amplitudes is None:
            self.amplitudes = np.zeros(dim, dtype=np.complex128)
            self.amplitudes[0] = 1.0
        else:
            amps = np.array(amplitudes, dtype=np.complex128, copy=True).ravel()
            if amps.size != dim:
                raise ValueError(f"need {dim} amplitudes, got {amps.size}")
            self.amplitudes = amps

    @classmethod
    def basis(cls, num_qubits: int, index: int) -> StateVector:
        sv = cls(num_qubits)
        sv.amplitudes[0] = 0.0
        sv.amplitudes[index] = 1.0
        return sv

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> StateVector:
        """Basis state with ``bits[k]`` on qubit ``k``."""
        return cls.basis(len(bits), sum(int(b) << k for k, b in enumerate(bits)))

    def copy(self) -> StateVector:
        return StateVector(self.num_qubits, self.amplitudes)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def _check_qubit(self, q: int) -> int:
        if not 0 <= q < self.num_qubits:
            raise IndexError(f"qubit {q} out of range for {self.num_qubits} qubits")
        return int(q)

    def apply_1q(self, u: np.ndarray, q: int) -> StateVector:
        q = self._check_qubit(q)
        u = _check_unitary(u, 2)
        if u[0, 1] == 0 and u[1, 0] == 0:
            K.apply_diag_1q(self.amplitudes, u[0, 0], u[1, 1], q)
        else:
            K.apply_1q(self.amplitudes, u, q)
        return self

    def apply_2q(self, u: np.ndarray, q1: int, q2: int) -> StateVector:
        q1, q2 = self._check_qubit(q1), self._check_qubit(q2)
        if q1 == q2:
            raise ValueError(f"two-qubit gate on repeated qubit {q1}")
        u = _check_unitary(u, 4)
        K.apply_2q(self.amplitudes, u, q1, q2)
        return self

    def apply_controlled_phase(self, phase: complex, q1: int, q2: int) -> StateVector:
        """Multiply the ``|11>`` component of ``(q1, q2)`` by ``phase``."""
        q1, q2 = self._check_qubit(q1), self._check_qubit(q2)
        if q1 == q2:
            raise ValueError(f"two-qubit gate on repeated qubit {q1}")
        K.apply_phase_11(self.amplitudes, complex(phase), q1, q2)
        return self

    def apply_matrix(self, u: np.ndarray, qubits: Sequence[int]) -> StateVector:
        """Dense matrix on ``qubits``; sub-index bit ``m`` belongs to ``qubits[m]``."""
        qubits = tuple(self._check_qubit(q) for q in qubits)
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"repeated qubit in {qubits}")
        k = len(qubits)
        u = _check_unitary(u, 1 << k)
        if k == 1:
            return self.apply_1q(u, qubits[0])
        if k == 2:
            return self.apply_2q(u, *qubits)
        sq, offsets = _offsets(qubits)
        if not np.any(u - np.diag(np.diagonal(u))):
            K.apply_diag_kq(self.amplitudes, np.ascontiguousarray(np.diagonal(u)), sq, offsets)
        elif k == 3:
            K.apply_3q(self.amplitudes, u, sq, offsets)
        else:
            K.apply_kq(self.amplitudes, u, sq, offsets)
        return self

    def expect_pauli(self, string: Mapping[int, str] | PauliKey) -> float:
        """``<psi|P|psi>`` for a sparse ``{qubit: 'X'|'Y'|'Z'}`` string."""
        return float(self.expect_paulis([string])[0])

    def expect_paulis(self, strings: Sequence[Mapping[int, str] | PauliKey]) -> np.ndarray:
        """Real expectation values of several strings in a single pass."""
        if not strings:
            return np.zeros(0)
        keys = [pauli_key(s) for s in strings]
        for key in keys:
            for q, _ in key:
                self._check_qubit(q)
        masks = [key_masks(k) for k in keys]
        flips = np.array([m[0] for m in masks], dtype=np.int64)
        zmasks = np.array([m[1] for m in masks], dtype=np.int64)
        phases = np.array([m[2] for m in masks], dtype=np.complex128)
        vals = K.expect_strings(self.amplitudes, flips, zmasks, phases)
        return vals.real.copy()

    def sample_shots(self, n_shots: int, seed: int) -> ShotTable:
        """Draw ``n_shots`` computational-basis bitstrings i.i.d. from ``|a|**2``."""
        if n_shots < 0:
            raise ValueError("n_shots must be non-negative")
        if n_shots == 0:
            return ShotTable(np.zeros((0, self.num_qubits), dtype=np.uint8))
        cdf = np.cumsum(self.probabilities())
        rng = np.random.Generator(np.random.PCG64(seed))
        draws = rng.random(n_shots) * cdf[-1]
        idx = np.searchsorted(cdf, draws, side="right")
        idx = np.minimum(idx, cdf.size - 1)
        bits = ((idx[:, None] >> np.arange(self.num_qubits)) & 1).astype(np.uint8)
        return ShotTable(bits)

    def dump(self, path: str | Path) -> None:
        """Write ``magic, uint32 L`` then little-endian float64 (re, im) pairs."""
        with open(path, "wb") as fh:
            fh.write(DUMP_MAGIC + struct.pack("<I", self.num_qubits))
            fh.write(self.amplitudes.astype("<c16").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> StateVector:
        with open(path, "rb") as fh:
            head = fh.read(8)
            if head[:4] != DUMP_MAGIC:
                raise ValueError(f"{path} is not a statevector dump")
            (n,) = struct.unpack("<I", head[4:])
            amps = np.frombuffer(fh.read(), dtype="<c16")
        return cls(n, amps)

    def __repr__(self) -> str:
        return f"StateVector(num_qubits={self.num_qubits})"
