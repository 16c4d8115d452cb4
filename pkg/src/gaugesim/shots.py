"""Sampled measurement records."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .lattice import LatticeSpec


@dataclass(frozen=True)
class ShotTable:
    """``n_shots x L`` measured bits.

    ``x_basis`` lists the qubits that were rotated into the x basis before
    measurement; a bit ``b`` on any qubit reads as eigenvalue ``1 - 2b`` in the
    basis it was measured in.
    """

    bits: np.ndarray
    x_basis: tuple[int, ...] = ()
    lattice: LatticeSpec | None = field(default=None, compare=False)

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.ndim != 2:
            raise ValueError(f"shot bits must be 2-D, got shape {bits.shape}")
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "x_basis", tuple(sorted(int(q) for q in self.x_basis)))

    @property
    def n_shots(self) -> int:
        return self.bits.shape[0]

    @property
    def num_qubits(self) -> int:
        return self.bits.shape[1]

    def eigenvalues(self) -> np.ndarray:
        """``+1/-1`` per bit as int8."""
        return (1 - 2 * self.bits.astype(np.int8)).astype(np.int8)

    def tagged(self, x_basis, lattice: LatticeSpec | None = None) -> ShotTable:
        return replace(self, x_basis=tuple(x_basis), lattice=lattice or self.lattice)

    def select(self, mask: np.ndarray) -> ShotTable:
        return replace(self, bits=self.bits[np.asarray(mask, dtype=bool)])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ShotTable):
            return NotImplemented
        return self.x_basis == other.x_basis and np.array_equal(self.bits, other.bits)

    __hash__ = None
