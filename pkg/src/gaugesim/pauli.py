"""Minimal Pauli-string algebra.

A Pauli string is stored as a sorted tuple of ``(qubit, letter)`` pairs with
letters in ``"XYZ"``; the empty tuple is the identity. Qubit ``q`` maps to bit
``q`` of a basis-state index (little-endian).
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from numbers import Number

import numpy as np

PauliKey = tuple[tuple[int, str], ...]

# single-qubit products: (a, b) -> (phase, a*b)
_PRODUCT = {
    ("X", "X"): (1, ""), ("Y", "Y"): (1, ""), ("Z", "Z"): (1, ""),
    ("X", "Y"): (1j, "Z"), ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"), ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"), ("X", "Z"): (-1j, "Y"),
}


def pauli_key(string: Mapping[int, str] | Iterable[tuple[int, str]]) -> PauliKey:
    """Canonical key for a sparse ``qubit -> letter`` map."""
    items = string.items() if isinstance(string, Mapping) else string
    out = []
    for q, p in items:
        p = p.upper()
        if p == "I":
            continue
        if p not in "XYZ" or len(p) != 1:
            raise ValueError(f"unknown Pauli letter {p!r}")
        out.append((int(q), p))
    out.sort()
    qs = [q for q, _ in out]
    if len(set(qs)) != len(qs):
        raise ValueError(f"repeated qubit in Pauli string {out}")
    return tuple(out)


def multiply_keys(a: PauliKey, b: PauliKey) -> tuple[complex, PauliKey]:
    """Return ``(phase, key)`` with ``P_a P_b = phase * P_key``."""
    da = dict(a)
    phase: complex = 1
    for q, p in b:
        if q in da:
            ph, r = _PRODUCT[(da[q], p)]
            phase *= ph
            if r:
                da[q] = r
            else:
                del da[q]
        else:
            da[q] = p
    return phase, tuple(sorted(da.items()))


def key_masks(key: PauliKey) -> tuple[int, int, complex]:
    """Bit masks describing the action on basis states.

    ``P|x> = phase * (-1)**popcount(x & zmask) |x ^ flip>``.
    """
    flip = zmask = 0
    n_y = 0
    for q, p in key:
        if p in "XY":
            flip |= 1 << q
        if p in "YZ":
            zmask |= 1 << q
        if p == "Y":
            n_y += 1
    return flip, zmask, 1j ** n_y


class PauliSum:
    """Linear combination of Pauli strings with complex coefficients."""

    def __init__(self, terms: Mapping[PauliKey, complex] | None = None):
        self.terms: dict[PauliKey, complex] = {}
        for k, c in (terms or {}).items():
            self._add(pauli_key(k), c)

    @classmethod
    def from_list(cls, pairs: Iterable[tuple[complex, Mapping[int, str]]]) -> PauliSum:
        out = cls()
        for c, s in pairs:
            out._add(pauli_key(s), c)
        return out

    @classmethod
    def identity(cls, c: complex = 1.0) -> PauliSum:
        return cls({(): c})

    def _add(self, key: PauliKey, c: complex) -> None:
        self.terms[key] = self.terms.get(key, 0) + c

    def simplify(self, atol: float = 1e-14) -> PauliSum:
        return PauliSum({k: c for k, c in self.terms.items() if abs(c) > atol})

    def __add__(self, other: PauliSum | Number) -> PauliSum:
        if isinstance(other, Number):
            other = PauliSum.identity(other)
        out = PauliSum(self.terms)
        for k, c in other.terms.items():
            out._add(k, c)
        return out

    __radd__ = __add__

    def __neg__(self) -> PauliSum:
        return self * -1

    def __sub__(self, other: PauliSum | Number) -> PauliSum:
        return self + (-other)

    def __mul__(self, other: PauliSum | Number) -> PauliSum:
        if isinstance(other, Number):
            return PauliSum({k: c * other for k, c in self.terms.items()})
        out = PauliSum()
        for ka, ca in self.terms.items():
            for kb, cb in other.terms.items():
                ph, k = multiply_keys(ka, kb)
                out._add(k, ph * ca * cb)
        return out

    def __rmul__(self, other: Number) -> PauliSum:
        return self * other

    def commutator(self, other: PauliSum) -> PauliSum:
        return (self * other - other * self).simplify()

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return all(abs(np.imag(c)) <= atol for c in self.terms.values())

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        body = " + ".join(
            f"({c:.4g})*" + ("".join(f"{p}{q}" for q, p in k) or "I")
            for k, c in self.terms.items()
        )
        return f"PauliSum({body or '0'})"

    def as_list(self) -> list[tuple[complex, dict[int, str]]]:
        return [(c, dict(k)) for k, c in self.terms.items()]

    def num_qubits(self) -> int:
        qs = [q for k in self.terms for q, _ in k]
        return max(qs) + 1 if qs else 0
