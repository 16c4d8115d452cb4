"""Exact reference dynamics: Pauli-sum Hamiltonians and Krylov propagation.

Up to ``SPARSE_MAX_QUBITS`` the Hamiltonian is assembled once as a CSR
matrix; above that, products with a state are evaluated string by string
without storing a matrix.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels as K
from .errors import ConvergenceError, ResourceCapError
from .lattice import LatticeSpec, ModelParams, ProductState, pauli_term_list
from .pauli import key_masks, pauli_key
from .statevector import StateVector

SPARSE_MAX_QUBITS = 16
DENSE_MAX_QUBITS = 12
MATRIX_FREE_MAX_QUBITS = 24

# Krylov workspace budget in bytes; bounds the basis size for large registers
KRYLOV_MEMORY = 256 * 2**20


class PauliHamiltonian:
    """Hermitian operator ``sum_k c_k P_k`` with real ``c_k``.

    Each string is stored as bit masks: ``P|x> = phase (-1)^{|x & z|} |x ^ flip>``.
    Strings sharing a flip mask are evaluated together in the sparse build.
    """

    def __init__(self, terms: Iterable[tuple[float, Mapping[int, str]]], num_qubits: int):
        if num_qubits > MATRIX_FREE_MAX_QUBITS:
            raise ResourceCapError(
                f"{num_qubits} qubits exceeds the Hamiltonian cap of {MATRIX_FREE_MAX_QUBITS}")
        self.num_qubits = int(num_qubits)
        flips, zmasks, coeffs = [], [], []
        for c, string in terms:
            if np.imag(c) != 0:
                raise ValueError(f"non-real coefficient {c} for {dict(string)}")
            key = pauli_key(string)
            if key and key[-1][0] >= num_qubits:
                raise ValueError(f"string {dict(string)} outside {num_qubits} qubits")
            f, z, phase = key_masks(key)
            flips.append(f)
            zmasks.append(z)
            coeffs.append(float(np.real(c)) * phase)
        self.flips = np.array(flips, dtype=np.int64)
        self.zmasks = np.array(zmasks, dtype=np.int64)
        self.coeffs = np.array(coeffs, dtype=np.complex128)
        self._sparse: sp.csr_matrix | None = None

    @property
    def dim(self) -> int:
        return 1 << self.num_qubits

    @property
    def n_terms(self) -> int:
        return self.flips.size

    def to_sparse(self) -> sp.csr_matrix:
        if self.num_qubits > SPARSE_MAX_QUBITS:
            raise ResourceCapError(
                f"sparse matrix limited to {SPARSE_MAX_QUBITS} qubits, have {self.num_qubits}")
        if self._sparse is None:
            x = np.arange(self.dim, dtype=np.int64)
            rows, cols, vals = [], [], []
            for f in np.unique(self.flips):
                diag = np.zeros(self.dim, dtype=np.complex128)
                for k in np.flatnonzero(self.flips == f):
                    sign = 1 - 2 * (_popcount(x & self.zmasks[k]) & 1)
                    diag += self.coeffs[k] * sign
                keep = diag != 0
                rows.append(x[keep] ^ f)
                cols.append(x[keep])
                vals.append(diag[keep])
            self._sparse = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(self.dim, self.dim))
        return self._sparse

    def to_dense(self) -> np.ndarray:
        if self.num_qubits > DENSE_MAX_QUBITS:
            raise ResourceCapError(
                f"dense matrix limited to {DENSE_MAX_QUBITS} qubits, have {self.num_qubits}")
        return self.to_sparse().toarray()

    def matvec(self, psi: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        if psi.shape != (self.dim,):
            raise ValueError(f"vector of length {psi.size} for dimension {self.dim}")
        if self.num_qubits <= SPARSE_MAX_QUBITS:
            return self.to_sparse() @ psi
        if out is None:
            out = np.empty_like(psi)
        return K.pauli_sum_matvec(psi, self.flips, self.zmasks, self.coeffs, out)

    def expectation(self, psi: np.ndarray) -> float:
        return float(np.vdot(psi, self.matvec(psi)).real)

    def norm_bound(self) -> float:
        """Upper bound on the operator norm: the sum of ``|c_k|``."""
        return float(np.abs(self.coeffs).sum())

    def is_hermitian(self, atol: float = 1e-14) -> bool:
        if self.num_qubits <= SPARSE_MAX_QUBITS:
            h = self.to_sparse()
            return bool(abs(h - h.conj().T).max() <= atol) if h.nnz else True
        # each string with a real coefficient is Hermitian on its own
        return True


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    out = np.zeros_like(x)
    while np.any(x):
        out += x & 1
        x >>= 1
    return out


def build_hamiltonian(params: ModelParams, model: str, lattice: LatticeSpec) -> PauliHamiltonian:
    """The model Hamiltonian on the lattice's qubit layout."""
    return PauliHamiltonian(pauli_term_list(params, lattice, model), lattice.num_qubits)


@dataclass(frozen=True)
class KrylovStats:
    substeps: int
    matvecs: int
    max_error: float


def _krylov_basis_size(dim: int, requested: int) -> int:
    fit = max(4, KRYLOV_MEMORY // (16 * dim) - 1)
    return max(2, min(requested, fit, dim))


def _lanczos_step(h: PauliHamiltonian, v: np.ndarray, tau: float, m: int,
                  ) -> tuple[np.ndarray, float, int]:
    """One Lanczos approximation of ``exp(-i tau H) v`` for a unit vector ``v``.

    Returns the new vector, an a posteriori error estimate and the number of
    products with ``H`` used. Full reorthogonalization keeps the basis
    orthonormal to working precision.
    """
    dim = v.size
    basis = np.empty((m + 1, dim), dtype=np.complex128)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    basis[0] = v
    size = m
    for j in range(m):
        w = h.matvec(basis[j])
        alpha[j] = np.vdot(basis[j], w).real
        w = w - alpha[j] * basis[j]
        if j:
            w -= beta[j - 1] * basis[j - 1]
        w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] < 1e-13:
            size = j + 1
            break
        basis[j + 1] = w / beta[j]
    t = np.diag(alpha[:size]) + np.diag(beta[: size - 1], 1) + np.diag(beta[: size - 1], -1)
    evals, evecs = np.linalg.eigh(t)
    coef = evecs @ (np.exp(-1j * tau * evals) * evecs[0].conj())
    if size < m or beta[size - 1] < 1e-13:
        err = 0.0
    else:
        err = float(beta[size - 1] * abs(coef[size - 1]))
    return coef @ basis[:size], err, size


def evolve_exact(state: StateVector | np.ndarray, h: PauliHamiltonian, t: float,
                 krylov_dim: int = 30, tol: float = 1e-10, max_halvings: int = 40,
                 return_stats: bool = False):
    """``exp(-i H t)|psi>`` by Lanczos propagation with adaptive substeps.

    A substep is accepted when its error estimate is below ``tol``; otherwise
    it is halved. After an accepted substep the next trial length doubles
    again, capped by the time left.

    Raises:
        ConvergenceError: a substep still fails after ``max_halvings`` halvings.
    """
    psi = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, np.complex128)
    if psi.size != h.dim:
        raise ValueError(f"state of length {psi.size} for Hamiltonian dimension {h.dim}")
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise ValueError("cannot evolve the zero vector")
    v = psi / nrm
    m = _krylov_basis_size(h.dim, krylov_dim)
    done, matvecs, substeps, worst = 0.0, 0, 0, 0.0
    tau = t if h.norm_bound() == 0 else min(abs(t), m / h.norm_bound()) * math.copysign(1, t)
    halvings = 0
    while abs(t - done) > 1e-15 * max(1.0, abs(t)):
        tau = math.copysign(min(abs(tau), abs(t - done)), t)
        new, err, used = _lanczos_step(h, v, tau, m)
        matvecs += used
        if err > tol:
            halvings += 1
            if halvings > max_halvings:
                raise ConvergenceError(
                    f"Krylov substep failed to reach tol={tol:g} (estimate {err:.3g})")
            tau /= 2
            continue
        halvings = 0
        v = new / np.linalg.norm(new)
        done += tau
        substeps += 1
        worst = max(worst, err)
        tau *= 2
    out = StateVector(h.num_qubits, v * nrm) if h.num_qubits <= 26 else v * nrm
    if return_stats:
        return out, KrylovStats(substeps, matvecs, worst)
    return out


def evolve_series(state: StateVector, h: PauliHamiltonian, dt: float, n_steps: int,
                  **kwargs) -> list[StateVector]:
    """States at ``t = k dt`` for ``k = 0..n_steps``."""
    out = [state.copy()]
    for _ in range(n_steps):
        out.append(evolve_exact(out[-1], h, dt, **kwargs))
    return out


# ---------------------------------------------------------------- Trotter error

@dataclass(frozen=True)
class TrotterErrorPoint:
    dt: float
    n_steps: int
    delta_e: float


def trotter_error_study(params: ModelParams, lattice: LatticeSpec, dt_grid: Sequence[float],
                        t_f: float = 10.0, model: str = "z2",
                        initial_state: str | ProductState = "half_filling") -> list[TrotterErrorPoint]:
    """Time-averaged electric-field deviation of Trotterized from exact dynamics.

    For each step size the noiseless Trotter circuit and the exact evolution
    start from the same product state; ``m = floor(t_f / dt)`` steps are
    compared at ``t = k dt``, ``k = 1..m``.
    """
    from dataclasses import replace

    from .circuits import build_experiment_circuit, build_trotter_step
    from .measure import electric_field_average

    if model not in ("z2", "z2_protected"):
        raise ValueError("the Trotter circuit implements the z2 models only")
    h = build_hamiltonian(params, "z2_protected" if params.v else "z2", lattice)
    out = []
    for dt in dt_grid:
        dt = float(dt)
        m = int(math.floor(t_f / dt + 1e-9))
        p = replace(params, dt=dt, n_steps=0)
        prep = build_experiment_circuit(initial_state, p, lattice, measure_basis="computational")
        trot = prep.apply_to(StateVector(lattice.num_qubits))
        ref = trot.copy()
        step = build_trotter_step(p, lattice).fused()
        dev = 0.0
        for _ in range(m):
            step.apply_to(trot)
            ref = evolve_exact(ref, h, dt)
            dev += abs(electric_field_average(trot, lattice) - electric_field_average(ref, lattice))
        out.append(TrotterErrorPoint(dt, m, dev / m if m else 0.0))
    return out


def loglog_slope(points: Sequence[TrotterErrorPoint], lo: float, hi: float) -> tuple[float, float]:
    """Least-squares ``(slope, intercept)`` of ``log dE`` vs ``log dt`` on ``[lo, hi]``."""
    sel = [p for p in points if lo - 1e-12 <= p.dt <= hi + 1e-12 and p.delta_e > 0]
    if len(sel) < 2:
        raise ValueError(f"need at least two points with dt in [{lo}, {hi}]")
    x = np.log([p.dt for p in sel])
    y = np.log([p.delta_e for p in sel])
    slope, icpt = np.polyfit(x, y, 1)
    return float(slope), float(icpt)
