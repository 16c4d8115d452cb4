"""Numba kernels over little-endian amplitude arrays.

Every kernel loops over disjoint index groups, so ``prange`` iterations never
write the same amplitude.
"""

import os

import numba as nb
import numpy as np

if "NUMBA_THREADING_LAYER" not in os.environ:
    # skip numba's probe of an outdated system TBB
    nb.config.THREADING_LAYER = "omp"

_OPTS = dict(cache=True, nogil=True, fastmath=False)


@nb.njit(parallel=True, **_OPTS)
def apply_1q(psi, u, q):
    n = psi.size >> 1
    low = (1 << q) - 1
    bit = 1 << q
    u00, u01, u10, u11 = u[0, 0], u[0, 1], u[1, 0], u[1, 1]
    for k in nb.prange(n):
        i0 = ((k & ~low) << 1) | (k & low)
        i1 = i0 | bit
        a = psi[i0]
        b = psi[i1]
        psi[i0] = u00 * a + u01 * b
        psi[i1] = u10 * a + u11 * b


@nb.njit(parallel=True, **_OPTS)
def apply_diag_1q(psi, d0, d1, q):
    n = psi.size >> 1
    low = (1 << q) - 1
    bit = 1 << q
    for k in nb.prange(n):
        i0 = ((k & ~low) << 1) | (k & low)
        psi[i0] *= d0
        psi[i0 | bit] *= d1


@nb.njit(parallel=True, **_OPTS)
def apply_2q(psi, u, q1, q2):
    # u acts on the sub-index b(q1) + 2*b(q2)
    lo = min(q1, q2)
    hi = max(q1, q2)
    n = psi.size >> 2
    mlo = (1 << lo) - 1
    mhi = (1 << hi) - 1
    b1 = 1 << q1
    b2 = 1 << q2
    for k in nb.prange(n):
        # insert zero bits at positions lo and hi
        t = ((k & ~mlo) << 1) | (k & mlo)
        i0 = ((t & ~mhi) << 1) | (t & mhi)
        i1 = i0 | b1
        i2 = i0 | b2
        i3 = i1 | b2
        a0 = psi[i0]
        a1 = psi[i1]
        a2 = psi[i2]
        a3 = psi[i3]
        psi[i0] = u[0, 0] * a0 + u[0, 1] * a1 + u[0, 2] * a2 + u[0, 3] * a3
        psi[i1] = u[1, 0] * a0 + u[1, 1] * a1 + u[1, 2] * a2 + u[1, 3] * a3
        psi[i2] = u[2, 0] * a0 + u[2, 1] * a1 + u[2, 2] * a2 + u[2, 3] * a3
        psi[i3] = u[3, 0] * a0 + u[3, 1] * a1 + u[3, 2] * a2 + u[3, 3] * a3


@nb.njit(parallel=True, **_OPTS)
def apply_phase_11(psi, phase, q1, q2):
    """Multiply amplitudes with both bits set by ``phase``."""
    lo = min(q1, q2)
    hi = max(q1, q2)
    n = psi.size >> 2
    mlo = (1 << lo) - 1
    mhi = (1 << hi) - 1
    both = (1 << q1) | (1 << q2)
    for k in nb.prange(n):
        t = ((k & ~mlo) << 1) | (k & mlo)
        i0 = ((t & ~mhi) << 1) | (t & mhi)
        psi[i0 | both] *= phase


@nb.njit(inline="always")
def _parity(x):
    x ^= x >> 32
    x ^= x >> 16
    x ^= x >> 8
    x ^= x >> 4
    x ^= x >> 2
    x ^= x >> 1
    return x & 1


_CHUNK = 1 << 14


@nb.njit(parallel=True, **_OPTS)
def expect_strings(psi, flips, zmasks, phases):
    """``<psi|P_k|psi>`` for each string ``k`` in one pass over ``psi``."""
    n = psi.size
    m = flips.size
    n_chunks = (n + _CHUNK - 1) // _CHUNK
    partial = np.zeros((n_chunks, m), dtype=np.complex128)
    for c in nb.prange(n_chunks):
        start = c * _CHUNK
        stop = min(n, start + _CHUNK)
        for x in range(start, stop):
            a = psi[x]
            for k in range(m):
                v = np.conj(psi[x ^ flips[k]]) * a
                if _parity(x & zmasks[k]):
                    partial[c, k] -= v
                else:
                    partial[c, k] += v
    out = np.zeros(m, dtype=np.complex128)
    for c in range(n_chunks):
        for k in range(m):
            out[k] += partial[c, k]
    return out * phases


@nb.njit(parallel=True, **_OPTS)
def pauli_sum_matvec(psi, flips, zmasks, coeffs, out):
    """``out = sum_k coeffs[k] P_k psi`` without storing a matrix."""
    n = psi.size
    m = flips.size
    for y in nb.prange(n):
        acc = 0j
        for k in range(m):
            x = y ^ flips[k]
            v = coeffs[k] * psi[x]
            if _parity(x & zmasks[k]):
                acc -= v
            else:
                acc += v
        out[y] = acc
    return out


@nb.njit(**_OPTS)
def z_sign_expectations(probs, masks):
    """``sum_x p(x) (-1)**popcount(x & mask)`` for each mask."""
    m = masks.size
    out = np.zeros(m)
    for x in range(probs.size):
        p = probs[x]
        if p == 0.0:
            continue
        for k in range(m):
            if _parity(x & masks[k]):
                out[k] -= p
            else:
                out[k] += p
    return out


@nb.njit(parallel=True, **_OPTS)
def apply_kq(psi, u, sorted_qubits, offsets):
    """Dense ``2**k x 2**k`` matrix on ``k`` qubits.

    ``offsets[r]`` is the index offset of sub-basis state ``r``; the matrix is
    indexed in the same sub-basis order.
    """
    k = sorted_qubits.size
    dim = offsets.size
    n = psi.size >> k
    n_chunks = (n + _CHUNK - 1) // _CHUNK
    for c in nb.prange(n_chunks):
        buf = np.empty(dim, dtype=np.complex128)
        stop = min(n, (c + 1) * _CHUNK)
        for g in range(c * _CHUNK, stop):
            base = np.int64(g)
            for m in range(k):
                low = np.int64((1 << sorted_qubits[m]) - 1)
                base = ((base & ~low) << 1) | (base & low)
            for r in range(dim):
                buf[r] = psi[base + offsets[r]]
            for r in range(dim):
                acc = 0j
                for s in range(dim):
                    acc += u[r, s] * buf[s]
                psi[base + offsets[r]] = acc


@nb.njit(parallel=True, **_OPTS)
def apply_diag_kq(psi, d, sorted_qubits, offsets):
    k = sorted_qubits.size
    dim = offsets.size
    n = psi.size >> k
    for g in nb.prange(n):
        base = np.int64(g)
        for m in range(k):
            low = np.int64((1 << sorted_qubits[m]) - 1)
            base = ((base & ~low) << 1) | (base & low)
        for r in range(dim):
            psi[base + offsets[r]] *= d[r]


@nb.njit(parallel=True, **_OPTS)
def apply_3q(psi, u, sorted_qubits, offsets):
    """Dense 8x8 matrix on three qubits, unrolled into locals."""
    n = psi.size >> 3
    m0 = np.int64((1 << sorted_qubits[0]) - 1)
    m1 = np.int64((1 << sorted_qubits[1]) - 1)
    m2 = np.int64((1 << sorted_qubits[2]) - 1)
    o1, o2, o3 = offsets[1], offsets[2], offsets[3]
    o4, o5, o6, o7 = offsets[4], offsets[5], offsets[6], offsets[7]
    for g in nb.prange(n):
        t = np.int64(g)
        t = ((t & ~m0) << 1) | (t & m0)
        t = ((t & ~m1) << 1) | (t & m1)
        b = ((t & ~m2) << 1) | (t & m2)
        a0 = psi[b]
        a1 = psi[b + o1]
        a2 = psi[b + o2]
        a3 = psi[b + o3]
        a4 = psi[b + o4]
        a5 = psi[b + o5]
        a6 = psi[b + o6]
        a7 = psi[b + o7]
        for r in range(8):
            psi[b + offsets[r]] = (u[r, 0] * a0 + u[r, 1] * a1 + u[r, 2] * a2 + u[r, 3] * a3
                                   + u[r, 4] * a4 + u[r, 5] * a5 + u[r, 6] * a6
                                   + u[r, 7] * a7)


@nb.njit(**_OPTS)
def group_marginals(probs, groups, widths):
    """Marginal distributions of ``probs`` over small qubit groups.

    ``groups[g, m]`` is the ``m``-th qubit of group ``g`` (``widths[g]`` used);
    the result row ``g`` is indexed by the little-endian sub-bitstring.
    """
    n_groups = groups.shape[0]
    out = np.zeros((n_groups, 1 << groups.shape[1]))
    for x in range(probs.size):
        p = probs[x]
        if p == 0.0:
            continue
        for g in range(n_groups):
            idx = 0
            for m in range(widths[g]):
                idx |= ((x >> groups[g, m]) & 1) << m
            out[g, idx] += p
    return out
