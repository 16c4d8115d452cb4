"""Dense reference constructions shared by the tests.

Everything here is built from Kronecker products and ``scipy.linalg.expm``
and never calls the package's kernels, so it serves as an independent
oracle. Qubit ``k`` is bit ``k`` of the basis index, i.e. the rightmost
factor of the Kronecker product is qubit 0.
"""

from functools import reduce

import numpy as np
import pytest
import scipy.linalg

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def embed(ops: dict, n: int) -> np.ndarray:
    """Dense operator with ``ops[q]`` (2x2) on qubit ``q`` and identity elsewhere."""
    return reduce(np.kron, [ops.get(q, I2) for q in reversed(range(n))])


def pauli_matrix(string: dict, n: int) -> np.ndarray:
    return embed({q: PAULI[p] for q, p in string.items()}, n)


def terms_matrix(terms, n: int) -> np.ndarray:
    out = np.zeros((2**n, 2**n), dtype=complex)
    for c, s in terms:
        out += c * pauli_matrix(s, n)
    return out


def embed_2q(u: np.ndarray, q1: int, q2: int, n: int) -> np.ndarray:
    """4x4 ``u`` on sub-index ``b(q1) + 2 b(q2)`` lifted to ``n`` qubits."""
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        b1, b2 = (col >> q1) & 1, (col >> q2) & 1
        base = col & ~((1 << q1) | (1 << q2))
        for r in range(4):
            row = base | ((r & 1) << q1) | ((r >> 1) << q2)
            out[row, col] += u[r, b1 + 2 * b2]
    return out


def random_state(n: int, rng) -> np.ndarray:
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return v / np.linalg.norm(v)


def random_unitary(dim: int, rng) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Operator-norm distance after the optimal global phase."""
    ph = np.vdot(b, a)
    ph = ph / abs(ph) if abs(ph) > 1e-300 else 1.0
    return float(np.linalg.norm(a - ph * b, 2))


def expm_h(h: np.ndarray, t: float) -> np.ndarray:
    return scipy.linalg.expm(-1j * t * h)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# ---------------------------------------------------------------- acceptance report

ACCEPTANCE: dict[int, str] = {}


def report(n: int, ok: bool, detail: str) -> None:
    """Record the outcome line of acceptance criterion ``n``."""
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE[n] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
