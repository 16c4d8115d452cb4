import numpy as np
import pytest

from gaugesim.errors import ResourceCapError
from gaugesim.statevector import StateVector, embed_matrix, fuse_operations

from conftest import X, Y, Z, embed, embed_2q, pauli_matrix, random_state, random_unitary

SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def kq_oracle(u, qubits, n):
    """Dense lift of ``u`` whose sub-index bit ``m`` belongs to ``qubits[m]``."""
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    mask = sum(1 << q for q in qubits)
    for col in range(dim):
        sub_c = sum(((col >> q) & 1) << m for m, q in enumerate(qubits))
        for r in range(2 ** len(qubits)):
            row = (col & ~mask) | sum(((r >> m) & 1) << q for m, q in enumerate(qubits))
            out[row, col] += u[r, sub_c]
    return out


def test_basis_and_bits():
    s = StateVector.from_bits([0, 1, 1, 0])
    assert s.amplitudes[0b0110] == 1
    assert StateVector.basis(3, 5).probabilities()[5] == 1
    assert s.expect_pauli({0: "Z"}) == 1 and s.expect_pauli({1: "Z"}) == -1
    assert StateVector(1).expect_pauli({0: "X"}) == 0
    assert StateVector(2).expect_pauli({}) == 1
    with pytest.raises(ResourceCapError):
        StateVector(27)
    with pytest.raises(ValueError):
        StateVector(2, np.ones(3))


def test_single_qubit_gates_match_kronecker(rng):
    n = 5
    psi = random_state(n, rng)
    s = StateVector(n, psi)
    ref = psi.copy()
    for q in range(n):
        u = random_unitary(2, rng)
        s.apply_1q(u, q)
        ref = embed({q: u}, n) @ ref
        d = np.diag(np.exp(1j * rng.normal(size=2)))
        s.apply_1q(d, (q + 2) % n)
        ref = embed({(q + 2) % n: d}, n) @ ref
    np.testing.assert_allclose(s.amplitudes, ref, atol=1e-10)


@pytest.mark.parametrize("pair", [(0, 1), (1, 0), (0, 4), (4, 2), (3, 1)])
def test_two_qubit_gates_match_kronecker(rng, pair):
    n = 5
    psi = random_state(n, rng)
    u = random_unitary(4, rng)
    got = StateVector(n, psi).apply_2q(u, *pair).amplitudes
    np.testing.assert_allclose(got, embed_2q(u, *pair, n) @ psi, atol=1e-10)


def test_swap_conjugation_convention(rng):
    psi = random_state(4, rng)
    u = random_unitary(4, rng)
    a = StateVector(4, psi).apply_2q(SWAP @ u @ SWAP, 1, 3)
    b = StateVector(4, psi).apply_2q(u, 3, 1)
    np.testing.assert_allclose(a.amplitudes, b.amplitudes, atol=1e-12)


def test_sqrt_iswap_dag_on_01():
    from gaugesim.circuits import sqrt_iswap_dag_matrix

    u = sqrt_iswap_dag_matrix()
    xx_yy = np.kron(X, X) + np.kron(Y, Y)
    import scipy.linalg
    np.testing.assert_allclose(u, scipy.linalg.expm(-1j * np.pi / 8 * xx_yy), atol=1e-12)
    s = StateVector.from_bits([1, 0]).apply_2q(u, 0, 1)
    np.testing.assert_allclose(s.amplitudes, [0, 1 / np.sqrt(2), -1j / np.sqrt(2), 0], atol=1e-12)


def test_controlled_phase(rng):
    psi = random_state(3, rng)
    got = StateVector(3, psi).apply_controlled_phase(np.exp(-0.3j), 0, 2).amplitudes
    ref = embed_2q(np.diag([1, 1, 1, np.exp(-0.3j)]), 0, 2, 3) @ psi
    np.testing.assert_allclose(got, ref, atol=1e-12)


@pytest.mark.parametrize("qubits", [(0, 2, 4), (4, 1, 2), (3, 0, 1, 5), (2, 5, 0)])
def test_apply_matrix_many_qubits(rng, qubits):
    n = 6
    psi = random_state(n, rng)
    u = random_unitary(2 ** len(qubits), rng)
    got = StateVector(n, psi).apply_matrix(u, qubits).amplitudes
    np.testing.assert_allclose(got, kq_oracle(u, qubits, n) @ psi, atol=1e-10)
    d = np.diag(np.exp(1j * rng.normal(size=2 ** len(qubits))))
    got = StateVector(n, psi).apply_matrix(d, qubits).amplitudes
    np.testing.assert_allclose(got, kq_oracle(d, qubits, n) @ psi, atol=1e-10)


def test_random_sequence_matches_dense(rng):
    n = 5
    psi = random_state(n, rng)
    s = StateVector(n, psi)
    ref = psi.copy()
    for _ in range(60):
        if rng.random() < 0.5:
            q = int(rng.integers(n))
            u = random_unitary(2, rng)
            s.apply_1q(u, q)
            ref = embed({q: u}, n) @ ref
        else:
            a, b = (int(x) for x in rng.choice(n, 2, replace=False))
            u = random_unitary(4, rng)
            s.apply_2q(u, a, b)
            ref = embed_2q(u, a, b, n) @ ref
    np.testing.assert_allclose(s.amplitudes, ref, atol=1e-10)


def test_norm_after_many_gates(rng):
    n = 10
    s = StateVector(n, random_state(n, rng))
    for _ in range(1000):
        if rng.random() < 0.5:
            s.apply_1q(random_unitary(2, rng), int(rng.integers(n)))
        else:
            a, b = rng.choice(n, 2, replace=False)
            s.apply_2q(random_unitary(4, rng), int(a), int(b))
    assert abs(1 - s.norm() ** 2) < 1e-9


def test_expectations_match_dense(rng):
    n = 5
    psi = random_state(n, rng)
    s = StateVector(n, psi)
    for _ in range(20):
        qs = rng.choice(n, 3, replace=False)
        string = {int(q): str(rng.choice(list("XYZ"))) for q in qs}
        want = np.vdot(psi, pauli_matrix(string, n) @ psi)
        assert abs(want.imag) < 1e-12
        assert s.expect_pauli(string) == pytest.approx(want.real, abs=1e-10)
    np.testing.assert_allclose(
        s.expect_paulis([{0: "Z"}, {1: "X", 2: "Y"}]),
        [np.vdot(psi, pauli_matrix(p, n) @ psi).real for p in ({0: "Z"}, {1: "X", 2: "Y"})],
        atol=1e-12)


def test_sampling_basis_state():
    shots = StateVector.from_bits([0, 1, 1, 0]).sample_shots(500, seed=3)
    assert (shots.bits == [0, 1, 1, 0]).all()
    assert StateVector(3).sample_shots(0, seed=1).n_shots == 0


def test_sampling_uniform_qubit():
    s = StateVector(1).apply_1q(np.array([[1, 1], [1, -1]]) / np.sqrt(2), 0)
    p1 = s.sample_shots(50000, seed=11).bits[:, 0].mean()
    assert abs(p1 - 0.5) < 0.011


def test_sampling_marginals_within_5_sigma(rng):
    n = 6
    s = StateVector(n, random_state(n, rng))
    shots = s.sample_shots(20000, seed=5)
    for q in range(n):
        p = (1 - s.expect_pauli({q: "Z"})) / 2
        sigma = np.sqrt(p * (1 - p) / shots.n_shots)
        assert abs(shots.bits[:, q].mean() - p) < 5 * sigma


def test_sampling_is_deterministic(rng):
    s = StateVector(5, random_state(5, rng))
    a, b = s.sample_shots(1000, seed=42), s.sample_shots(1000, seed=42)
    assert a.bits.tobytes() == b.bits.tobytes()
    assert not np.array_equal(a.bits, s.sample_shots(1000, seed=43).bits)


def test_dump_round_trip(tmp_path, rng):
    s = StateVector(4, random_state(4, rng))
    s.dump(tmp_path / "psi.bin")
    t = StateVector.load(tmp_path / "psi.bin")
    assert t.num_qubits == 4
    np.testing.assert_array_equal(t.amplitudes, s.amplitudes)
    (tmp_path / "bad.bin").write_bytes(b"nope1234")
    with pytest.raises(ValueError):
        StateVector.load(tmp_path / "bad.bin")


def test_qubit_checks():
    s = StateVector(2)
    with pytest.raises(IndexError):
        s.apply_1q(np.eye(2), 2)
    with pytest.raises(ValueError):
        s.apply_2q(np.eye(4), 1, 1)
    with pytest.raises(ValueError):
        s.apply_1q(np.eye(4), 0)


def test_embed_matrix_matches_kron(rng):
    u = random_unitary(4, rng)
    np.testing.assert_allclose(embed_matrix(u, (2, 0), (0, 1, 2)),
                               kq_oracle(u, (2, 0), 3), atol=1e-12)


def test_fusion_preserves_product(rng):
    n = 5
    ops = []
    ref = np.eye(2**n, dtype=complex)
    for _ in range(40):
        if rng.random() < 0.4:
            q = int(rng.integers(n))
            u = random_unitary(2, rng)
            ops.append(((q,), u))
            ref = embed({q: u}, n) @ ref
        else:
            a, b = (int(x) for x in rng.choice(n, 2, replace=False))
            u = random_unitary(4, rng)
            ops.append(((a, b), u))
            ref = embed_2q(u, a, b, n) @ ref
    blocks = fuse_operations(ops, max_qubits=3)
    assert len(blocks) < len(ops)
    assert all(len(qs) <= 3 for qs, _ in blocks)
    psi = random_state(n, rng)
    s = StateVector(n, psi)
    for qs, u in blocks:
        s.apply_matrix(u, qs)
    np.testing.assert_allclose(s.amplitudes, ref @ psi, atol=1e-10)
    assert Z.shape == (2, 2)
