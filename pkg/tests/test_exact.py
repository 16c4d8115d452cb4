import numpy as np
import pytest

import gaugesim.exact as ex
from gaugesim.errors import ConvergenceError, ResourceCapError
from gaugesim.exact import PauliHamiltonian, build_hamiltonian, evolve_exact, loglog_slope, trotter_error_study
from gaugesim.lattice import LatticeSpec, ModelParams, ProductState, build_initial_state, pauli_term_list
from gaugesim.statevector import StateVector

from conftest import X, Z, embed, expm_h, random_state, terms_matrix


def prepared(kind, lat):
    from gaugesim.circuits import build_experiment_circuit

    c = build_experiment_circuit(kind, ModelParams(n_steps=0), lat, "computational")
    return c.apply_to(StateVector(lat.num_qubits))


@pytest.mark.parametrize("model", ["z2", "u1", "z2_protected"])
def test_sparse_matches_dense_expansion(model):
    lat = LatticeSpec(4, "periodic")
    p = ModelParams(f=0.7, mu=0.3, v=2.0, c_seq=(0.2, -0.4, 0.6, 1.0))
    terms = pauli_term_list(p, lat, model)
    h = build_hamiltonian(p, model, lat)
    np.testing.assert_allclose(h.to_dense(), terms_matrix(terms, lat.num_qubits), atol=1e-12)
    assert h.is_hermitian()


def test_single_bond_block():
    lat = LatticeSpec(2, "open")
    h = build_hamiltonian(ModelParams(f=0, mu=0), "z2", lat).to_dense()
    assert h.shape == (8, 8)
    rows, cols = np.nonzero(np.abs(h) > 1e-14)
    # hopping moves one particle across the link: matter bits 0 and 2 swap
    for r, c in zip(rows, cols):
        assert (r ^ c) == 0b101
        assert ((r >> 0) & 1) != ((r >> 2) & 1)


def test_field_spectrum():
    lat = LatticeSpec(3, "periodic")
    f = 0.4
    terms = [(c, s) for c, s in pauli_term_list(ModelParams(f=f, mu=0), lat, "z2")
             if list(s.values()) == ["X"]]
    ev = np.linalg.eigvalsh(PauliHamiltonian(terms, lat.num_qubits).to_dense())
    assert sorted(set(np.round(ev, 10))) == pytest.approx([-3 * f, -f, f, 3 * f])


def test_u1_hopping_blocked_in_psi3():
    lat = LatticeSpec(6, "periodic")
    terms = [t for t in pauli_term_list(ModelParams(f=0, mu=0), lat, "u1") if len(t[1]) == 3]
    h = PauliHamiltonian(terms, lat.num_qubits)
    psi = prepared("psi3", lat).amplitudes
    assert h.expectation(psi) == pytest.approx(0.0, abs=1e-14)
    assert np.linalg.norm(h.matvec(psi)) < 1e-14


def test_matrix_free_matches_sparse(rng):
    lat = LatticeSpec(4, "periodic")
    h = build_hamiltonian(ModelParams(f=0.7, mu=0.3), "z2", lat)
    psi = random_state(lat.num_qubits, rng)
    out = np.empty_like(psi)
    from gaugesim import _kernels as K

    got = K.pauli_sum_matvec(psi, h.flips, h.zmasks, h.coeffs, out)
    np.testing.assert_allclose(got, h.to_sparse() @ psi, atol=1e-12)


def test_evolve_zero_time_and_eigenstate(rng):
    lat = LatticeSpec(3, "open")
    h = build_hamiltonian(ModelParams(f=0.7, mu=0.3), "z2", lat)
    psi = random_state(lat.num_qubits, rng)
    np.testing.assert_allclose(evolve_exact(psi, h, 0.0).amplitudes, psi, atol=1e-14)
    w, v = np.linalg.eigh(h.to_dense())
    out = evolve_exact(v[:, 3], h, 2.7).amplitudes
    np.testing.assert_allclose(out, np.exp(-2.7j * w[3]) * v[:, 3], atol=1e-9)


def test_evolve_matches_expm_at_8_qubits(rng):
    lat = LatticeSpec(4, "periodic")
    h = build_hamiltonian(ModelParams(f=0.9, mu=0.35), "z2", lat)
    dense = terms_matrix(pauli_term_list(ModelParams(f=0.9, mu=0.35), lat, "z2"), 8)
    for _ in range(3):
        psi = random_state(8, rng)
        t = float(rng.uniform(0.5, 6.0))
        got = evolve_exact(psi, h, t).amplitudes
        np.testing.assert_allclose(got, expm_h(dense, t) @ psi, atol=1e-8)
        assert abs(np.linalg.norm(got) - 1) < 1e-9


def test_evolve_composes(rng):
    lat = LatticeSpec(4, "open")
    h = build_hamiltonian(ModelParams(f=0.5, mu=0.2), "z2", lat)
    psi = random_state(lat.num_qubits, rng)
    a = evolve_exact(evolve_exact(psi, h, 1.1), h, 2.3).amplitudes
    b = evolve_exact(psi, h, 3.4).amplitudes
    np.testing.assert_allclose(a, b, atol=1e-8)
    back = evolve_exact(b, h, -3.4).amplitudes
    np.testing.assert_allclose(back, psi, atol=1e-8)


def dense_g(lat, i, kind):
    n = lat.num_qubits
    eye = np.eye(2**n)
    left, right = lat.left_link(i), lat.right_link(i)
    zi = embed({lat.matter_qubit(i): Z}, n)
    tl = embed({lat.link_qubit(left): X}, n) if left is not None else eye
    tr = embed({lat.link_qubit(right): X}, n) if right is not None else eye
    if kind == "z2":
        return -tl @ zi @ tr
    return 0.5 * (tl - tr + zi + (-1) ** i * eye)


@pytest.mark.parametrize("model", ["z2", "u1"])
@pytest.mark.parametrize("lat", [LatticeSpec(3, "open"), LatticeSpec(4, "periodic")], ids=str)
def test_conservation_laws(model, lat, rng):
    h = build_hamiltonian(ModelParams(f=0.8, mu=0.4), model, lat)
    bits = rng.choice([-1, 1], lat.n_matter + lat.n_links)
    st = ProductState(tuple(bits[: lat.n_matter]), tuple(bits[lat.n_matter:]))
    from gaugesim.circuits import build_experiment_circuit

    s0 = build_experiment_circuit(st, ModelParams(n_steps=0), lat, "computational").apply_to(
        StateVector(lat.num_qubits))
    gens = [dense_g(lat, i, model) for i in range(lat.n_matter)]
    e0 = h.expectation(s0.amplitudes)
    g0 = [np.vdot(s0.amplitudes, g @ s0.amplitudes).real for g in gens]
    s = s0
    for _ in range(4):
        s = evolve_exact(s, h, 0.9)
        assert h.expectation(s.amplitudes) == pytest.approx(e0, abs=1e-9)
        for g, want in zip(gens, g0):
            assert np.vdot(s.amplitudes, g @ s.amplitudes).real == pytest.approx(want, abs=1e-9)


def test_convergence_error(rng):
    lat = LatticeSpec(3, "open")
    h = build_hamiltonian(ModelParams(f=0.8, mu=0.4), "z2", lat)
    psi = random_state(lat.num_qubits, rng)
    with pytest.raises(ConvergenceError):
        evolve_exact(psi, h, 5.0, krylov_dim=2, tol=1e-300, max_halvings=3)


def test_caps(monkeypatch):
    with pytest.raises(ResourceCapError):
        PauliHamiltonian([(1.0, {25: "Z"})], 26)
    big = PauliHamiltonian([(1.0, {16: "Z"})], 17)
    with pytest.raises(ResourceCapError):
        big.to_sparse()
    with pytest.raises(ResourceCapError):
        PauliHamiltonian([(1.0, {12: "Z"})], 13).to_dense()
    with pytest.raises(ValueError):
        PauliHamiltonian([(1j, {0: "Z"})], 1)
    assert ex._krylov_basis_size(2**21, 30) == 7


def test_matrix_free_path_above_sparse_cap(rng, monkeypatch):
    lat = LatticeSpec(4, "periodic")
    h = build_hamiltonian(ModelParams(f=0.7, mu=0.3), "z2", lat)
    psi = random_state(8, rng)
    want = evolve_exact(psi, h, 1.5).amplitudes
    monkeypatch.setattr(ex, "SPARSE_MAX_QUBITS", 4)
    h2 = build_hamiltonian(ModelParams(f=0.7, mu=0.3), "z2", lat)
    np.testing.assert_allclose(evolve_exact(psi, h2, 1.5).amplitudes, want, atol=1e-9)


def test_trotter_study_small_step_limit():
    lat = LatticeSpec(4, "periodic")
    pts = trotter_error_study(ModelParams(f=0.75, mu=0.35), lat, [0.01], t_f=10.0)
    assert pts[0].n_steps == 1000
    assert pts[0].delta_e < 1e-4


def test_trotter_study_rounds_step_count_down():
    lat = LatticeSpec(2, "periodic")
    pts = trotter_error_study(ModelParams(f=0.75, mu=0.35), lat, [0.3, 0.7], t_f=1.0)
    assert [p.n_steps for p in pts] == [3, 1]
    with pytest.raises(ValueError):
        trotter_error_study(ModelParams(), lat, [0.1], model="u1")


def test_loglog_slope():
    pts = [ex.TrotterErrorPoint(dt, 1, 3.0 * dt**2) for dt in (0.1, 0.2, 0.4, 0.8)]
    slope, icpt = loglog_slope(pts, 0.1, 0.4)
    assert slope == pytest.approx(2.0)
    assert np.exp(icpt) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        loglog_slope(pts, 0.15, 0.19)
    assert build_initial_state("defect", LatticeSpec(3, "open")).matter_z == (1, -1, 1)
