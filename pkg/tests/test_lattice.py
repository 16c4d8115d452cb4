import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaugesim.errors import ConfigError, ResourceCapError
from gaugesim.lattice import (
    COMPLIANT_SEQUENCE_N6,
    GaugeSector,
    LatticeSpec,
    ModelParams,
    ProductState,
    alternating_sequence,
    build_initial_state,
    check_compliance,
    gauge_sector_of,
    hamiltonian_paulisum,
    normalize_sequence,
    pauli_term_list,
    protection_paulisum,
    system_from_dict,
    system_to_dict,
    u1_generator,
    u1_site_spectrum,
    z2_generator,
)

from conftest import I2, X, Z, embed, terms_matrix

LATTICES = [LatticeSpec(2, "periodic"), LatticeSpec(3, "open"), LatticeSpec(4, "periodic"),
            LatticeSpec(4, "open")]


def dense_g_z2(lat, i):
    ops = {lat.matter_qubit(i): Z}
    for link in (lat.left_link(i), lat.right_link(i)):
        if link is not None:
            ops[lat.link_qubit(link)] = X
    return -embed(ops, lat.num_qubits)


def dense_g_u1(lat, i):
    n = lat.num_qubits
    eye = np.eye(2**n)
    left, right = lat.left_link(i), lat.right_link(i)
    tl = embed({lat.link_qubit(left): X}, n) if left is not None else eye
    tr = embed({lat.link_qubit(right): X}, n) if right is not None else eye
    return 0.5 * (tl - tr + embed({lat.matter_qubit(i): Z}, n) + (-1) ** i * eye)


def comm_norm(a, b):
    return np.linalg.norm(a @ b - b @ a, 2)


# ---------------------------------------------------------------- geometry

@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_qubit_count_and_alternation(n):
    for boundary, expect in (("periodic", 2 * n), ("open", 2 * n - 1)):
        lat = LatticeSpec(n, boundary)
        assert lat.num_qubits == expect
        roles = [lat.layout[q][0] for q in range(lat.num_qubits)]
        assert roles == ["matter" if q % 2 == 0 else "link" for q in range(lat.num_qubits)]
        for l in range(lat.n_links):
            a, b = lat.link_sites(l)
            assert 0 <= a < n and 0 <= b < n and a != b


def test_lattice_rejects_bad_input():
    with pytest.raises(ConfigError):
        LatticeSpec(0)
    with pytest.raises(ConfigError):
        LatticeSpec(4, "twisted")
    with pytest.raises(ConfigError):
        LatticeSpec(1, "periodic")


def test_model_params_validation():
    with pytest.raises(ConfigError):
        ModelParams(j=0)
    with pytest.raises(ConfigError):
        ModelParams(dt=-0.1)
    with pytest.raises(ConfigError):
        ModelParams(n_steps=-1)
    with pytest.raises(ConfigError):
        ModelParams(c_seq=(2, 1))
    p = ModelParams(v=6, c_seq=("1/2", -1))
    assert p.c_seq == (Fraction(1, 2), Fraction(-1))
    with pytest.raises(ConfigError):
        p.check_against(LatticeSpec(3, "open"))
    assert normalize_sequence([2, -4]) == (Fraction(1, 2), Fraction(-1))


# ---------------------------------------------------------------- initial states

def test_psi3_two_sites():
    lat = LatticeSpec(2, "periodic")
    s = build_initial_state("psi3", lat)
    assert s.matter_z == (1, -1)
    assert s.gauge_x == (-1, 1)
    assert gauge_sector_of(s, lat).g_u1 == (2, -2)


def test_defect_open_chain():
    lat = LatticeSpec(11, "open")
    s = build_initial_state("defect", lat)
    assert [i for i, z in enumerate(s.matter_z) if z == -1] == [5]
    assert set(s.gauge_x) == {1}


def test_half_filling_ring():
    lat = LatticeSpec(8, "periodic")
    s = build_initial_state("half_filling", lat)
    assert s.matter_z.count(-1) == 4
    assert np.mean(s.gauge_x) == 1.0
    assert gauge_sector_of(s, lat).g_z2 == (1, -1) * 4


def test_initial_state_errors():
    with pytest.raises(ConfigError):
        build_initial_state("psi3", LatticeSpec(5, "periodic"))
    with pytest.raises(ConfigError):
        build_initial_state("vacuum", LatticeSpec(4))


def test_psi3_sector_both_symmetries():
    lat = LatticeSpec(6, "periodic")
    sec = gauge_sector_of(build_initial_state("psi3", lat), lat)
    assert sec.g_z2 == (1, -1, 1, -1, 1, -1)
    assert sec.g_u1 == (2, -2, 2, -2, 2, -2)


def test_polarized_state_sector():
    lat = LatticeSpec(4, "periodic")
    s = ProductState((1,) * 4, (1,) * 4)
    sec = gauge_sector_of(s, lat)
    assert sec.g_z2[0] == -1 and sec.g_u1[0] == 1


@pytest.mark.parametrize("lat", LATTICES, ids=str)
@pytest.mark.parametrize("kind", ["defect", "half_filling", "psi3"])
def test_sector_matches_dense_generators(lat, kind):
    s = build_initial_state(kind, lat)
    sec = gauge_sector_of(s, lat)
    # product state in the storage basis: matter |0>/|1>, links |+>/|->
    plus = np.array([1, 1]) / np.sqrt(2)
    minus = np.array([1, -1]) / np.sqrt(2)
    factors = {}
    for i, z in enumerate(s.matter_z):
        factors[lat.matter_qubit(i)] = np.array([1, 0]) if z == 1 else np.array([0, 1])
    for l, x in enumerate(s.gauge_x):
        factors[lat.link_qubit(l)] = plus if x == 1 else minus
    psi = np.array([1.0])
    for q in reversed(range(lat.num_qubits)):
        psi = np.kron(psi, factors[q])
    for i in range(lat.n_matter):
        np.testing.assert_allclose(dense_g_z2(lat, i) @ psi, sec.g_z2[i] * psi, atol=1e-12)
        np.testing.assert_allclose(dense_g_u1(lat, i) @ psi, sec.g_u1[i] * psi, atol=1e-12)


def test_u1_spectrum_by_parity():
    lat = LatticeSpec(6, "periodic")
    assert u1_site_spectrum(lat, 0) == (-1, 0, 1, 2)
    assert u1_site_spectrum(lat, 1) == (-2, -1, 0, 1)


@pytest.mark.parametrize("lat", LATTICES, ids=str)
def test_generator_paulisums_match_definitions(lat):
    for i in range(lat.n_matter):
        np.testing.assert_allclose(
            terms_matrix(z2_generator(lat, i).as_list(), lat.num_qubits), dense_g_z2(lat, i))
        np.testing.assert_allclose(
            terms_matrix(u1_generator(lat, i).as_list(), lat.num_qubits), dense_g_u1(lat, i))


# ---------------------------------------------------------------- compliance

def test_compliant_sequence_n6():
    lat = LatticeSpec(6, "periodic")
    assert check_compliance(COMPLIANT_SEQUENCE_N6, lat)
    target = gauge_sector_of(build_initial_state("psi3", lat), lat)
    assert check_compliance(COMPLIANT_SEQUENCE_N6, lat, target, "physical_spectrum")
    # wider integer deviations admit (-2,-1,0,-2,-1,0)
    assert not check_compliance(COMPLIANT_SEQUENCE_N6, lat, deviation_domain="symmetric_integer")


def test_zero_sequence_not_compliant():
    assert not check_compliance([0] * 4, LatticeSpec(4))


def test_alternating_sequence_not_compliant():
    lat = LatticeSpec(6, "periodic")
    c = alternating_sequence(6)
    assert not check_compliance(c, lat, deviation_domain="symmetric_integer")
    assert not check_compliance(c, lat)
    # relative to psi3 the reachable deviations all share one sign pattern
    target = gauge_sector_of(build_initial_state("psi3", lat), lat)
    assert check_compliance(c, lat, target, "physical_spectrum")


@given(st.integers(1, 50), st.booleans())
@settings(max_examples=25, deadline=None)
def test_compliance_scale_invariant(k, flip):
    lat = LatticeSpec(6, "periodic")
    scale = Fraction(k, 7) * (-1 if flip else 1)
    for seq in (COMPLIANT_SEQUENCE_N6, alternating_sequence(6), (1, 2, 4, 8, 16, 32)):
        for dom in ("unit_step", "symmetric_integer"):
            assert (check_compliance([scale * Fraction(c) for c in seq], lat, deviation_domain=dom)
                    == check_compliance(seq, lat, deviation_domain=dom))


def test_compliance_limits():
    with pytest.raises(ResourceCapError):
        check_compliance([1] * 9, LatticeSpec(9))
    with pytest.raises(ConfigError):
        check_compliance([1, 2], LatticeSpec(3))
    with pytest.raises(ConfigError):
        check_compliance([1, 2, 3], LatticeSpec(3, "open"), deviation_domain="physical_spectrum")


# ---------------------------------------------------------------- Hamiltonians

def test_two_site_hopping_terms():
    lat = LatticeSpec(2, "periodic")
    terms = pauli_term_list(ModelParams(), lat, "z2")
    assert len(terms) == 4
    assert all(c == 0.5 for c, _ in terms)
    patterns = []
    for _, s in terms:
        links = [p for q, p in s.items() if lat.layout[q][0] == "link"]
        sites = {p for q, p in s.items() if lat.layout[q][0] == "matter"}
        assert links == ["Z"] and len(s) == 3
        patterns.append(sites.pop())
    assert sorted(patterns) == ["X", "X", "Y", "Y"]


def test_protection_shifts_link_fields():
    lat = LatticeSpec(6, "periodic")
    c = alternating_sequence(6)
    p = ModelParams(f=0.3, v=6.0, c_seq=c)
    coeffs = {tuple(sorted(s.items())): v for v, s in pauli_term_list(p, lat, "z2_protected")}
    for l in range(lat.n_links):
        i, k = lat.link_sites(l)
        want = 0.3 + 3.0 * float(c[k] - c[i])
        assert coeffs.get(((lat.link_qubit(l), "X"),), 0.0) == pytest.approx(want)


def test_u1_keeps_field_terms():
    lat = LatticeSpec(4, "periodic")
    p = ModelParams(f=0.7, mu=0.2)

    def singles(model):
        return {tuple(s.items()): c for c, s in pauli_term_list(p, lat, model) if len(s) == 1}

    assert singles("u1") == singles("z2")


@pytest.mark.parametrize("lat", LATTICES, ids=str)
def test_models_commute_with_their_generators(lat):
    n = lat.n_matter
    c = normalize_sequence(range(1, n + 1))
    p = ModelParams(f=0.8, mu=0.45, v=3.0, c_seq=c)
    h_z2 = terms_matrix(pauli_term_list(p, lat, "z2"), lat.num_qubits)
    h_u1 = terms_matrix(pauli_term_list(p, lat, "u1"), lat.num_qubits)
    h_prot = terms_matrix(pauli_term_list(p, lat, "z2_protected"), lat.num_qubits)
    for i in range(n):
        assert comm_norm(h_z2, dense_g_z2(lat, i)) < 1e-12
        assert comm_norm(h_prot, dense_g_z2(lat, i)) < 1e-12
        assert comm_norm(h_u1, dense_g_u1(lat, i)) < 1e-12


@pytest.mark.parametrize("lat", LATTICES, ids=str)
def test_protection_commutes_with_field_and_mass(lat):
    n, nq = lat.n_matter, lat.num_qubits
    p = ModelParams(f=0.8, mu=0.45, v=3.0, c_seq=normalize_sequence(range(1, n + 1)))
    h_g = terms_matrix(protection_paulisum(p, lat).as_list(), nq)
    h_f = sum(embed({q: X}, nq) for q in lat.gauge_qubits)
    h_m = sum((-1) ** i * embed({lat.matter_qubit(i): Z}, nq) for i in range(n))
    assert comm_norm(h_g, h_f) < 1e-12
    assert comm_norm(h_g, h_m) < 1e-12
    for i in range(n):
        assert comm_norm(h_g, dense_g_z2(lat, i)) < 1e-12
    # the protected model is H + H_G up to a constant
    h = terms_matrix(pauli_term_list(p, lat, "z2"), nq) + h_g
    hp = terms_matrix(pauli_term_list(p, lat, "z2_protected"), nq)
    shift = np.trace(h - hp).real / 2**nq
    np.testing.assert_allclose(h - hp, shift * np.eye(2**nq), atol=1e-12)


def test_hopping_does_not_commute_with_protection():
    lat = LatticeSpec(4, "periodic")
    p = ModelParams(v=6.0, c_seq=COMPLIANT_SEQUENCE_N6[:4])
    h_j = terms_matrix(pauli_term_list(ModelParams(), lat, "z2"), lat.num_qubits)
    h_g = terms_matrix(protection_paulisum(p, lat).as_list(), lat.num_qubits)
    assert comm_norm(h_j, h_g) > 0.1


def test_coefficients_real_and_hermitian():
    lat = LatticeSpec(3, "open")
    for model in ("z2", "u1"):
        h = hamiltonian_paulisum(ModelParams(f=1, mu=1), lat, model)
        assert h.is_hermitian()
        assert all(isinstance(c, float) for c, _ in pauli_term_list(ModelParams(f=1), lat, model))
    assert I2.shape == (2, 2)


# ---------------------------------------------------------------- JSON

def test_system_json_round_trip():
    lat = LatticeSpec(6, "periodic")
    p = ModelParams(f=2.5, mu=2.5, v=6.0, c_seq=COMPLIANT_SEQUENCE_N6, dt=0.2, n_steps=20)
    doc = json.loads(json.dumps(system_to_dict(lat, p, "psi3")))
    assert doc["c_seq"][0] == "-115/146"
    lat2, p2, s2 = system_from_dict(doc)
    assert (lat2, p2) == (lat, p)
    assert s2 == build_initial_state("psi3", lat)
    custom = ProductState((1, -1, 1), (1, 1))
    doc = system_to_dict(LatticeSpec(3, "open"), ModelParams(), custom)
    assert system_from_dict(doc)[2] == custom


def test_system_json_errors():
    with pytest.raises(ConfigError):
        system_from_dict({"boundary": "open"})
    with pytest.raises(ConfigError):
        system_from_dict({"n_matter": 3, "boundary": "open", "initial_state": 5})
    with pytest.raises(ConfigError):
        system_from_dict({"n_matter": 3, "boundary": "open",
                          "initial_state": {"matter_z": [1], "gauge_x": [1]}})
    assert isinstance(GaugeSector((1,), (0,)), GaugeSector)
