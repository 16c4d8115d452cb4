"""Lattice geometry, spin Hamiltonians, gauge generators and initial states.

Qubit layout along the chain alternates matter and gauge qubits: matter site
``i`` lives on qubit ``2i`` and the link ``(i, i+1)`` on qubit ``2i + 1``.
With periodic boundaries the last link ``(N-1, 0)`` is qubit ``2N - 1``; with
open boundaries there are ``N - 1`` links and ``2N - 1`` qubits.

Gauge qubits are stored in the computational basis, so the electric field
``tau^x`` is the Pauli ``X`` of a gauge qubit.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import numpy as np

from .errors import ConfigError, ResourceCapError
from .pauli import PauliSum

BOUNDARIES = ("open", "periodic")
MODELS = ("z2", "u1", "z2_protected")
INITIAL_STATES = ("defect", "half_filling", "psi3")
DEVIATION_DOMAINS = ("unit_step", "symmetric_integer", "physical_spectrum")

# exhaustive compliance enumeration visits 7**N deviation vectors
MAX_COMPLIANCE_SITES = 8
# normalisation of the squared-deviation gauge-violation measures
KAPPA_U1 = 9
KAPPA_Z2 = 4


def as_fraction(x: Any) -> Fraction:
    """Parse an int, float, ``Fraction`` or ``"p/q"`` string as a rational."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise ConfigError(f"not a rational number: {x!r}")
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ConfigError(f"not a finite number: {x!r}")
        return Fraction(float(x)).limit_denominator(10**6)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except ValueError as exc:
            raise ConfigError(f"cannot parse rational {x!r}") from exc
    raise ConfigError(f"not a rational number: {x!r}")


def normalize_sequence(seq: Sequence[Any]) -> tuple[Fraction, ...]:
    """Scale a protection sequence so its largest entry has magnitude one."""
    c = tuple(as_fraction(x) for x in seq)
    top = max((abs(x) for x in c), default=Fraction(0))
    if top == 0:
        return c
    return tuple(x / top for x in c)


def alternating_sequence(n: int) -> tuple[Fraction, ...]:
    """The simple protection sequence ``c_i = (-1)**i``."""
    return tuple(Fraction((-1) ** i) for i in range(n))


# compliant for N = 6 matter sites
COMPLIANT_SEQUENCE_N6 = tuple(
    Fraction(x, 146) for x in (-115, 116, -118, 122, -130, 146)
)


@dataclass(frozen=True)
class LatticeSpec:
    """A 1D chain of ``n_matter`` matter sites joined by gauge links."""

    n_matter: int
    boundary: str = "periodic"

    def __post_init__(self):
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if not isinstance(self.n_matter, (int, np.integer)) or self.n_matter < 1:
            raise ConfigError(f"n_matter must be a positive integer, got {self.n_matter!r}")
        if self.boundary == "periodic" and self.n_matter < 2:
            raise ConfigError("a periodic chain needs at least 2 matter sites")

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def n_links(self) -> int:
        return self.n_matter if self.periodic else self.n_matter - 1

    @property
    def num_qubits(self) -> int:
        return self.n_matter + self.n_links

    def matter_qubit(self, i: int) -> int:
        if not 0 <= i < self.n_matter:
            raise IndexError(f"matter site {i} out of range")
        return 2 * i

    def link_qubit(self, link: int) -> int:
        """Qubit of link ``(link, link + 1)``."""
        if not 0 <= link < self.n_links:
            raise IndexError(f"link {link} out of range")
        return 2 * link + 1

    def link_sites(self, link: int) -> tuple[int, int]:
        return link, (link + 1) % self.n_matter

    def left_link(self, i: int) -> int | None:
        if i > 0:
            return i - 1
        return self.n_matter - 1 if self.periodic else None

    def right_link(self, i: int) -> int | None:
        return i if i < self.n_links else None

    @property
    def matter_qubits(self) -> tuple[int, ...]:
        return tuple(2 * i for i in range(self.n_matter))

    @property
    def gauge_qubits(self) -> tuple[int, ...]:
        return tuple(2 * l + 1 for l in range(self.n_links))

    @property
    def layout(self) -> dict[int, tuple[str, Any]]:
        out: dict[int, tuple[str, Any]] = {}
        for i in range(self.n_matter):
            out[2 * i] = ("matter", i)
        for l in range(self.n_links):
            out[2 * l + 1] = ("link", self.link_sites(l))
        return out

    def bonds(self) -> list[tuple[int, int, int]]:
        """Qubit triples ``(matter i, link, matter i+1)`` in link order."""
        return [
            (2 * l, 2 * l + 1, 2 * self.link_sites(l)[1]) for l in range(self.n_links)
        ]


@dataclass(frozen=True)
class ModelParams:
    """Couplings in units of ``j`` plus the Trotter plan.

    ``c_seq`` holds exact rationals; ``v = 0`` disables gauge protection.
    """

    j: float = 1.0
    f: float = 0.0
    mu: float = 0.0
    v: float = 0.0
    c_seq: tuple[Fraction, ...] = ()
    dt: float = 0.2
    n_steps: int = 0

    def __post_init__(self):
        object.__setattr__(self, "c_seq", tuple(as_fraction(x) for x in self.c_seq))
        for name in ("j", "f", "mu", "v", "dt"):
            val = getattr(self, name)
            if not isinstance(val, (int, float, np.number)) or not math.isfinite(val):
                raise ConfigError(f"{name} must be a finite number, got {val!r}")
            object.__setattr__(self, name, float(val))
        if self.j <= 0:
            raise ConfigError(f"j must be positive, got {self.j}")
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not isinstance(self.n_steps, (int, np.integer)) or self.n_steps < 0:
            raise ConfigError(f"n_steps must be a non-negative integer, got {self.n_steps!r}")
        if any(abs(c) > 1 for c in self.c_seq):
            raise ConfigError("protection sequence entries must satisfy |c_i| <= 1; "
                              "use normalize_sequence()")

    @property
    def c_values(self) -> np.ndarray:
        return np.array([float(c) for c in self.c_seq])

    def check_against(self, lattice: LatticeSpec) -> None:
        """Raise ``ConfigError`` if the params do not fit ``lattice``."""
        if self.v != 0 and len(self.c_seq) != lattice.n_matter:
            raise ConfigError(
                f"protection sequence has {len(self.c_seq)} entries, "
                f"lattice has {lattice.n_matter} matter sites"
            )

    def protection(self, n_matter: int) -> np.ndarray:
        """``V c_i`` per site, zeros when protection is off."""
        if self.v == 0:
            return np.zeros(n_matter)
        if len(self.c_seq) != n_matter:
            raise ConfigError(
                f"protection sequence has {len(self.c_seq)} entries, need {n_matter}"
            )
        return self.v * self.c_values


@dataclass(frozen=True)
class GaugeSector:
    """Eigenvalues of the Z2 and U(1) generators, one per matter site."""

    g_z2: tuple[int, ...]
    g_u1: tuple[int, ...]


@dataclass(frozen=True)
class ProductState:
    """``sigma^z`` per matter site and ``tau^x`` per link, all +-1."""

    matter_z: tuple[int, ...]
    gauge_x: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "matter_z", tuple(int(s) for s in self.matter_z))
        object.__setattr__(self, "gauge_x", tuple(int(s) for s in self.gauge_x))
        if any(s not in (-1, 1) for s in self.matter_z + self.gauge_x):
            raise ConfigError("product-state eigenvalues must be +1 or -1")

    def check_against(self, lattice: LatticeSpec) -> None:
        if len(self.matter_z) != lattice.n_matter or len(self.gauge_x) != lattice.n_links:
            raise ConfigError(
                f"state has {len(self.matter_z)} sites/{len(self.gauge_x)} links, lattice "
                f"has {lattice.n_matter}/{lattice.n_links}"
            )

    def total_charge(self) -> int:
        return sum(self.matter_z)


def build_initial_state(kind: str, lattice: LatticeSpec) -> ProductState:
    """One of the three gauge-invariant product states.

    ``defect``: all ``sigma^z = +1`` except ``-1`` on the central site, field
    fully polarised. ``half_filling``: ``sigma^z = -1`` on even and ``+1`` on odd
    sites, field polarised. ``psi3``: ``sigma^z = (-1)**i`` with ``tau^x = -1``
    on links leaving even sites and ``+1`` on links leaving odd sites.
    """
    n = lattice.n_matter
    if kind == "defect":
        matter = [1] * n
        matter[n // 2] = -1
        gauge = [1] * lattice.n_links
    elif kind in ("half_filling", "psi3"):
        if lattice.periodic and n % 2:
            raise ConfigError(f"{kind} needs an even number of sites on a ring, got {n}")
        if kind == "half_filling":
            matter = [-1 if i % 2 == 0 else 1 for i in range(n)]
            gauge = [1] * lattice.n_links
        else:
            matter = [1 if i % 2 == 0 else -1 for i in range(n)]
            gauge = [-1 if l % 2 == 0 else 1 for l in range(lattice.n_links)]
    else:
        raise ConfigError(f"unknown initial state {kind!r}; choose from {INITIAL_STATES}")
    return ProductState(tuple(matter), tuple(gauge))


def _link_value(state: ProductState, link: int | None) -> int:
    # missing boundary links act as a fixed +1 field
    return 1 if link is None else state.gauge_x[link]


def gauge_sector_of(state: ProductState, lattice: LatticeSpec) -> GaugeSector:
    state.check_against(lattice)
    g_z2, g_u1 = [], []
    for i in range(lattice.n_matter):
        left = _link_value(state, lattice.left_link(i))
        right = _link_value(state, lattice.right_link(i))
        sz = state.matter_z[i]
        g_z2.append(-left * sz * right)
        g_u1.append((left - right + sz + (-1) ** i) // 2)
    return GaugeSector(tuple(g_z2), tuple(g_u1))


def z2_generator(lattice: LatticeSpec, i: int) -> PauliSum:
    """``G_i = -tau^x_{i-1,i} sigma^z_i tau^x_{i,i+1}`` (edge links dropped)."""
    string = {lattice.matter_qubit(i): "Z"}
    for link in (lattice.left_link(i), lattice.right_link(i)):
        if link is not None:
            string[lattice.link_qubit(link)] = "X"
    return PauliSum.from_list([(-1.0, string)])


def u1_generator(lattice: LatticeSpec, i: int) -> PauliSum:
    """``G_i = [tau^x_{i-1,i} - tau^x_{i,i+1} + sigma^z_i + (-1)**i] / 2``."""
    terms = [(0.5, {lattice.matter_qubit(i): "Z"}), (0.5 * (-1) ** i, {})]
    left, right = lattice.left_link(i), lattice.right_link(i)
    terms.append((0.5, {lattice.link_qubit(left): "X"}) if left is not None else (0.5, {}))
    terms.append((-0.5, {lattice.link_qubit(right): "X"}) if right is not None else (-0.5, {}))
    return PauliSum.from_list(terms).simplify()


def u1_site_spectrum(lattice: LatticeSpec, i: int) -> tuple[int, ...]:
    """Eigenvalues of ``G_i^{U(1)}`` reachable by product states."""
    has_left = lattice.left_link(i) is not None
    has_right = lattice.right_link(i) is not None
    vals = set()
    for left in ((1, -1) if has_left else (1,)):
        for right in ((1, -1) if has_right else (1,)):
            for sz in (1, -1):
                vals.add((left - right + sz + (-1) ** i) // 2)
    return tuple(sorted(vals))


def check_compliance(
    c: Sequence[Any],
    lattice: LatticeSpec,
    target: GaugeSector | None = None,
    deviation_domain: str = "unit_step",
) -> bool:
    """True iff ``sum_i c_i d_i = 0`` forces every deviation ``d_i`` to vanish.

    ``unit_step`` lets each ``d_i`` range over ``-1..1`` (a single hop shifts
    each generator by at most one); ``symmetric_integer`` over ``-3..3``;
    ``physical_spectrum`` restricts it to ``g - target.g_u1[i]`` for ``g`` in the
    site's generator spectrum. Exhaustive, hence limited to
    ``MAX_COMPLIANCE_SITES`` sites.
    """
    n = lattice.n_matter
    if len(c) != n:
        raise ConfigError(f"sequence length {len(c)} does not match {n} matter sites")
    if n > MAX_COMPLIANCE_SITES:
        raise ResourceCapError(
            f"exhaustive compliance check limited to {MAX_COMPLIANCE_SITES} sites, got {n}"
        )
    if deviation_domain not in DEVIATION_DOMAINS:
        raise ConfigError(f"deviation_domain must be one of {DEVIATION_DOMAINS}")
    fracs = [as_fraction(x) for x in c]
    denom = math.lcm(*(x.denominator for x in fracs))
    ints = np.array([int(x * denom) for x in fracs], dtype=np.int64)

    if deviation_domain == "unit_step":
        domains = [np.arange(-1, 2)] * n
    elif deviation_domain == "symmetric_integer":
        domains = [np.arange(-3, 4)] * n
    else:
        if target is None:
            raise ConfigError("physical_spectrum compliance needs a target sector")
        domains = [
            np.array([g - target.g_u1[i] for g in u1_site_spectrum(lattice, i)])
            for i in range(n)
        ]

    sums = np.zeros(1, dtype=np.int64)
    nonzero = np.zeros(1, dtype=bool)
    for ci, dom in zip(ints, domains):
        sums = (sums[:, None] + ci * dom[None, :]).ravel()
        nonzero = (nonzero[:, None] | (dom != 0)[None, :]).ravel()
    return not bool(np.any((sums == 0) & nonzero))


def hopping_terms(lattice: LatticeSpec, j: float, model: str = "z2") -> PauliSum:
    """Matter-gauge coupling as Pauli strings.

    ``z2``: ``sigma^+ tau^z sigma^- + h.c. = (XZX + YZY)/2`` per bond.
    ``u1``: ``tau^z`` replaced by the x-basis raising operator ``tau^z - i tau^y``.
    """
    terms = []
    for qi, ql, qk in lattice.bonds():
        terms.append((0.5 * j, {qi: "X", ql: "Z", qk: "X"}))
        terms.append((0.5 * j, {qi: "Y", ql: "Z", qk: "Y"}))
        if model == "u1":
            terms.append((-0.5 * j, {qi: "X", ql: "Y", qk: "Y"}))
            terms.append((0.5 * j, {qi: "Y", ql: "Y", qk: "X"}))
    return PauliSum.from_list(terms)


def single_qubit_fields(params: ModelParams, lattice: LatticeSpec,
                        protected: bool) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of ``sigma^z_i`` per site and ``tau^x`` per link.

    Protection ``V sum_i c_i G_i^{U(1)}`` regroups into ``V c_i / 2`` on each
    ``sigma^z_i`` and ``(V/2)(c_{i+1} - c_i)`` on link ``(i, i+1)``; its constant
    part is dropped.
    """
    n = lattice.n_matter
    z = np.array([0.5 * params.mu * (-1) ** i for i in range(n)])
    x = np.full(lattice.n_links, params.f)
    if protected and params.v != 0:
        vc = params.protection(n)
        z = z + 0.5 * vc
        for i in range(n):
            left, right = lattice.left_link(i), lattice.right_link(i)
            if left is not None:
                x[left] += 0.5 * vc[i]
            if right is not None:
                x[right] -= 0.5 * vc[i]
    return z, x


def hamiltonian_paulisum(params: ModelParams, lattice: LatticeSpec, model: str = "z2") -> PauliSum:
    if model not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}, got {model!r}")
    if model == "z2_protected":
        params.check_against(lattice)
    h = hopping_terms(lattice, params.j, "u1" if model == "u1" else "z2")
    z, x = single_qubit_fields(params, lattice, protected=model == "z2_protected")
    h = h + PauliSum.from_list(
        [(z[i], {lattice.matter_qubit(i): "Z"}) for i in range(lattice.n_matter)]
        + [(x[l], {lattice.link_qubit(l): "X"}) for l in range(lattice.n_links)]
    )
    return h.simplify(atol=0.0)


def pauli_term_list(params: ModelParams, lattice: LatticeSpec,
                    model: str = "z2") -> list[tuple[float, dict[int, str]]]:
    """The Hamiltonian as ``(coefficient, {qubit: letter})`` pairs.

    Zero coefficients are omitted; all coefficients are real.
    """
    h = hamiltonian_paulisum(params, lattice, model)
    return [(float(np.real(c)), s) for c, s in h.as_list() if c != 0]


def protection_paulisum(params: ModelParams, lattice: LatticeSpec) -> PauliSum:
    """``H_G = V sum_i c_i G_i^{U(1)}`` including its constant."""
    vc = params.protection(lattice.n_matter)
    out = PauliSum()
    for i in range(lattice.n_matter):
        out = out + u1_generator(lattice, i) * float(vc[i])
    return out.simplify()


# ---------------------------------------------------------------- JSON

def _fraction_to_json(x: Fraction) -> int | str:
    return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def system_to_dict(lattice: LatticeSpec, params: ModelParams,
                   initial_state: str | ProductState) -> dict[str, Any]:
    if isinstance(initial_state, ProductState):
        init: Any = {"matter_z": list(initial_state.matter_z),
                     "gauge_x": list(initial_state.gauge_x)}
    else:
        init = initial_state
    return {
        "n_matter": lattice.n_matter,
        "boundary": lattice.boundary,
        "j": params.j,
        "f": params.f,
        "mu": params.mu,
        "v": params.v,
        "c_seq": [_fraction_to_json(c) for c in params.c_seq],
        "dt": params.dt,
        "n_steps": params.n_steps,
        "initial_state": init,
    }


def system_from_dict(doc: Mapping[str, Any]) -> tuple[LatticeSpec, ModelParams, ProductState]:
    """Inverse of :func:`system_to_dict`; the initial state is resolved."""
    try:
        lattice = LatticeSpec(int(doc["n_matter"]), doc.get("boundary", "periodic"))
        params = ModelParams(
            j=doc.get("j", 1.0), f=doc.get("f", 0.0), mu=doc.get("mu", 0.0),
            v=doc.get("v", 0.0), c_seq=tuple(doc.get("c_seq", ())),
            dt=doc.get("dt", 0.2), n_steps=int(doc.get("n_steps", 0)),
        )
        init = doc.get("initial_state", "half_filling")
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]!r}") from exc
    if isinstance(init, str):
        state = build_initial_state(init, lattice)
    elif isinstance(init, Mapping):
        state = ProductState(tuple(init["matter_z"]), tuple(init["gauge_x"]))
        state.check_against(lattice)
    else:
        raise ConfigError(f"initial_state must be a name or product-state map, got {init!r}")
    params.check_against(lattice)
    return lattice, params, state
