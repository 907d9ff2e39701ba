"""Exact many-body oracle on the ``L = 2`` torus.

The ``L = 2`` torus keeps all eight edges (each vertex pair is joined by two
distinct edges per direction), so ``|E| = 2|V|`` and the flux constraint hold
as on larger lattices. The Hilbert space is ``Fock ⊗ gauge`` with basis index
``fock * 256 + gauge``: bit ``e`` of the gauge index set means
``σ^z_e = -1``, and fermion mode ``2 * site + spin`` (``site`` for spinless
fermions) is bit ``mode`` of the Fock index. Jordan-Wigner signs follow the
mode order.

Physical states are spanned by ``P_G |n, σ_c⟩`` with ``n`` of even fermion
number and ``σ_c`` the canonical representative of each of the 32 gauge
classes; these vectors have norm² ``1/8`` and are mutually orthogonal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .flux import kato_step
from .gauge import GaugeConfig, canonical_rep, iter_sectors
from .topology import Lattice, _endpoints, _star_edges, cycle_c1, cycle_c2

L2 = 2
N_SITES = 4
N_EDGES = 8
GAUGE_DIM = 2**N_EDGES


@dataclass(frozen=True)
class ManyBodySpace:
    spinful: bool = True

    @property
    def n_modes(self) -> int:
        return 2 * N_SITES if self.spinful else N_SITES

    @property
    def fock_dim(self) -> int:
        return 2**self.n_modes

    @property
    def dim(self) -> int:
        return self.fock_dim * GAUGE_DIM

    def mode(self, site: int, spin: int = 0) -> int:
        return 2 * site + spin if self.spinful else site

    def site_modes(self, site: int) -> list[int]:
        return [2 * site, 2 * site + 1] if self.spinful else [site]

    @property
    def spins(self) -> tuple[int, ...]:
        return (0, 1) if self.spinful else (0,)


def _popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    c = np.zeros_like(x)
    while np.any(x):
        c += x & 1
        x = x >> 1
    return c


@lru_cache(maxsize=None)
def creation(n_modes: int, mode: int) -> sp.csr_matrix:
    """Fock-space matrix of ``a+_mode`` with Jordan-Wigner signs."""
    dim = 2**n_modes
    states = np.arange(dim)
    empty = states[(states >> mode) & 1 == 0]
    sign = 1 - 2 * (_popcount(empty & ((1 << mode) - 1)) & 1)
    return sp.csr_matrix((sign.astype(float), (empty | (1 << mode), empty)), shape=(dim, dim))


def annihilation(n_modes: int, mode: int) -> sp.csr_matrix:
    return creation(n_modes, mode).T.tocsr()


@lru_cache(maxsize=None)
def number(n_modes: int, mode: int) -> sp.csr_matrix:
    dim = 2**n_modes
    occ = ((np.arange(dim) >> mode) & 1).astype(float)
    return sp.diags(occ).tocsr()


def parity(n_modes: int, modes) -> sp.csr_matrix:
    """``(-1)**(sum of occupations over modes)``."""
    dim = 2**n_modes
    s = np.arange(dim)
    mask = sum(1 << k for k in modes)
    return sp.diags((1 - 2 * (_popcount(s & mask) & 1)).astype(float)).tocsr()


def sigma_z(edges) -> sp.csr_matrix:
    """Product of ``σ^z`` over the given edges, on the gauge factor."""
    g = np.arange(GAUGE_DIM)
    mask = sum(1 << int(e) for e in edges)
    return sp.diags((1 - 2 * (_popcount(g & mask) & 1)).astype(float)).tocsr()


def sigma_x(edges) -> sp.csr_matrix:
    """Product of ``σ^x`` over the given edges, on the gauge factor."""
    g = np.arange(GAUGE_DIM)
    mask = sum(1 << int(e) for e in edges)
    return sp.csr_matrix((np.ones(GAUGE_DIM), (g ^ mask, g)), shape=(GAUGE_DIM, GAUGE_DIM))


def embed(fermion_op=None, gauge_op=None, space: ManyBodySpace = ManyBodySpace()) -> sp.csr_matrix:
    f = sp.identity(space.fock_dim, format="csr") if fermion_op is None else fermion_op
    g = sp.identity(GAUGE_DIM, format="csr") if gauge_op is None else gauge_op
    return sp.kron(f, g, format="csr")


def _sublattice() -> np.ndarray:
    return Lattice(L2).sublattice()


@lru_cache(maxsize=None)
def _hopping_dense(spinful: bool, tail: int, head: int) -> np.ndarray:
    out = _hopping_fermion(ManyBodySpace(spinful), tail, head).toarray()
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _onsite_dense(spinful: bool, m: float, U: float, w: float) -> np.ndarray:
    out = _onsite_fermion(ManyBodySpace(spinful), m, U, w).toarray()
    out.setflags(write=False)
    return out


def _hopping_fermion(space: ManyBodySpace, tail: int, head: int) -> sp.csr_matrix:
    n = space.n_modes
    out = sp.csr_matrix((space.fock_dim, space.fock_dim))
    for s in space.spins:
        out = out + creation(n, space.mode(tail, s)) @ annihilation(n, space.mode(head, s))
    return out


def _onsite_fermion(space: ManyBodySpace, m: float, U: float, w: float) -> sp.csr_matrix:
    n = space.n_modes
    stag = _sublattice()
    half = 0.5 * sp.identity(space.fock_dim, format="csr")
    h = sp.csr_matrix((space.fock_dim, space.fock_dim))
    for i in range(N_SITES):
        for s in space.spins:
            h = h + m * stag[i] * number(n, space.mode(i, s))
        if space.spinful and U:
            h = h + U * (number(n, space.mode(i, 0)) - half) @ (number(n, space.mode(i, 1)) - half)
    if not space.spinful and w:
        t_, h_ = _endpoints(L2)
        for e in range(N_EDGES):
            h = h + w * (number(n, int(t_[e])) - half) @ (number(n, int(h_[e])) - half)
    return h


def build_hamiltonian(t: float = 1.0, m: float = 1.0, U: float = 0.0, w: float = 0.0,
                      spinful: bool = True, phases=None) -> sp.csr_matrix:
    """Full many-body Hamiltonian on ``Fock ⊗ gauge``.

    Hopping across edge ``e`` is ``-t σ^z_e (phase_e a+_tail a_head + h.c.)``.
    ``U`` is the on-site Hubbard coupling (spinful), ``w`` the
    nearest-neighbour coupling (spinless).
    """
    space = ManyBodySpace(spinful)
    phases = np.ones(N_EDGES, dtype=complex) if phases is None else np.asarray(phases, dtype=complex)
    t_, h_ = _endpoints(L2)
    H = embed(_onsite_fermion(space, m, U, w), None, space).astype(complex)
    for e in range(N_EDGES):
        hop = _hopping_fermion(space, int(t_[e]), int(h_[e]))
        term = -t * phases[e] * hop
        H = H + embed(term + term.conj().T, sigma_z([e]), space)
    return H.tocsr()


def fermion_hamiltonian(sigma, t: float = 1.0, m: float = 1.0, U: float = 0.0, w: float = 0.0,
                        spinful: bool = True, phases=None) -> np.ndarray:
    """Dense Fock-space Hamiltonian in the fixed background ``sigma``."""
    sigma = np.asarray(sigma, dtype=float)
    phases = np.ones(N_EDGES, dtype=complex) if phases is None else np.asarray(phases, dtype=complex)
    t_, h_ = _endpoints(L2)
    H = _onsite_dense(spinful, float(m), float(U), float(w)).astype(complex)
    for e in range(N_EDGES):
        hop = _hopping_dense(spinful, int(t_[e]), int(h_[e]))
        term = -t * sigma[e] * phases[e] * hop
        H += term + term.conj().T
    return H


def star_operator(i: int) -> sp.csr_matrix:
    return sigma_x(_star_edges(L2)[i])


def charge(i: int, spinful: bool = True) -> sp.csr_matrix:
    """``Q_i = A_i (-1)**n_i`` on the full space."""
    space = ManyBodySpace(spinful)
    return embed(parity(space.n_modes, space.site_modes(i)), star_operator(i), space)


def gauss_projector(spinful: bool = True) -> sp.csr_matrix:
    space = ManyBodySpace(spinful)
    one = sp.identity(space.dim, format="csr")
    P = one
    for i in range(N_SITES):
        P = P @ ((one + charge(i, spinful)) * 0.5)
    return P.tocsr()


def _config_index(g: GaugeConfig) -> int:
    return int(sum(1 << e for e in range(N_EDGES) if g.sigma[e] == -1))


def _config_from_index(idx: int) -> np.ndarray:
    return np.array([1 - 2 * ((idx >> e) & 1) for e in range(N_EDGES)])


@dataclass(frozen=True, eq=False)
class GaussBasis:
    """Orthonormal basis of the physical subspace.

    ``V`` has one column per (class, even Fock state); ``classes`` lists the
    class representatives in column-block order.
    """

    spinful: bool
    V: sp.csr_matrix = field(repr=False)
    classes: tuple
    even_states: np.ndarray = field(repr=False)

    @property
    def block(self) -> int:
        return self.even_states.size

    def block_slice(self, c: int) -> slice:
        return slice(c * self.block, (c + 1) * self.block)


@lru_cache(maxsize=None)
def gauss_basis(spinful: bool = True) -> GaussBasis:
    space = ManyBodySpace(spinful)
    fock = np.arange(space.fock_dim)
    even = fock[_popcount(fock) % 2 == 0]
    reps = tuple(canonical_rep(s) for s in iter_sectors(L2))
    # charges act as signed permutations; apply the 16 products Q_Λ directly
    qs = [charge(i, spinful) for i in range(N_SITES)]
    qlam = []
    for code in range(16):
        op = sp.identity(space.dim, format="csr")
        for i in range(N_SITES):
            if (code >> i) & 1:
                op = qs[i] @ op
        qlam.append(op.tocsr())
    cols = []
    for g in reps:
        gi = _config_index(g)
        seeds = even * GAUGE_DIM + gi
        base = sp.csr_matrix((np.ones(seeds.size), (seeds, np.arange(seeds.size))),
                             shape=(space.dim, seeds.size))
        acc = sp.csr_matrix((space.dim, seeds.size))
        for op in qlam:
            acc = acc + op @ base
        cols.append(acc * (np.sqrt(8.0) / 16.0))
    V = sp.hstack(cols, format="csr")
    return GaussBasis(spinful, V, reps, even)


def physical_hamiltonian(H: sp.spmatrix, spinful: bool = True) -> np.ndarray:
    B = gauss_basis(spinful)
    return (B.V.conj().T @ H @ B.V).toarray()


@dataclass(frozen=True)
class ProjectedState:
    vector: np.ndarray
    norm2: float


def gauss_project(v, spinful: bool = True) -> ProjectedState:
    """Apply ``Π (1 + Q_i) / 2``; return the normalized image and its norm²."""
    v = np.asarray(v, dtype=complex)
    out = gauss_projector(spinful) @ v
    n2 = float(np.vdot(out, out).real)
    if n2 < 1e-24:
        raise ValueError("annihilated by projector")
    return ProjectedState(out / np.sqrt(n2), n2)


def product_state(psi, sigma, spinful: bool = True) -> np.ndarray:
    """``psi ⊗ |sigma⟩`` in the full space."""
    space = ManyBodySpace(spinful)
    idx = int(sum(1 << e for e in range(N_EDGES) if sigma[e] == -1))
    out = np.zeros(space.dim, dtype=complex)
    out[np.arange(space.fock_dim) * GAUGE_DIM + idx] = psi
    return out


def z_loop(chain) -> sp.csr_matrix:
    return sigma_z(np.flatnonzero(chain.bits))


@dataclass(frozen=True, eq=False)
class GroundSpace:
    """Lowest physical states.

    ``energies`` holds the lowest ``n_report`` physical eigenvalues; the
    first four eigenvectors are given as full-space vectors together with
    their holonomy labels ``(a, b)``.
    """

    energies: np.ndarray
    states: np.ndarray = field(repr=False)
    labels: list
    splitting: float
    gap: float
    U: float
    class_energies: np.ndarray = field(repr=False)

    @property
    def labels_distinct(self) -> bool:
        return len(set(self.labels)) == 4 and set(self.labels) == {(1, 1), (1, -1), (-1, 1), (-1, -1)}

    def to_json(self) -> str:
        return json.dumps({
            "energies": [float(x) for x in self.energies],
            "labels": [list(l) for l in self.labels],
            "splitting": self.splitting,
            "gap": self.gap,
            "U": self.U,
        })


def physical_blocks(t: float = 1.0, m: float = 1.0, U: float = 0.0, w: float = 0.0,
                    spinful: bool = True, phases=None) -> list[np.ndarray]:
    """Class blocks of the physical Hamiltonian.

    Block ``c`` is the Fock Hamiltonian in background ``σ_c`` restricted to
    even fermion number, which is what ``V^† H V`` reduces to.
    """
    B = gauss_basis(spinful)
    ev = B.even_states
    return [fermion_hamiltonian(g.sigma, t, m, U, w, spinful, phases)[np.ix_(ev, ev)]
            for g in B.classes]


@lru_cache(maxsize=64)
def _class_spectra(t, m, U, w, spinful):
    return tuple(np.linalg.eigh(h) for h in physical_blocks(t, m, U, w, spinful))


def _full_state(B: GaussBasis, c: int, vec) -> np.ndarray:
    phys = np.zeros(B.V.shape[1], dtype=complex)
    phys[B.block_slice(c)] = vec
    return B.V @ phys


def _labels(states, spinful: bool) -> list:
    space = ManyBodySpace(spinful)
    z1 = embed(None, z_loop(cycle_c1(L2)), space)
    z2 = embed(None, z_loop(cycle_c2(L2)), space)
    return [(int(round(np.vdot(s, z1 @ s).real)), int(round(np.vdot(s, z2 @ s).real)))
            for s in states]


def ground_space(t: float = 1.0, m: float = 1.0, U: float = 0.0, w: float = 0.0,
                 spinful: bool = True, n_report: int = 8) -> GroundSpace:
    """Four lowest physical eigenstates, with labels, splitting and gap.

    No structure is imposed: if the four lowest states do not carry the four
    distinct holonomy labels, ``labels_distinct`` is False. At ``L = 2`` the
    π-flux holonomy classes are split by ``O(t)`` (the doubled edges can
    cancel), so this is the generic outcome; see :func:`omega_states` for the
    projected π-flux ground states.
    """
    B = gauss_basis(spinful)
    spectra = _class_spectra(float(t), float(m), float(U), float(w), bool(spinful))
    allv = np.concatenate([e for e, _ in spectra])
    owner = np.concatenate([np.full(e.size, c) for c, (e, _) in enumerate(spectra)])
    col = np.concatenate([np.arange(e.size) for e, _ in spectra])
    order = np.argsort(allv, kind="stable")
    allv, owner, col = allv[order], owner[order], col[order]
    states = np.array([_full_state(B, int(owner[k]), spectra[owner[k]][1][:, col[k]])
                       for k in range(4)])
    class_e0 = np.array([e[0] for e, _ in spectra])
    return GroundSpace(allv[:n_report], states, _labels(states, spinful),
                       float(allv[3] - allv[0]), float(allv[4] - allv[3]), float(U), class_e0)


@dataclass(frozen=True, eq=False)
class OmegaStates:
    """Projected ground states of the four π-flux holonomy classes.

    ``classes[k]`` is the class index of ``states[k]``; ``level_gap[k]`` is the
    gap to the next level inside that class block.
    """

    energies: np.ndarray
    states: np.ndarray = field(repr=False)
    labels: list
    classes: tuple
    level_gap: np.ndarray

    @property
    def labels_distinct(self) -> bool:
        return sorted(self.labels) == sorted(HOLONOMY_LABELS)


HOLONOMY_LABELS = ((1, 1), (1, -1), (-1, 1), (-1, -1))


def omega_states(t: float = 1.0, m: float = 1.0, U: float = 0.0, w: float = 0.0,
                 spinful: bool = True) -> OmegaStates:
    """``Ω_ab``: lowest physical state of the π-flux class with holonomies ``(a, b)``."""
    B = gauss_basis(spinful)
    spectra = _class_spectra(float(t), float(m), float(U), float(w), bool(spinful))
    by_label = {}
    for c, g in enumerate(B.classes):
        if g.n_monopoles() == 0:
            by_label[g.holonomies()] = c
    cls = tuple(by_label[h] for h in HOLONOMY_LABELS)
    states = np.array([_full_state(B, c, spectra[c][1][:, 0]) for c in cls])
    energies = np.array([spectra[c][0][0] for c in cls])
    gaps = np.array([spectra[c][0][1] - spectra[c][0][0] for c in cls])
    return OmegaStates(energies, states, _labels(states, spinful), cls, gaps)


def monopole_gap_interacting(U: float, t: float = 1.0, m: float = 1.0) -> float:
    """``min over two-monopole classes of (E0(class) - E0(π-flux)) / 2``.

    ``E0(π-flux)`` is the lowest physical energy among the four π-flux classes.
    """
    gs = ground_space(t, m, U)
    B = gauss_basis(True)
    nmono = np.array([g.n_monopoles() for g in B.classes])
    e_pi = gs.class_energies[nmono == 0].min()
    return float((gs.class_energies[nmono == 2].min() - e_pi) / 2)


def hubbard_star_identity() -> float:
    """Largest entry of ``4(n↑ - 1/2)(n↓ - 1/2) - (1 - 2n↓)(1 - 2n↑)`` and
    of ``(1 - 2n↓)(1 - 2n↑) - (-1)**(n↑ + n↓)`` over all sites, on Fock space."""
    space = ManyBodySpace(True)
    n = space.n_modes
    one = sp.identity(space.fock_dim, format="csr")
    worst = 0.0
    for i in range(N_SITES):
        nu, nd = number(n, space.mode(i, 0)), number(n, space.mode(i, 1))
        hub = 4 * (nu - 0.5 * one) @ (nd - 0.5 * one)
        prod = (one - 2 * nd) @ (one - 2 * nu)
        par = parity(n, space.site_modes(i))
        worst = max(worst, abs(hub - prod).max(), abs(prod - par).max())
    return float(worst)


def dressed_pair(i: int, j: int, edge: int, spin_i: int = 0, spin_j: int = 1,
                 spinful: bool = True) -> sp.csr_matrix:
    """``a+_i σ^z_edge a+_j`` on the full space."""
    space = ManyBodySpace(spinful)
    n = space.n_modes
    f = creation(n, space.mode(i, spin_i)) @ creation(n, space.mode(j, spin_j))
    return embed(f, sigma_z([edge]), space)


def anticommutator_identity(i: int = 0, spinful: bool = True) -> float:
    """Norm of ``{X_{∂{i}}, a+_i Z_{(i,j)} a+_j}`` for an edge ``(i, j)``.

    ``X_{∂{i}}`` is the star ``A_i`` and the edge is the horizontal edge
    leaving ``i``; the two operators share exactly one edge.
    """
    space = ManyBodySpace(spinful)
    t_, h_ = _endpoints(L2)
    e = 2 * i
    j = int(h_[e])
    X = embed(None, star_operator(i), space)
    D = dressed_pair(i, j, e, 0, 1 if spinful else 0, spinful)
    return float(abs(X @ D + D @ X).max())


@dataclass(frozen=True)
class BraidingL2:
    ratio: complex
    denominator: complex
    anticommutator: float
    min_gap: float


def braiding_l2(t: float = 1.0, m: float = 1.0, i: int = 0, n_steps: int = 64) -> BraidingL2:
    """Braiding ratio for the loop ``C* = ∂{i}`` around one end of a fermion pair.

    The ground projector of the twisted family is transported blockwise in
    the physical space by Kato steps. The loop operator is
    ``A_i ∘ V(π)``, and the ratio compares ``⟨ξ|W|ξ⟩/⟨ξ|ξ⟩`` with
    ``⟨Ω|W|Ω⟩`` for ``ξ = a+_{i↑} σ^z_{(i,j)} a+_{j↓} Ω``.
    L = 2 is far from the regime where the loop is local; only the sign is
    meaningful.
    """
    space = ManyBodySpace(True)
    B = gauss_basis(True)
    t_, h_ = _endpoints(L2)
    lam = np.zeros(N_SITES)
    lam[i] = 1
    orient = (lam[t_] - lam[h_]).astype(float)
    ev = B.even_states
    om = omega_states(t, m)
    nb = len(B.classes)
    ground_classes = set(om.classes)
    Vphys = np.zeros((B.V.shape[1], B.V.shape[1]), dtype=complex)
    min_gap = np.inf
    phis = np.linspace(0, np.pi, n_steps + 1)
    for c in range(nb):
        sl = B.block_slice(c)
        if c not in ground_classes:
            Vphys[sl, sl] = np.eye(B.block)
            continue
        sig = B.classes[c].sigma

        def proj(phi):
            nonlocal min_gap
            h = fermion_hamiltonian(sig, t, m, phases=np.exp(-1j * phi * orient))[np.ix_(ev, ev)]
            e, u = np.linalg.eigh(h)
            min_gap = min(min_gap, e[1] - e[0])
            if e[1] - e[0] < 1e-9:
                raise RuntimeError(f"gap closed at phi={phi:.6g}")
            return np.outer(u[:, 0], u[:, 0].conj())

        P = proj(0.0)
        Vc = np.eye(B.block, dtype=complex)
        for phi in phis[1:]:
            Pn = proj(phi)
            Vc = kato_step(P, Pn) @ Vc
            P = Pn
        Vphys[sl, sl] = Vc
    A = embed(None, star_operator(i), space)
    Vs = sp.csr_matrix(Vphys)

    def W(v):
        # V acts on the physical subspace, which contains every vector used here
        return A @ (B.V @ (Vs @ (B.V.conj().T @ v)))

    omega = om.states[0]
    j = int(h_[2 * i])
    xi = dressed_pair(i, j, 2 * i) @ omega
    den = complex(np.vdot(omega, W(omega)))
    num = complex(np.vdot(xi, W(xi)) / np.vdot(xi, xi))
    return BraidingL2(num / den, den, anticommutator_identity(i), float(min_gap))
