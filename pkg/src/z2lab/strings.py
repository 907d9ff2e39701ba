"""Binary-symplectic algebra of edge strings, charges and fermion ends.

An operator is stored in the normal form

    i**k * X(x) * Z(z) * P(f) * F(g)

where ``X(x)`` is the product of ``σ^x`` over the dual 1-chain ``x``,
``Z(z)`` the product of ``σ^z`` over the primal 1-chain ``z``, ``P(f)`` the
fermion parity ``(-1)**(n_i↑ + n_i↓)`` over the site set ``f`` and ``F(g)``
an ordered monomial of single fermion operators. Reordering signs are
tracked exactly; fermion operators are symbols here and are only realized
as matrices in :mod:`manybody`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .topology import DUAL, PRIMAL, Chain, Lattice, _star_edges, boundary, plaquette_chain


@dataclass(frozen=True)
class FermionEnd:
    """A single creation (``dagger=True``) or annihilation operator."""

    site: int
    spin: int = 0
    dagger: bool = True

    @property
    def mode(self) -> tuple[int, int]:
        return self.site, self.spin


@dataclass(frozen=True, eq=False)
class StringOperator:
    L: int
    x: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    g: tuple = ()
    k: int = 0

    def __post_init__(self):
        n_e, n_v = 2 * self.L * self.L, self.L * self.L
        for name, n in (("x", n_e), ("z", n_e), ("f", n_v)):
            v = (np.asarray(getattr(self, name)).astype(np.int64) & 1).astype(np.uint8)
            if v.shape != (n,):
                raise ValueError(f"{name} support has the wrong length")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        object.__setattr__(self, "g", tuple(self.g))
        object.__setattr__(self, "k", int(self.k) % 4)
        modes = [e.mode for e in self.g]
        if len(set(modes)) != len(modes):
            raise ValueError("repeated fermion mode")

    @property
    def phase(self) -> complex:
        return 1j**self.k

    @property
    def x_support(self) -> Chain:
        return Chain(self.L, 1, DUAL, self.x)

    @property
    def z_support(self) -> Chain:
        return Chain(self.L, 1, PRIMAL, self.z)

    @property
    def fermion_parity_support(self) -> np.ndarray:
        return np.flatnonzero(self.f)

    def end_sites(self) -> np.ndarray:
        """Indicator of sites carrying an odd number of fermion ends."""
        v = np.zeros(self.L * self.L, dtype=np.int64)
        for e in self.g:
            v[e.site] += 1
        return (v & 1).astype(np.uint8)

    def __mul__(self, other: "StringOperator") -> "StringOperator":
        if self.L != other.L:
            raise ValueError("operators live on different lattices")
        sign = int(self.z @ other.x.astype(np.int64)) + int(self.end_sites() @ other.f.astype(np.int64))
        return StringOperator(
            self.L, self.x ^ other.x, self.z ^ other.z, self.f ^ other.f,
            self.g + other.g, self.k + other.k + 2 * sign,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, StringOperator):
            return NotImplemented
        return (
            self.L == other.L and self.k == other.k and self.g == other.g
            and np.array_equal(self.x, other.x) and np.array_equal(self.z, other.z)
            and np.array_equal(self.f, other.f)
        )

    def __hash__(self) -> int:
        return hash((self.L, self.k, self.g, self.x.tobytes(), self.z.tobytes(), self.f.tobytes()))

    def __str__(self) -> str:
        lat = Lattice(self.L)
        parts = [{0: "", 1: "i", 2: "-", 3: "-i"}[self.k]]
        if self.x.any():
            parts.append("X" + str([lat.edge_coords(int(e)) for e in np.flatnonzero(self.x)]))
        if self.z.any():
            parts.append("Z" + str([lat.edge_coords(int(e)) for e in np.flatnonzero(self.z)]))
        if self.f.any():
            parts.append("P" + str([lat.coords(int(v)) for v in np.flatnonzero(self.f)]))
        for e in self.g:
            parts.append(("a+" if e.dagger else "a-") + f"{lat.coords(e.site)}{'ud'[e.spin]}")
        body = " ".join(p for p in parts if p)
        return body or "1"


def identity(L: int) -> StringOperator:
    n = 2 * L * L
    return StringOperator(L, np.zeros(n), np.zeros(n), np.zeros(L * L))


def z_string(c: Chain) -> StringOperator:
    if c.dim != 1 or c.layer != PRIMAL:
        raise ValueError("z_string needs a primal 1-chain")
    op = identity(c.L)
    return StringOperator(c.L, op.x, c.bits, op.f)


def x_string(cs: Chain) -> StringOperator:
    if cs.dim != 1 or cs.layer != DUAL:
        raise ValueError("x_string needs a dual 1-chain")
    op = identity(cs.L)
    return StringOperator(cs.L, cs.bits, op.z, op.f)


def parity_string(L: int, sites) -> StringOperator:
    op = identity(L)
    f = np.zeros(L * L, dtype=np.int64)
    np.add.at(f, np.asarray(list(sites), dtype=np.int64), 1)
    return StringOperator(L, op.x, op.z, f)


def fermion(L: int, site: int, spin: int = 0, dagger: bool = True) -> StringOperator:
    op = identity(L)
    return StringOperator(L, op.x, op.z, op.f, (FermionEnd(site, spin, dagger),))


def star(L: int, i: int) -> StringOperator:
    """``A_i``: ``σ^x`` on the four edges at vertex ``i``."""
    return x_string(boundary(Chain.from_indices(L, 2, DUAL, [i])))


def plaquette(L: int, p: int) -> StringOperator:
    """``B_p``: ``σ^z`` around plaquette ``p``."""
    i1, i2 = Lattice(L).coords(p)
    return z_string(boundary(plaquette_chain(L, i1, i2)))


def charge(L: int, i: int) -> StringOperator:
    """``Q_i = A_i (-1)**(n_i↑ + n_i↓)``."""
    return star(L, i) * parity_string(L, [i])


def charge_product(L: int, sites) -> StringOperator:
    out = identity(L)
    for i in sites:
        out = out * charge(L, i)
    return out


def dressed_line(path: Chain, i: int, j: int, spin_i: int = 0, spin_j: int = 0,
                 dagger_i: bool = True, dagger_j: bool = True) -> StringOperator:
    """``a_i Z_C a_j`` for a primal path ``C``."""
    L = path.L
    return fermion(L, i, spin_i, dagger_i) * z_string(path) * fermion(L, j, spin_j, dagger_j)


def commutation_phase(s1: StringOperator, s2: StringOperator) -> int:
    """``±1`` such that ``s1 s2 = phase * s2 s1``."""
    if s1.L != s2.L:
        raise ValueError("operators live on different lattices")
    shared = {e.mode for e in s1.g} & {e.mode for e in s2.g}
    if shared:
        raise ValueError("operators share a fermion mode; no exchange phase")
    n = (int(s1.z @ s2.x.astype(np.int64)) + int(s1.x @ s2.z.astype(np.int64))
         + int(s1.f @ s2.end_sites().astype(np.int64)) + int(s1.end_sites() @ s2.f.astype(np.int64))
         + len(s1.g) * len(s2.g))
    return -1 if n % 2 else 1


def is_gauge_invariant(s: StringOperator) -> bool:
    """True iff ``s`` commutes with every charge ``Q_i``.

    Equivalent to ``∂z`` equalling the set of sites with an odd number of
    fermion ends.
    """
    star_count = s.z[_star_edges(s.L)].sum(axis=1) & 1
    return bool(np.array_equal(star_count.astype(np.uint8), s.end_sites()))
