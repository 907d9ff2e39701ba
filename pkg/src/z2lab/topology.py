"""Cellular structure of the periodic square lattice and its dual.

Cell enumeration (fixed, used by every other module):

* vertex ``(i1, i2)`` has index ``i1 + L * i2``;
* edge index is ``2 * vertex + direction`` where direction 0 is the
  horizontal edge ``(i1, i2) -> (i1 + 1, i2)`` and direction 1 is the
  vertical edge ``(i1, i2) -> (i1, i2 + 1)``;
* plaquette ``(i1, i2)`` is the unit face with lower-left corner at vertex
  ``(i1, i2)`` and carries the vertex's index.

The dual lattice reuses these indices: dual vertices are plaquettes, the dual
edge crossing a primal edge shares its index, and dual faces are primal
vertices. Coordinates of a dual cell are those of the primal cell it is
identified with.

Canonical orientation: horizontal edges point ``+x`` and vertical edges
``+y``. The dual edge crossing a horizontal edge points ``+y`` and the one
crossing a vertical edge points ``+x``. The signed crossing of a primal edge
``e`` with a dual edge ``e*`` is ``det(dir e, dir e*)``, which is ``+1`` for
horizontal edges and ``-1`` for vertical edges. Only its parity enters the
topological statements; the sign is used to orient twists.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np

from . import gf2

PRIMAL = "primal"
DUAL = "dual"
_LAYERS = (PRIMAL, DUAL)


@dataclass(frozen=True)
class Lattice:
    """``L x L`` periodic square lattice.

    Any even ``L >= 2`` is accepted; ``L % 4 == 0`` is recorded in
    :attr:`mod4` because several constructions need it.
    """

    L: int

    def __post_init__(self):
        if not isinstance(self.L, (int, np.integer)) or self.L < 2 or self.L % 2:
            raise ValueError(f"L must be an even integer >= 2, got {self.L!r}")

    @property
    def mod4(self) -> bool:
        return self.L % 4 == 0

    @property
    def n_vertices(self) -> int:
        return self.L * self.L

    @property
    def n_edges(self) -> int:
        return 2 * self.L * self.L

    @property
    def n_faces(self) -> int:
        return self.L * self.L

    def vertex(self, i1: int, i2: int) -> int:
        L = self.L
        return i1 % L + L * (i2 % L)

    def edge(self, i1: int, i2: int, direction: int) -> int:
        return 2 * self.vertex(i1, i2) + direction

    def plaquette(self, i1: int, i2: int) -> int:
        return self.vertex(i1, i2)

    def coords(self, index: int) -> tuple[int, int]:
        """Coordinates of a vertex or plaquette index."""
        return index % self.L, index // self.L

    def edge_coords(self, index: int) -> tuple[int, int, int]:
        i1, i2 = self.coords(index // 2)
        return i1, i2, index % 2

    def sublattice(self) -> np.ndarray:
        """``(-1)**(i1 + i2)`` for every vertex."""
        return _sublattice(self.L).copy()

    def edge_endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """Tail and head vertex of every edge in canonical orientation."""
        t, h = _endpoints(self.L)
        return t.copy(), h.copy()

    def plaquette_edges(self) -> np.ndarray:
        """``(L*L, 4)`` array of the edges bounding each plaquette."""
        return _plaquette_edges(self.L).copy()

    def star_edges(self) -> np.ndarray:
        """``(L*L, 4)`` array of the edges incident to each vertex."""
        return _star_edges(self.L).copy()

    def distance(self, u: int, v: int) -> int:
        """Graph (Manhattan) distance on the torus."""
        L = self.L
        (a1, a2), (b1, b2) = self.coords(u), self.coords(v)
        d1, d2 = abs(a1 - b1) % L, abs(a2 - b2) % L
        return min(d1, L - d1) + min(d2, L - d2)


@lru_cache(maxsize=None)
def _sublattice(L: int) -> np.ndarray:
    i1, i2 = np.meshgrid(np.arange(L), np.arange(L), indexing="xy")
    s = np.where((i1 + i2) % 2 == 0, 1, -1).ravel()
    s.setflags(write=False)
    return s


@lru_cache(maxsize=None)
def _endpoints(L: int) -> tuple[np.ndarray, np.ndarray]:
    v = np.arange(L * L)
    i1, i2 = v % L, v // L
    tail = np.repeat(v, 2)
    head = np.empty(2 * L * L, dtype=np.int64)
    head[0::2] = (i1 + 1) % L + L * i2
    head[1::2] = i1 + L * ((i2 + 1) % L)
    tail.setflags(write=False)
    head.setflags(write=False)
    return tail, head


@lru_cache(maxsize=None)
def _plaquette_edges(L: int) -> np.ndarray:
    p = np.arange(L * L)
    i1, i2 = p % L, p // L
    up = i1 + L * ((i2 + 1) % L)
    right = (i1 + 1) % L + L * i2
    out = np.stack([2 * p, 2 * up, 2 * p + 1, 2 * right + 1], axis=1)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _star_edges(L: int) -> np.ndarray:
    v = np.arange(L * L)
    i1, i2 = v % L, v // L
    left = (i1 - 1) % L + L * i2
    down = i1 + L * ((i2 - 1) % L)
    out = np.stack([2 * v, 2 * left, 2 * v + 1, 2 * down + 1], axis=1)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _dual_endpoints(L: int) -> tuple[np.ndarray, np.ndarray]:
    # dual edge e joins plaquettes (tail -> head) in its canonical direction
    v = np.arange(L * L)
    i1, i2 = v % L, v // L
    tail = np.empty(2 * L * L, dtype=np.int64)
    tail[0::2] = i1 + L * ((i2 - 1) % L)
    tail[1::2] = (i1 - 1) % L + L * i2
    head = np.repeat(v, 2)
    tail.setflags(write=False)
    head.setflags(write=False)
    return tail, head


def cell_count(L: int, dim: int) -> int:
    return 2 * L * L if dim == 1 else L * L


@dataclass(frozen=True)
class Cell:
    """A single cell. ``direction`` is only meaningful for edges."""

    dim: int
    layer: str
    i1: int
    i2: int
    direction: int = 0


@dataclass(frozen=True, eq=False)
class Chain:
    """A chain with GF(2) coefficients stored as a bit vector.

    Parameters
    ----------
    L : int
        Linear lattice size.
    dim : int
        0, 1 or 2.
    layer : {"primal", "dual"}
    bits : ndarray of uint8
        Indicator vector over the cells of the given dimension.
    """

    L: int
    dim: int
    layer: str
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.dim not in (0, 1, 2):
            raise ValueError(f"chain dimension must be 0, 1 or 2, got {self.dim}")
        if self.layer not in _LAYERS:
            raise ValueError(f"layer must be 'primal' or 'dual', got {self.layer!r}")
        b = (np.asarray(self.bits).astype(np.int64) & 1).astype(np.uint8)
        if b.shape != (cell_count(self.L, self.dim),):
            raise ValueError("bit vector has the wrong length")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @classmethod
    def zero(cls, L: int, dim: int, layer: str = PRIMAL) -> "Chain":
        return cls(L, dim, layer, np.zeros(cell_count(L, dim), dtype=np.uint8))

    @classmethod
    def from_indices(cls, L: int, dim: int, layer: str, indices: Iterable[int]) -> "Chain":
        """Chain containing each index an odd number of times."""
        b = np.zeros(cell_count(L, dim), dtype=np.int64)
        np.add.at(b, np.asarray(list(indices), dtype=np.int64), 1)
        return cls(L, dim, layer, b)

    @classmethod
    def from_cells(cls, L: int, dim: int, layer: str, cells: Iterable) -> "Chain":
        """Build from ``(i1, i2)`` or ``(i1, i2, direction)`` tuples."""
        lat = Lattice(L)
        idx = []
        for c in cells:
            if dim == 1:
                idx.append(lat.edge(c[0], c[1], c[2]))
            else:
                idx.append(lat.vertex(c[0], c[1]))
        return cls.from_indices(L, dim, layer, idx)

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    def cells(self) -> Iterator[Cell]:
        L = self.L
        for k in self.indices:
            k = int(k)
            if self.dim == 1:
                v, d = divmod(k, 2)
                yield Cell(1, self.layer, v % L, v // L, d)
            else:
                yield Cell(self.dim, self.layer, k % L, k // L)

    def __len__(self) -> int:
        return int(self.bits.sum())

    def is_empty(self) -> bool:
        return not self.bits.any()

    def _check(self, other: "Chain"):
        if (self.L, self.dim, self.layer) != (other.L, other.dim, other.layer):
            raise ValueError("chains live in different groups")

    def __add__(self, other: "Chain") -> "Chain":
        self._check(other)
        return Chain(self.L, self.dim, self.layer, self.bits ^ other.bits)

    __xor__ = __add__

    def __and__(self, other: "Chain") -> "Chain":
        self._check(other)
        return Chain(self.L, self.dim, self.layer, self.bits & other.bits)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Chain):
            return NotImplemented
        return (self.L, self.dim, self.layer) == (other.L, other.dim, other.layer) and bool(
            np.array_equal(self.bits, other.bits)
        )

    def __hash__(self) -> int:
        return hash((self.L, self.dim, self.layer, self.bits.tobytes()))

    def to_json(self) -> str:
        cells = []
        for c in self.cells():
            cells.append([c.i1, c.i2, c.direction] if self.dim == 1 else [c.i1, c.i2])
        return json.dumps({"L": self.L, "dim": self.dim, "layer": self.layer, "cells": cells})

    @classmethod
    def from_json(cls, text: str) -> "Chain":
        d = json.loads(text)
        return cls.from_cells(int(d["L"]), int(d["dim"]), d["layer"], d["cells"])


@lru_cache(maxsize=None)
def boundary_matrix(L: int, dim: int, layer: str = PRIMAL) -> np.ndarray:
    """Incidence matrix of the boundary map from ``dim`` to ``dim - 1`` cells."""
    n_in = cell_count(L, dim)
    n_out = cell_count(L, dim - 1)
    m = np.zeros((n_out, n_in), dtype=np.uint8)
    cols = np.arange(n_in)
    if dim == 1:
        t, h = _endpoints(L) if layer == PRIMAL else _dual_endpoints(L)
        m[t, cols] ^= 1
        m[h, cols] ^= 1
    elif dim == 2:
        faces = _plaquette_edges(L) if layer == PRIMAL else _star_edges(L)
        for k in range(4):
            m[faces[:, k], cols] ^= 1
    else:
        raise ValueError("no boundary of 0-chain")
    m.setflags(write=False)
    return m


def boundary(c: Chain) -> Chain:
    """GF(2) boundary of a 1- or 2-chain, in the same layer."""
    if c.dim == 0:
        raise ValueError("no boundary of 0-chain")
    m = boundary_matrix(c.L, c.dim, c.layer)
    return Chain(c.L, c.dim - 1, c.layer, (m.astype(np.int64) @ c.bits) & 1)


def coboundary(vertices) -> Chain:
    """Dual 1-chain ``∂Λ``: edges with exactly one endpoint in ``Λ``.

    ``vertices`` is a primal 0-chain or a dual 2-chain (the same set).
    """
    if vertices.dim == 0 and vertices.layer == PRIMAL:
        vertices = Chain(vertices.L, 2, DUAL, vertices.bits)
    if vertices.dim != 2 or vertices.layer != DUAL:
        raise ValueError("coboundary expects a vertex set")
    return boundary(vertices)


def is_cycle(c: Chain) -> bool:
    return boundary(c).is_empty()


def boundary_witness(c: Chain) -> Chain | None:
    """A 2-chain whose boundary is ``c``, or ``None`` if none exists.

    The witness is the GF(2) solution with free variables set to zero,
    found by deterministic column-pivot elimination.
    """
    if c.dim != 1:
        raise ValueError("boundary witness is defined for 1-chains")
    x = gf2.solve(boundary_matrix(c.L, 2, c.layer), c.bits)
    if x is None:
        return None
    return Chain(c.L, 2, c.layer, x)


def is_boundary(c: Chain) -> bool:
    return boundary_witness(c) is not None


def homology_class(c: Chain) -> tuple[int, int]:
    """Winding parities ``(w1, w2)`` of a 1-cycle.

    For a primal cycle ``w1`` counts horizontal edges in column 0 and ``w2``
    vertical edges in row 0. For a dual cycle ``w1`` counts crossings of the
    vertical edges in column 0 (horizontal dual steps) and ``w2`` crossings of
    the horizontal edges in row 0 (vertical dual steps).
    """
    if c.dim != 1:
        raise ValueError("homology class is defined for 1-chains")
    if not is_cycle(c):
        raise ValueError("chain is not a cycle")
    L = c.L
    b = c.bits.reshape(L, L, 2)  # [i2, i1, dir]
    if c.layer == PRIMAL:
        w1 = int(b[:, 0, 0].sum() & 1)
        w2 = int(b[0, :, 1].sum() & 1)
    else:
        w1 = int(b[:, 0, 1].sum() & 1)
        w2 = int(b[0, :, 0].sum() & 1)
    return w1, w2


def crossing_signs(L: int) -> np.ndarray:
    """Signed intersection ``I(e, e*)`` of each primal edge with its dual."""
    s = np.ones(2 * L * L, dtype=np.int64)
    s[1::2] = -1
    return s


def intersection_number(c: Chain, cs: Chain, mod2: bool = False) -> int:
    """Intersection of a primal 1-chain with a dual 1-chain.

    Each shared edge contributes the canonical sign of
    :func:`crossing_signs`; with ``mod2=True`` the parity is returned.
    """
    if c.dim != 1 or cs.dim != 1:
        raise ValueError("intersection is defined between 1-chains")
    if c.layer != PRIMAL or cs.layer != DUAL:
        raise ValueError("need a primal chain and a dual chain")
    if c.L != cs.L:
        raise ValueError("chains live on different lattices")
    shared = c.bits & cs.bits
    if mod2:
        return int(shared.sum() & 1)
    return int(crossing_signs(c.L) @ shared)


def oriented_cocycle(cs: Chain) -> np.ndarray:
    """Integer orientation of a dual 1-cycle, one entry per primal edge.

    Entry ``e`` is the signed crossing of the canonically oriented primal
    edge with the oriented dual chain, zero off the support. A coboundary
    ``∂Λ`` is oriented as the integer coboundary ``χΛ(tail) - χΛ(head)``,
    so twisting by it is a pure gauge transformation. Other cycles are
    oriented by a deterministic decomposition into closed walks; at angle
    ``π`` only the support matters.
    """
    if cs.dim != 1 or cs.layer != DUAL:
        raise ValueError("twist support must be a dual 1-chain")
    if not is_cycle(cs):
        raise ValueError("twist support is not a dual cycle")
    L = cs.L
    lam = boundary_witness(cs)
    if lam is not None:
        t, h = _endpoints(L)
        chi = lam.bits.astype(np.int64)
        return chi[t] - chi[h]
    return _walk_orientation(cs)


def _walk_orientation(cs: Chain) -> np.ndarray:
    L = cs.L
    t, h = _dual_endpoints(L)
    sign = crossing_signs(L)
    edges = [int(e) for e in cs.indices]
    incident: dict[int, list[int]] = {}
    for e in edges:
        incident.setdefault(int(t[e]), []).append(e)
        incident.setdefault(int(h[e]), []).append(e)
    used: set[int] = set()
    out = np.zeros(2 * L * L, dtype=np.int64)
    for start_edge in edges:
        if start_edge in used:
            continue
        start = int(t[start_edge])
        node = start
        while True:
            nxt = next((e for e in incident[node] if e not in used), None)
            if nxt is None:
                break
            used.add(nxt)
            if int(t[nxt]) == node:
                out[nxt] = sign[nxt]
                node = int(h[nxt])
            else:
                out[nxt] = -sign[nxt]
                node = int(t[nxt])
            if node == start and all(e in used for e in incident[node]):
                break
    return out


# Canonical non-contractible cycles and cocycles.


def cycle_c1(L: int) -> Chain:
    """Horizontal primal loop along row 0."""
    return Chain.from_cells(L, 1, PRIMAL, [(i, 0, 0) for i in range(L)])


def cycle_c2(L: int) -> Chain:
    """Vertical primal loop along column 0."""
    return Chain.from_cells(L, 1, PRIMAL, [(0, i, 1) for i in range(L)])


def cocycle_c1(L: int) -> Chain:
    """Horizontal dual loop crossing the vertical edges ``v(i1, L-1)``.

    It meets ``C2`` once, so threading along it flips the holonomy ``b``.
    """
    return Chain.from_cells(L, 1, DUAL, [(i, L - 1, 1) for i in range(L)])


def cocycle_c2(L: int) -> Chain:
    """Vertical dual loop crossing the horizontal edges ``h(L-1, i2)``.

    It meets ``C1`` once, so threading along it flips the holonomy ``a``.
    """
    return Chain.from_cells(L, 1, DUAL, [(L - 1, i, 0) for i in range(L)])


def plaquette_chain(L: int, i1: int, i2: int) -> Chain:
    lat = Lattice(L)
    return Chain.from_indices(L, 2, PRIMAL, [lat.plaquette(i1, i2)])


def vertex_set(L: int, vertices: Iterable) -> Chain:
    """Primal 0-chain from vertex indices or ``(i1, i2)`` pairs."""
    lat = Lattice(L)
    idx = [v if np.isscalar(v) else lat.vertex(v[0], v[1]) for v in vertices]
    return Chain.from_indices(L, 0, PRIMAL, idx)


def straight_path(L: int, i: int, j: int) -> Chain:
    """Primal path from vertex ``i`` to ``j``: horizontal leg then vertical.

    Each leg takes the shorter way around the torus.
    """
    lat = Lattice(L)
    (a1, a2), (b1, b2) = lat.coords(i), lat.coords(j)
    idx = []
    d1 = (b1 - a1) % L
    s1 = 1 if d1 <= L - d1 else -1
    x = a1
    while x % L != b1:
        idx.append(lat.edge(x if s1 > 0 else x - 1, a2, 0))
        x += s1
    d2 = (b2 - a2) % L
    s2 = 1 if d2 <= L - d2 else -1
    y = a2
    while y % L != b2:
        idx.append(lat.edge(b1, y if s2 > 0 else y - 1, 1))
        y += s2
    return Chain.from_indices(L, 1, PRIMAL, idx)
